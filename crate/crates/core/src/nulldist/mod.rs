//! Null distribution of `n * V_hat` and p-values.
//!
//! Under the null the statistic behaves like
//! `sum_{s,t} c_st chi2_1` with `c_st = eta_t * lambda_s / (n (n - P - 1))`,
//! where `lambda` and `eta` are eigenvalues of the adjusted phenotype and
//! genotype similarities and `P` counts user covariates.

pub mod davies;
pub mod liu;
pub mod permutation;
pub mod saddlepoint;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GsuError, Result};
use crate::kernels::{genotype_similarity, phenotype_similarity, KernelConfig};
use crate::model::{
    CovariateMatrix, GenotypeMatrix, Method, PhenotypeMatrix, SimilarityMatrix, SimilarityState, TestResult, VariantSet,
};
use crate::ustat::{adjusted_v_statistic, gsu_correlation, gsu_statistic, prepare, ProjectionContext};

pub use davies::{qf_cdf, ChiSquareTerm, DaviesFault, DaviesOutput};
pub use liu::{liu_pvalue, noncentral_chi2_sf};
pub use permutation::{permutation_pvalue, replicate_rng, PermutationOutcome};
pub use saddlepoint::saddlepoint_pvalue;

/// Maximum number of integration terms for the Davies inversion.
pub const DAVIES_LIMIT: usize = 1_000_000;

/// Small coefficients are folded into a normal term when their summed
/// absolute cubes stay below this fraction of the largest cube.
const NORMAL_FOLD_TOL: f64 = 1e-6;

/// Coefficient lists at or below this length are always inverted exactly.
const NORMAL_FOLD_MIN_TERMS: usize = 64;

/// Analytic p-value method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PValueMethod {
    /// Davies, falling back to saddlepoint and then Liu.
    #[default]
    Auto,
    Davies,
    Liu,
    Saddlepoint,
}

#[derive(Debug, Clone)]
pub struct PValueOptions {
    pub method: PValueMethod,
    pub davies_accuracy: f64,
    pub prune_rel_tol: f64,
    /// Number of permutations; `0` selects the analytic method.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for PValueOptions {
    fn default() -> Self {
        PValueOptions {
            method: PValueMethod::Auto,
            davies_accuracy: 1e-9,
            prune_rel_tol: 1e-8,
            permutations: 0,
            seed: 0,
        }
    }
}

impl PValueOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.davies_accuracy > 0.0 && self.davies_accuracy <= 1e-3) {
            return Err(GsuError::InvalidParameter(format!(
                "davies accuracy must lie in (0, 1e-3], got {}",
                self.davies_accuracy
            )));
        }
        if !(self.prune_rel_tol >= 0.0 && self.prune_rel_tol < 1.0) {
            return Err(GsuError::InvalidParameter(format!(
                "prune tolerance must lie in [0, 1), got {}",
                self.prune_rel_tol
            )));
        }
        if self.permutations > 0 && self.permutations < 100 {
            return Err(GsuError::InvalidParameter(format!(
                "at least 100 permutations required, got {}",
                self.permutations
            )));
        }
        Ok(())
    }
}

/// Eigen structure of the null mixture.
#[derive(Debug, Clone)]
pub struct NullSpectrum {
    /// Retained eigenvalues of the adjusted phenotype similarity.
    pub lambda_hat: Vec<f64>,
    /// Retained eigenvalues of the adjusted genotype similarity.
    pub eta_hat: Vec<f64>,
    pub scale: f64,
    pub coefficients: Vec<f64>,
}

/// Eigenvalues of a symmetric matrix sorted by decreasing absolute value,
/// keeping those with `|value| >= rel_tol * max |value|`.
pub fn pruned_eigenvalues(m: &DMatrix<f64>, rel_tol: f64) -> Result<Vec<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GsuError::NumericalFailure("non-finite matrix entry".into()));
    }
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GsuError::NumericalFailure("eigendecomposition failed".into()));
    }
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let max = values.first().map(|v| v.abs()).unwrap_or(0.0);
    values.retain(|v| v.abs() >= rel_tol * max && *v != 0.0);
    Ok(values)
}

impl NullSpectrum {
    /// Combine already pruned eigenvalue lists.
    pub fn from_eigenvalues(
        lambda_hat: Vec<f64>,
        eta_hat: Vec<f64>,
        n: usize,
        p_user: usize,
        prune_rel_tol: f64,
    ) -> Result<Self> {
        if n < p_user + 2 {
            return Err(GsuError::SampleTooSmall { n, min: p_user + 2 });
        }
        if lambda_hat.is_empty() || eta_hat.is_empty() {
            return Err(GsuError::DegenerateSpectrum);
        }
        let scale = 1.0 / (n as f64 * (n - p_user - 1) as f64);
        let mut coefficients = Vec::with_capacity(lambda_hat.len() * eta_hat.len());
        for l in &lambda_hat {
            for e in &eta_hat {
                coefficients.push(scale * e * l);
            }
        }
        let max = coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if !(max > 0.0) {
            return Err(GsuError::DegenerateSpectrum);
        }
        coefficients.retain(|c| c.abs() >= prune_rel_tol * max);
        Ok(NullSpectrum {
            lambda_hat,
            eta_hat,
            scale,
            coefficients,
        })
    }

    /// Mean of the mixture, `sum_k c_k`.
    pub fn mean(&self) -> f64 {
        self.coefficients.iter().sum()
    }
}

/// Spectrum of the null mixture for adjusted `k_hat` and `s_hat`.
pub fn null_spectrum(
    k_hat: &SimilarityMatrix,
    s_hat: &SimilarityMatrix,
    ctx: &Arc<ProjectionContext>,
    options: &PValueOptions,
) -> Result<NullSpectrum> {
    for m in [k_hat, s_hat] {
        match m.state() {
            SimilarityState::Adjusted(c) if Arc::ptr_eq(c, ctx) => {}
            SimilarityState::Adjusted(_) => return Err(GsuError::ContextMismatch),
            other => {
                return Err(GsuError::WrongState {
                    expected: "adjusted",
                    found: other.name(),
                })
            }
        }
    }
    let lambda = pruned_eigenvalues(s_hat.values(), options.prune_rel_tol)?;
    let eta = pruned_eigenvalues(k_hat.values(), options.prune_rel_tol)?;
    NullSpectrum::from_eigenvalues(lambda, eta, ctx.n(), ctx.p_user(), options.prune_rel_tol)
}

/// Split the coefficients into an exactly inverted head and a tail that is
/// replaced by a normal variable with matching mean and variance. Returns
/// `(head, sigma, shift)`.
pub fn fold_small_terms(coeffs: &[f64]) -> (Vec<f64>, f64, f64) {
    let mut sorted: Vec<f64> = coeffs.iter().cloned().filter(|c| *c != 0.0).collect();
    sorted.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    if sorted.len() <= NORMAL_FOLD_MIN_TERMS {
        return (sorted, 0.0, 0.0);
    }
    let largest = sorted[0].abs();
    let budget = NORMAL_FOLD_TOL * largest.powi(3);
    let mut cubes = 0.0;
    let mut cut = sorted.len();
    while cut > NORMAL_FOLD_MIN_TERMS {
        let c = sorted[cut - 1].abs();
        if cubes + c * c * c > budget {
            break;
        }
        cubes += c * c * c;
        cut -= 1;
    }
    let tail = sorted.split_off(cut);
    let shift: f64 = tail.iter().sum();
    let sigma = (2.0 * tail.iter().map(|c| c * c).sum::<f64>()).sqrt();
    (sorted, sigma, shift)
}

/// Result of an analytic tail computation.
#[derive(Debug, Clone, Copy)]
pub struct TailProbability {
    pub p_value: f64,
    pub method: Method,
    pub davies_fault: Option<DaviesFault>,
    /// Whether the requested method had to be replaced.
    pub fallback: bool,
}

/// Replace the coefficients by Davies terms: small coefficients are folded
/// into a normal term, and the rest are grouped into bins of relative width
/// `bin_width` on the log scale. A bin becomes one term at the bin mean with
/// the bin count as degrees of freedom, and its lost variance
/// `2 sum (c - mean)^2` moves to the normal term, so the mixture mean and
/// variance are preserved exactly. Returns `(terms, sigma, shift)`.
pub fn compress_terms(coeffs: &[f64], bin_width: f64) -> (Vec<ChiSquareTerm>, f64, f64) {
    let (mut head, sigma, shift) = fold_small_terms(coeffs);
    let single = |weight: f64| ChiSquareTerm {
        weight,
        dof: 1,
        noncentrality: 0.0,
    };
    if head.len() <= NORMAL_FOLD_MIN_TERMS || !(bin_width > 0.0) {
        return (head.into_iter().map(single).collect(), sigma, shift);
    }
    let step = bin_width.ln_1p();
    let mut keyed: Vec<((bool, i64), f64)> = head
        .drain(..)
        .map(|c| ((c > 0.0, (c.abs().ln() / step).floor() as i64), c))
        .collect();
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut terms = Vec::new();
    let mut var = sigma * sigma;
    for group in keyed.chunk_by(|a, b| a.0 == b.0) {
        let mean = group.iter().map(|g| g.1).sum::<f64>() / group.len() as f64;
        var += 2.0 * group.iter().map(|g| (g.1 - mean) * (g.1 - mean)).sum::<f64>();
        terms.push(ChiSquareTerm {
            weight: mean,
            dof: group.len() as u32,
            noncentrality: 0.0,
        });
    }
    terms.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
    (terms, var.sqrt(), shift)
}

/// Relative bin width used when grouping Davies terms.
pub const DAVIES_BIN_WIDTH: f64 = 2e-3;

/// Davies inversion with its fault report.
pub fn davies_tail(coeffs: &[f64], q: f64, acc: f64) -> Result<(f64, DaviesOutput)> {
    davies_tail_binned(coeffs, q, acc, DAVIES_BIN_WIDTH)
}

/// As [`davies_tail`] with an explicit bin width; `0` disables grouping.
pub fn davies_tail_binned(coeffs: &[f64], q: f64, acc: f64, bin_width: f64) -> Result<(f64, DaviesOutput)> {
    if coeffs.is_empty() || coeffs.iter().all(|c| *c == 0.0) {
        return Err(GsuError::DegenerateSpectrum);
    }
    let (terms, sigma, shift) = compress_terms(coeffs, bin_width);
    let out = qf_cdf(&terms, sigma, q - shift, DAVIES_LIMIT, acc);
    Ok(((1.0 - out.cdf).clamp(0.0, 1.0), out))
}

/// `P(sum_k c_k chi2_1 > q)` by Davies inversion. Faults other than a
/// round-off warning are returned as errors.
pub fn davies_pvalue(coeffs: &[f64], q: f64, acc: f64) -> Result<f64> {
    let (p, out) = davies_tail(coeffs, q, acc)?;
    match out.fault {
        None | Some(DaviesFault::RoundOff) => Ok(p),
        Some(f) => Err(GsuError::NumericalFailure(format!("davies fault {}", f.code()))),
    }
}

/// Tail probability by the configured analytic method.
///
/// Under `Auto`, a Davies fault or a Davies tail within ten times the
/// requested accuracy hands over to the saddlepoint, whose failure hands
/// over to Liu.
pub fn tail_probability(coeffs: &[f64], q: f64, options: &PValueOptions) -> Result<TailProbability> {
    let single = |method: Method, p: f64| TailProbability {
        p_value: p,
        method,
        davies_fault: None,
        fallback: false,
    };
    match options.method {
        PValueMethod::Davies => {
            let (p, out) = davies_tail(coeffs, q, options.davies_accuracy)?;
            match out.fault {
                None | Some(DaviesFault::RoundOff) => Ok(TailProbability {
                    p_value: p,
                    method: Method::Davies,
                    davies_fault: out.fault,
                    fallback: false,
                }),
                Some(f) => Err(GsuError::NumericalFailure(format!("davies fault {}", f.code()))),
            }
        }
        PValueMethod::Liu => Ok(single(Method::Liu, liu_pvalue(coeffs, q)?)),
        PValueMethod::Saddlepoint => Ok(single(Method::Saddlepoint, saddlepoint_pvalue(coeffs, q)?)),
        PValueMethod::Auto => {
            let (p, out) = davies_tail(coeffs, q, options.davies_accuracy)?;
            let usable = matches!(out.fault, None | Some(DaviesFault::RoundOff));
            if usable && p > 10.0 * options.davies_accuracy {
                return Ok(TailProbability {
                    p_value: p,
                    method: Method::Davies,
                    davies_fault: out.fault,
                    fallback: false,
                });
            }
            let p_sp = saddlepoint_pvalue(coeffs, q);
            let (p, method) = match p_sp {
                Ok(p) => (p, Method::Saddlepoint),
                Err(_) => (liu_pvalue(coeffs, q)?, Method::Liu),
            };
            Ok(TailProbability {
                p_value: p,
                method,
                davies_fault: out.fault,
                fallback: true,
            })
        }
    }
}

/// Association test with the phenotype side prepared once and reused across
/// variant sets.
#[derive(Debug, Clone)]
pub struct AssociationTest {
    ctx: Arc<ProjectionContext>,
    s_centered: SimilarityMatrix,
    s_adjusted: SimilarityMatrix,
    lambda_hat: Vec<f64>,
    s_degenerate: bool,
    kernels: KernelConfig,
    options: PValueOptions,
}

/// True when centering wiped out the matrix up to round-off.
fn centered_is_null(raw: &DMatrix<f64>, centered: &DMatrix<f64>) -> bool {
    let raw_max = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let centered_max = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    centered_max <= 1e-12 * raw_max.max(f64::MIN_POSITIVE)
}

impl AssociationTest {
    pub fn new(
        y: &PhenotypeMatrix,
        x: &CovariateMatrix,
        kernels: KernelConfig,
        options: PValueOptions,
    ) -> Result<Self> {
        let s = phenotype_similarity(y, &kernels)?;
        Self::from_similarity(&s, x, kernels, options)
    }

    /// Start from a raw phenotype similarity.
    pub fn from_similarity(
        s: &SimilarityMatrix,
        x: &CovariateMatrix,
        kernels: KernelConfig,
        options: PValueOptions,
    ) -> Result<Self> {
        options.validate()?;
        s.expect_state("raw")?;
        if x.n_subjects() != s.n() {
            return Err(GsuError::DimensionMismatch {
                what: "covariate rows",
                expected: s.n(),
                found: x.n_subjects(),
            });
        }
        if s.n() < x.p_user() + 3 {
            return Err(GsuError::SampleTooSmall {
                n: s.n(),
                min: x.p_user() + 3,
            });
        }
        let ctx = ProjectionContext::new(x)?;
        let (s_centered, s_adjusted) = prepare(s, &ctx)?;
        let s_degenerate = centered_is_null(s.values(), s_centered.values());
        let lambda_hat = if s_degenerate {
            Vec::new()
        } else {
            pruned_eigenvalues(s_adjusted.values(), options.prune_rel_tol)?
        };
        Ok(AssociationTest {
            ctx,
            s_centered,
            s_adjusted,
            lambda_hat,
            s_degenerate,
            kernels,
            options,
        })
    }

    pub fn n(&self) -> usize {
        self.ctx.n()
    }

    pub fn context(&self) -> &Arc<ProjectionContext> {
        &self.ctx
    }

    pub fn options(&self) -> &PValueOptions {
        &self.options
    }

    pub fn kernels(&self) -> &KernelConfig {
        &self.kernels
    }

    pub fn phenotype_centered(&self) -> &SimilarityMatrix {
        &self.s_centered
    }

    pub fn phenotype_adjusted(&self) -> &SimilarityMatrix {
        &self.s_adjusted
    }

    /// Test one variant set of `g`.
    pub fn test_set(&self, g: &GenotypeMatrix, set: &VariantSet) -> Result<TestResult> {
        if g.n_subjects() != self.n() {
            return Err(GsuError::DimensionMismatch {
                what: "genotype rows",
                expected: self.n(),
                found: g.n_subjects(),
            });
        }
        let k = genotype_similarity(g, set, &self.kernels)?;
        self.test_similarity(&k, &set.name, set.len())
    }

    /// Test a raw genotype-side similarity.
    pub fn test_similarity(&self, k: &SimilarityMatrix, set_name: &str, set_size: usize) -> Result<TestResult> {
        self.test_similarity_seeded(k, set_name, set_size, self.options.seed)
    }

    /// As [`test_similarity`](Self::test_similarity) with an explicit
    /// permutation seed.
    pub fn test_similarity_seeded(
        &self,
        k: &SimilarityMatrix,
        set_name: &str,
        set_size: usize,
        seed: u64,
    ) -> Result<TestResult> {
        k.expect_state("raw")?;
        let n = self.n();
        if k.n() != n {
            return Err(GsuError::DimensionMismatch {
                what: "similarity matrix size",
                expected: n,
                found: k.n(),
            });
        }
        let (k_centered, k_adjusted) = prepare(k, &self.ctx)?;
        let u = gsu_statistic(&k_centered, &self.s_centered)?;
        let v_hat = adjusted_v_statistic(&k_adjusted, &self.s_adjusted)?;
        let statistic = n as f64 * v_hat;

        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("u".to_string(), u);
        diagnostics.insert("v_hat".to_string(), v_hat);
        let u_gamma = match gsu_correlation(&k_centered, &self.s_centered) {
            Ok(r) => r,
            Err(GsuError::UndefinedCorrelation) => {
                diagnostics.insert("u_gamma_undefined".to_string(), 1.0);
                0.0
            }
            Err(e) => return Err(e),
        };

        let mut result = TestResult {
            set_name: set_name.to_string(),
            set_size,
            statistic,
            u_gamma,
            p_value: 1.0,
            method: match self.options.method {
                PValueMethod::Liu => Method::Liu,
                PValueMethod::Saddlepoint => Method::Saddlepoint,
                _ => Method::Davies,
            },
            n_eigen_kept: (0, self.lambda_hat.len()),
            diagnostics,
        };

        if self.options.permutations > 0 {
            let out = permutation_pvalue(&k_centered, &self.s_centered, self.options.permutations, seed)?;
            result.p_value = out.p_value;
            result.method = Method::Permutation;
            result
                .diagnostics
                .insert("permutation_exceed".to_string(), out.exceed as f64);
            return Ok(result);
        }

        let k_degenerate = centered_is_null(k.values(), k_centered.values());
        let spectrum = if self.s_degenerate || k_degenerate {
            Err(GsuError::DegenerateSpectrum)
        } else {
            pruned_eigenvalues(k_adjusted.values(), self.options.prune_rel_tol).and_then(|eta| {
                result.n_eigen_kept.0 = eta.len();
                NullSpectrum::from_eigenvalues(
                    self.lambda_hat.clone(),
                    eta,
                    n,
                    self.ctx.p_user(),
                    self.options.prune_rel_tol,
                )
            })
        };
        let spectrum = match spectrum {
            Ok(s) => s,
            Err(GsuError::DegenerateSpectrum) => {
                result.diagnostics.insert("degenerate_spectrum".to_string(), 1.0);
                return Ok(result);
            }
            Err(e) => return Err(e),
        };
        result
            .diagnostics
            .insert("n_coefficients".to_string(), spectrum.coefficients.len() as f64);
        let tail = tail_probability(&spectrum.coefficients, statistic, &self.options)?;
        result.p_value = tail.p_value;
        result.method = tail.method;
        if let Some(f) = tail.davies_fault {
            result.diagnostics.insert("davies_fault".to_string(), f.code() as f64);
        }
        if tail.fallback {
            result.diagnostics.insert("fallback".to_string(), 1.0);
        }
        Ok(result)
    }
}

/// One-shot association test of `set` in `g` against `y` adjusted for `x`.
pub fn test_association(
    g: &GenotypeMatrix,
    set: &VariantSet,
    y: &PhenotypeMatrix,
    x: &CovariateMatrix,
    kernels: &KernelConfig,
    options: &PValueOptions,
) -> Result<TestResult> {
    if g.n_subjects() != y.n_subjects() {
        return Err(GsuError::DimensionMismatch {
            what: "phenotype rows",
            expected: g.n_subjects(),
            found: y.n_subjects(),
        });
    }
    AssociationTest::new(y, x, kernels.clone(), options.clone())?.test_set(g, set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn davies_chi2_quantiles() {
        let p1 = davies_pvalue(&[1.0], 3.841459, 1e-9).unwrap();
        assert!((p1 - 0.05).abs() < 1e-6);
        let p2 = davies_pvalue(&[1.0, 1.0], 5.991465, 1e-9).unwrap();
        assert!((p2 - 0.05).abs() < 1e-6);
    }

    #[test]
    fn davies_matches_monte_carlo() {
        // 0.7 chi2_1 + 0.3 chi2_1 > 2
        let mut rng = replicate_rng(20240611, 0);
        let draws = 10_000_000usize;
        let mut hits = 0usize;
        for _ in 0..draws {
            let z1: f64 = rng.sample(rand_distr::StandardNormal);
            let z2: f64 = rng.sample(rand_distr::StandardNormal);
            if 0.7 * z1 * z1 + 0.3 * z2 * z2 > 2.0 {
                hits += 1;
            }
        }
        let mc = hits as f64 / draws as f64;
        let se = (mc * (1.0 - mc) / draws as f64).sqrt();
        let p = davies_pvalue(&[0.7, 0.3], 2.0, 1e-9).unwrap();
        assert!((p - mc).abs() < 3.0 * se, "davies {p} mc {mc} se {se}");
    }

    #[test]
    fn liu_close_to_davies() {
        let d = davies_pvalue(&[0.7, 0.3], 2.0, 1e-9).unwrap();
        let l = liu_pvalue(&[0.7, 0.3], 2.0).unwrap();
        assert!((d - l).abs() < 5e-3);
    }

    #[test]
    fn saddlepoint_deep_tail_and_mean() {
        let d = davies_pvalue(&[0.7, 0.3], 8.0, 1e-10).unwrap();
        let s = saddlepoint_pvalue(&[0.7, 0.3], 8.0).unwrap();
        // first-order Lugannani-Rice is about 3% high at this point
        assert!((s / d - 1.0).abs() < 5e-2, "{s} vs {d}");
        let dm = davies_pvalue(&[0.7, 0.3], 1.0, 1e-9).unwrap();
        let sm = saddlepoint_pvalue(&[0.7, 0.3], 1.0).unwrap();
        // the limiting form at the mean is about 0.011 above the exact tail
        assert!((dm - sm).abs() < 2e-2, "{sm} vs {dm}");
    }

    #[test]
    fn rank_one_spectrum() {
        let a = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let m = &a * a.transpose();
        let ev = pruned_eigenvalues(&m, 1e-8).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0] - a.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let ev = pruned_eigenvalues(&DMatrix::zeros(5, 5), 1e-8).unwrap();
        assert!(ev.is_empty());
        assert!(matches!(
            NullSpectrum::from_eigenvalues(ev, vec![1.0], 5, 0, 1e-8),
            Err(GsuError::DegenerateSpectrum)
        ));
    }

    #[test]
    fn trace_identity() {
        let mut rng = replicate_rng(7, 0);
        let b = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let m = &b + b.transpose();
        let ev = pruned_eigenvalues(&m, 0.0).unwrap();
        let sum: f64 = ev.iter().sum();
        assert!((sum - m.trace()).abs() < 1e-8);
    }

    #[test]
    fn folding_keeps_small_lists_exact() {
        let (head, sigma, shift) = fold_small_terms(&[0.5, 0.25, 1e-9]);
        assert_eq!(head.len(), 3);
        assert_eq!((sigma, shift), (0.0, 0.0));
    }

    #[test]
    fn folding_matches_unfolded_inversion() {
        let coeffs: Vec<f64> = (1..=40)
            .flat_map(|s| (1..=40).map(move |t| 1.0 / ((s * t) as f64).powi(2)))
            .collect();
        let (head, sigma, _) = fold_small_terms(&coeffs);
        assert!(head.len() < coeffs.len());
        assert!(sigma > 0.0);
        for q in [1.5, 3.0, 6.0] {
            let folded = davies_pvalue(&coeffs, q, 1e-10).unwrap();
            let terms: Vec<ChiSquareTerm> = coeffs
                .iter()
                .map(|&weight| ChiSquareTerm {
                    weight,
                    dof: 1,
                    noncentrality: 0.0,
                })
                .collect();
            let exact = 1.0 - qf_cdf(&terms, 0.0, q, DAVIES_LIMIT, 1e-10).cdf;
            assert!((folded - exact).abs() < 1e-6, "q={q}: {folded} vs {exact}");
            assert!((folded / exact - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn auto_switches_for_tiny_tails() {
        let opts = PValueOptions::default();
        let t = tail_probability(&[1.0], 60.0, &opts).unwrap();
        assert_eq!(t.method, Method::Saddlepoint);
        assert!(t.p_value > 0.0 && t.p_value < 1e-12);
        let t = tail_probability(&[1.0], 3.0, &opts).unwrap();
        assert_eq!(t.method, Method::Davies);
    }

    #[test]
    fn options_validation() {
        let mut o = PValueOptions::default();
        assert!(o.validate().is_ok());
        o.davies_accuracy = 0.01;
        assert!(o.validate().is_err());
        o.davies_accuracy = 1e-9;
        o.permutations = 50;
        assert!(o.validate().is_err());
    }
}
