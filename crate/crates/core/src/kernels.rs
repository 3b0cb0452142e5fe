//! Raw phenotype and genotype similarity matrices.
//!
//! Bounded kernels (Laplacian, correlated Laplacian, Gaussian, IBS, weighted
//! IBS and the Laplacian genotype kernel) produce entries in `[0, 1]` with a
//! unit diagonal. Only the upper triangle is evaluated; the lower triangle is
//! a mirror, so symmetry is exact. Exponent sums run left to right over
//! ascending variable index with a compensated accumulator.

use nalgebra::DMatrix;

use crate::error::{GsuError, Result};
use crate::model::{GenotypeMatrix, PhenotypeMatrix, SimilarityMatrix, SimilarityState, VariantSet, MONOMORPHIC_MAF};

/// Phenotype-side similarity.
#[derive(Debug, Clone, Default)]
pub enum PhenotypeKernel {
    /// `exp(-sum_l w_l |y_il - y_jl|)`.
    #[default]
    Laplacian,
    /// `exp(-(1/L) d' G d)` with `d_l = |y_il - y_jl|^0.5`. When `gamma` is
    /// `None` it is estimated from the data.
    LaplacianCorrelated { gamma: Option<DMatrix<f64>> },
    /// Inner product `<y_i, y_j>`, optionally on column-standardised values.
    CrossProduct { standardize: bool },
    /// `exp(-sum_l w_l (y_il - y_jl)^2)`.
    Gaussian,
}

/// Genotype-side similarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GenotypeKernel {
    Ibs,
    WeightedIbs,
    #[default]
    Lk,
}

/// How per-variant weights are derived for the weighted genotype kernels.
#[derive(Debug, Clone, Default)]
pub enum VariantWeighting {
    /// `1 / sqrt(maf (1 - maf))`, zero for monomorphic variants.
    #[default]
    InverseVariance,
    /// `1 / sd` of the (imputed) genotype column, zero when the sd vanishes.
    InverseSd,
    Uniform,
    /// Explicit weights, one per set member.
    Custom(Vec<f64>),
}

/// Full kernel choice for one association test.
#[derive(Debug, Clone, Default)]
pub struct KernelConfig {
    pub phenotype: PhenotypeKernel,
    pub genotype: GenotypeKernel,
    pub weighting: VariantWeighting,
    pub rank_transform: bool,
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Evaluate `f(i, j)` on the strict upper triangle, mirror it, and put
/// `diag` on the diagonal.
fn pairwise(n: usize, diag: Option<f64>, mut f: impl FnMut(usize, usize) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = match diag {
            Some(d) => d,
            None => f(i, i),
        };
        for j in (i + 1)..n {
            let v = f(i, j);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn raw(values: DMatrix<f64>) -> SimilarityMatrix {
    SimilarityMatrix::from_parts(values, SimilarityState::Raw)
}

/// Row-major copy so that per-subject access is contiguous.
fn rows_of(m: &DMatrix<f64>, cols: &[usize]) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| cols.iter().map(|&c| m[(i, c)]).collect())
        .collect()
}

pub fn laplacian_phenotype(y: &PhenotypeMatrix) -> SimilarityMatrix {
    let l = y.n_variables();
    let rows = rows_of(y.values(), &(0..l).collect::<Vec<_>>());
    let w = y.weights();
    raw(pairwise(y.n_subjects(), Some(1.0), |i, j| {
        let mut acc = CompensatedSum::default();
        for k in 0..l {
            acc.add(w[k] * (rows[i][k] - rows[j][k]).abs());
        }
        (-acc.value()).exp()
    }))
}

pub fn gaussian_phenotype(y: &PhenotypeMatrix) -> SimilarityMatrix {
    let l = y.n_variables();
    let rows = rows_of(y.values(), &(0..l).collect::<Vec<_>>());
    let w = y.weights();
    raw(pairwise(y.n_subjects(), Some(1.0), |i, j| {
        let mut acc = CompensatedSum::default();
        for k in 0..l {
            let d = rows[i][k] - rows[j][k];
            acc.add(w[k] * d * d);
        }
        (-acc.value()).exp()
    }))
}

/// Gram matrix of phenotype rows. Entries are unbounded and the diagonal is
/// the squared row norm.
pub fn cross_product_phenotype(y: &PhenotypeMatrix) -> SimilarityMatrix {
    let l = y.n_variables();
    let rows = rows_of(y.values(), &(0..l).collect::<Vec<_>>());
    raw(pairwise(y.n_subjects(), None, |i, j| {
        let mut acc = CompensatedSum::default();
        for (a, b) in rows[i].iter().zip(&rows[j]) {
            acc.add(a * b);
        }
        acc.value()
    }))
}

/// Columns rescaled to mean 0 and unit (sample) variance. Constant columns
/// become all zero.
pub fn standardize_columns(y: &PhenotypeMatrix) -> PhenotypeMatrix {
    let mut v = y.values().clone();
    let n = v.nrows();
    for mut col in v.column_iter_mut() {
        let mean = col.mean();
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        let sd = var.sqrt();
        for x in col.iter_mut() {
            *x = if sd > 0.0 { (*x - mean) / sd } else { 0.0 };
        }
    }
    y.with_values(v)
}

/// `((1/n) sum_i y_i y_i')^{-1/2}` from uncentered second moments.
pub fn estimate_gamma(y: &PhenotypeMatrix) -> Result<DMatrix<f64>> {
    let n = y.n_subjects() as f64;
    let m2 = y.values().transpose() * y.values() / n;
    let eig = m2.symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || eig.eigenvalues.min() < 1e-10 * max {
        return Err(GsuError::GammaSingular);
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(1e-10 * max).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose())
}

pub fn laplacian_correlated_phenotype(y: &PhenotypeMatrix, gamma: Option<&DMatrix<f64>>) -> Result<SimilarityMatrix> {
    let l = y.n_variables();
    let estimated;
    let gamma = match gamma {
        Some(g) => {
            check_gamma(g, l)?;
            g
        }
        None => {
            estimated = estimate_gamma(y)?;
            &estimated
        }
    };
    let rows = rows_of(y.values(), &(0..l).collect::<Vec<_>>());
    let mut d = vec![0.0; l];
    Ok(raw(pairwise(y.n_subjects(), Some(1.0), |i, j| {
        for k in 0..l {
            d[k] = (rows[i][k] - rows[j][k]).abs().sqrt();
        }
        let mut acc = CompensatedSum::default();
        for a in 0..l {
            for b in 0..l {
                acc.add(d[a] * gamma[(a, b)] * d[b]);
            }
        }
        (-acc.value() / l as f64).exp()
    })))
}

fn check_gamma(g: &DMatrix<f64>, l: usize) -> Result<()> {
    if g.nrows() != l || g.ncols() != l {
        return Err(GsuError::DimensionMismatch {
            what: "gamma matrix",
            expected: l,
            found: g.nrows(),
        });
    }
    let scale = g.amax().max(f64::MIN_POSITIVE);
    for a in 0..l {
        for b in (a + 1)..l {
            if (g[(a, b)] - g[(b, a)]).abs() > 1e-10 * scale {
                return Err(GsuError::InvalidParameter("gamma must be symmetric".into()));
            }
        }
    }
    let min = g.clone().symmetric_eigenvalues().min();
    if min < -1e-10 * scale {
        return Err(GsuError::InvalidParameter(
            "gamma must be positive semi-definite".into(),
        ));
    }
    Ok(())
}

/// Inverse-variance weights `1/sqrt(maf (1 - maf))` for the set members.
/// Monomorphic variants get weight zero.
pub fn maf_weights(g: &GenotypeMatrix, set: &VariantSet) -> Vec<f64> {
    set.members()
        .iter()
        .map(|&m| {
            let maf = g.mafs()[m];
            if maf < MONOMORPHIC_MAF {
                0.0
            } else {
                1.0 / (maf * (1.0 - maf)).sqrt()
            }
        })
        .collect()
}

/// `1 / sd` of each member column; zero for constant columns.
pub fn sd_weights(g: &GenotypeMatrix, set: &VariantSet) -> Vec<f64> {
    let n = g.n_subjects() as f64;
    set.members()
        .iter()
        .map(|&m| {
            let col = g.values().column(m);
            let mean = col.mean();
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var > 1e-24 {
                1.0 / var.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

pub fn variant_weights(g: &GenotypeMatrix, set: &VariantSet, scheme: &VariantWeighting) -> Result<Vec<f64>> {
    Ok(match scheme {
        VariantWeighting::InverseVariance => maf_weights(g, set),
        VariantWeighting::InverseSd => sd_weights(g, set),
        VariantWeighting::Uniform => vec![1.0; set.len()],
        VariantWeighting::Custom(w) => {
            if w.len() != set.len() {
                return Err(GsuError::DimensionMismatch {
                    what: "variant weights",
                    expected: set.len(),
                    found: w.len(),
                });
            }
            w.clone()
        }
    })
}

/// Weights divided by their maximum, so constant weights become exactly one.
fn normalized_weights(w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(GsuError::BadWeight(
            "variant weights must be finite and non-negative".into(),
        ));
    }
    let max = w.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(GsuError::DegenerateWeights);
    }
    Ok(w.iter().map(|x| x / max).collect())
}

fn ibs_core(g: &GenotypeMatrix, set: &VariantSet, w: &[f64]) -> SimilarityMatrix {
    let rows = rows_of(g.values(), set.members());
    let mut upsilon = CompensatedSum::default();
    w.iter().for_each(|&x| upsilon.add(x));
    let denom = 2.0 * upsilon.value();
    raw(pairwise(g.n_subjects(), Some(1.0), |i, j| {
        let mut acc = CompensatedSum::default();
        for (k, &wk) in w.iter().enumerate() {
            acc.add(wk * (2.0 - (rows[i][k] - rows[j][k]).abs()));
        }
        acc.value() / denom
    }))
}

pub fn ibs_genotype(g: &GenotypeMatrix, set: &VariantSet) -> SimilarityMatrix {
    ibs_core(g, set, &vec![1.0; set.len()])
}

pub fn weighted_ibs_genotype(g: &GenotypeMatrix, set: &VariantSet, w: &[f64]) -> Result<SimilarityMatrix> {
    check_weight_len(set, w)?;
    Ok(ibs_core(g, set, &normalized_weights(w)?))
}

pub fn lk_genotype(g: &GenotypeMatrix, set: &VariantSet, w: &[f64]) -> Result<SimilarityMatrix> {
    check_weight_len(set, w)?;
    let w = normalized_weights(w)?;
    let rows = rows_of(g.values(), set.members());
    let mut upsilon = CompensatedSum::default();
    w.iter().for_each(|&x| upsilon.add(x));
    let upsilon = upsilon.value();
    Ok(raw(pairwise(g.n_subjects(), Some(1.0), |i, j| {
        let mut acc = CompensatedSum::default();
        for (k, &wk) in w.iter().enumerate() {
            acc.add(wk * (rows[i][k] - rows[j][k]).abs());
        }
        (-acc.value() / upsilon).exp()
    })))
}

fn check_weight_len(set: &VariantSet, w: &[f64]) -> Result<()> {
    if w.len() != set.len() {
        return Err(GsuError::DimensionMismatch {
            what: "variant weights",
            expected: set.len(),
            found: w.len(),
        });
    }
    Ok(())
}

/// Column-wise `(rank - 0.5) / n` with average ranks for ties.
pub fn rank_transform(y: &PhenotypeMatrix) -> PhenotypeMatrix {
    let n = y.n_subjects();
    let mut out = y.values().clone();
    for (c, col) in y.values().column_iter().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && col[order[end]] == col[order[start]] {
                end += 1;
            }
            // ranks start+1 ..= end share their average
            let avg = (start + 1 + end) as f64 / 2.0;
            for &idx in &order[start..end] {
                out[(idx, c)] = (avg - 0.5) / n as f64;
            }
            start = end;
        }
    }
    y.with_values(out)
}

/// Phenotype similarity for the configured kernel, applying the rank
/// transformation first when requested.
pub fn phenotype_similarity(y: &PhenotypeMatrix, config: &KernelConfig) -> Result<SimilarityMatrix> {
    let transformed;
    let y = if config.rank_transform {
        transformed = rank_transform(y);
        &transformed
    } else {
        y
    };
    match &config.phenotype {
        PhenotypeKernel::Laplacian => Ok(laplacian_phenotype(y)),
        PhenotypeKernel::LaplacianCorrelated { gamma } => laplacian_correlated_phenotype(y, gamma.as_ref()),
        PhenotypeKernel::CrossProduct { standardize } => {
            if *standardize && !config.rank_transform {
                Ok(cross_product_phenotype(&standardize_columns(y)))
            } else {
                Ok(cross_product_phenotype(y))
            }
        }
        PhenotypeKernel::Gaussian => Ok(gaussian_phenotype(y)),
    }
}

/// Genotype similarity for the configured kernel and weighting.
pub fn genotype_similarity(g: &GenotypeMatrix, set: &VariantSet, config: &KernelConfig) -> Result<SimilarityMatrix> {
    match config.genotype {
        GenotypeKernel::Ibs => Ok(ibs_genotype(g, set)),
        GenotypeKernel::WeightedIbs => {
            let w = variant_weights(g, set, &config.weighting)?;
            weighted_ibs_genotype(g, set, &w)
        }
        GenotypeKernel::Lk => {
            let w = variant_weights(g, set, &config.weighting)?;
            lk_genotype(g, set, &w)
        }
    }
}
