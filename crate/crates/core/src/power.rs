//! Asymptotic power and sample size.
//!
//! Under an alternative, `n U` is approximately normal with mean `n mu_U`
//! and standard deviation `2 sqrt(n zeta_1)`, while the level-`alpha`
//! critical value comes from the centered null mixture
//! `sum_k c_k (chi2_1 - 1)`.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GsuError, Result};
use crate::model::{SimilarityMatrix, SimilarityState};
use crate::nulldist::{davies_tail, pruned_eigenvalues, DaviesFault};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub mu_u: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    pub alpha: f64,
    pub q_alpha: f64,
}

impl PowerParams {
    pub fn new(mu_u: f64, zeta0: f64, zeta1: f64, alpha: f64, q_alpha: f64) -> Result<Self> {
        let p = PowerParams {
            mu_u,
            zeta0,
            zeta1,
            alpha,
            q_alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GsuError::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("mu_u", self.mu_u),
            ("zeta0", self.zeta0),
            ("zeta1", self.zeta1),
            ("q_alpha", self.q_alpha),
        ] {
            if !v.is_finite() {
                return Err(GsuError::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.zeta0 < 0.0 {
            return Err(GsuError::InvalidParameter("zeta0 must be non-negative".into()));
        }
        if self.zeta1 > self.zeta0 * (1.0 + 1e-12) {
            return Err(GsuError::InvalidParameter(format!(
                "zeta1 ({}) exceeds zeta0 ({})",
                self.zeta1, self.zeta0
            )));
        }
        Ok(())
    }
}

/// Plug-in estimates of the alternative moments from centered pilot
/// similarities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectEstimates {
    pub mu_u: f64,
    pub zeta0: f64,
    pub zeta1: f64,
}

impl EffectEstimates {
    pub fn into_params(self, alpha: f64, q_alpha: f64) -> Result<PowerParams> {
        PowerParams::new(self.mu_u, self.zeta0, self.zeta1, alpha, q_alpha)
    }
}

fn centered_input(m: &SimilarityMatrix) -> Result<&DMatrix<f64>> {
    match m.state() {
        SimilarityState::Centered | SimilarityState::ZeroDiagonal => Ok(m.values()),
        other => Err(GsuError::WrongState {
            expected: "centered",
            found: other.name(),
        }),
    }
}

/// `mu_U`, `zeta_0` and `zeta_1` from the off-diagonal products
/// `h_ij = K_ij S_ij`. Variances use count divisors, so
/// `zeta_1 <= zeta_0` holds by the law of total variance.
pub fn estimate_effect_params(k: &SimilarityMatrix, s: &SimilarityMatrix) -> Result<EffectEstimates> {
    let kv = centered_input(k)?;
    let sv = centered_input(s)?;
    let n = kv.nrows();
    if sv.nrows() != n {
        return Err(GsuError::DimensionMismatch {
            what: "similarity matrix size",
            expected: n,
            found: sv.nrows(),
        });
    }
    if n < 10 {
        return Err(GsuError::SampleTooSmall { n, min: 10 });
    }
    let pairs = (n * (n - 1)) as f64;
    let mut row_means = vec![0.0; n];
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let h = kv[(i, j)] * sv[(i, j)];
                row_means[i] += h;
                total += h;
            }
        }
    }
    let mu = total / pairs;
    let mut zeta0 = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let d = kv[(i, j)] * sv[(i, j)] - mu;
                zeta0 += d * d;
            }
        }
    }
    zeta0 /= pairs;
    let zeta1 = row_means
        .iter()
        .map(|r| {
            let d = r / (n - 1) as f64 - mu;
            d * d
        })
        .sum::<f64>()
        / n as f64;
    Ok(EffectEstimates {
        mu_u: mu,
        zeta0,
        zeta1: zeta1.min(zeta0),
    })
}

/// Null mixture coefficients `eig(K)/n x eig(S)/n` from centered pilot
/// similarities, pruned at `prune_rel_tol`.
pub fn pilot_coefficients(k: &SimilarityMatrix, s: &SimilarityMatrix, prune_rel_tol: f64) -> Result<Vec<f64>> {
    let kv = centered_input(k)?;
    let sv = centered_input(s)?;
    let n = kv.nrows() as f64;
    let eta = pruned_eigenvalues(kv, prune_rel_tol)?;
    let lambda = pruned_eigenvalues(sv, prune_rel_tol)?;
    if eta.is_empty() || lambda.is_empty() {
        return Err(GsuError::DegenerateSpectrum);
    }
    let mut coeffs: Vec<f64> = lambda
        .iter()
        .flat_map(|l| eta.iter().map(move |e| l * e / (n * n)))
        .collect();
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    coeffs.retain(|c| c.abs() >= prune_rel_tol * max);
    Ok(coeffs)
}

/// Upper `alpha` quantile of `sum_k c_k (chi2_1 - 1)`, found by bisection
/// on the Davies tail.
pub fn null_quantile(coeffs: &[f64], alpha: f64) -> Result<f64> {
    if coeffs.is_empty() || coeffs.iter().all(|c| *c == 0.0) {
        return Err(GsuError::DegenerateSpectrum);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GsuError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let acc = (alpha * 1e-3).clamp(1e-10, 1e-7);
    let mean: f64 = coeffs.iter().sum();
    let tail = |q: f64| -> Result<f64> {
        let (p, out) = davies_tail(coeffs, q + mean, acc)?;
        match out.fault {
            None | Some(DaviesFault::RoundOff) => Ok(p),
            Some(f) => Err(GsuError::NumericalFailure(format!("davies fault {}", f.code()))),
        }
    };
    let sd = (2.0 * coeffs.iter().map(|c| c * c).sum::<f64>()).sqrt();
    let mut lo = -sd;
    while tail(lo)? < alpha {
        lo -= 2.0 * sd;
    }
    let mut hi = sd;
    while tail(hi)? > alpha {
        hi += 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = tail(mid)?;
        if (p - alpha).abs() <= 0.01 * acc.max(alpha * 1e-4) || hi - lo <= 1e-13 * (hi.abs() + lo.abs()) {
            return Ok(mid);
        }
        if p > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// `Phi((n mu_U - q) / (2 sqrt(n zeta_1)))`.
pub fn asymptotic_power(n: usize, params: &PowerParams) -> Result<f64> {
    params.validate()?;
    if n < 2 {
        return Err(GsuError::SampleTooSmall { n, min: 2 });
    }
    if !(params.zeta1 > 0.0) {
        return Err(GsuError::DegenerateAlternative("zeta1 must be positive".into()));
    }
    let n = n as f64;
    let z = (n * params.mu_u - params.q_alpha) / (2.0 * (n * params.zeta1).sqrt());
    Ok(std_normal().cdf(z))
}

/// Smallest `n >= 2` whose asymptotic power reaches `target_beta`.
pub fn required_sample_size(params: &PowerParams, target_beta: f64) -> Result<usize> {
    params.validate()?;
    if !(target_beta > 0.0 && target_beta < 1.0) {
        return Err(GsuError::InvalidParameter(format!(
            "target power must lie in (0, 1), got {target_beta}"
        )));
    }
    if !(params.zeta1 > 0.0) {
        return Err(GsuError::DegenerateAlternative("zeta1 must be positive".into()));
    }
    if !(params.mu_u > 0.0) {
        return Err(GsuError::DegenerateAlternative("mu_U must be positive".into()));
    }
    let z = std_normal().inverse_cdf(target_beta);
    let (mu, zeta1, q) = (params.mu_u, params.zeta1, params.q_alpha);
    let disc = z * z * zeta1 + mu * q;
    let bound = if disc < 0.0 {
        0.0
    } else {
        let root = z * zeta1.sqrt() + disc.sqrt();
        if root <= 0.0 {
            0.0
        } else {
            root * root / (mu * mu)
        }
    };
    if bound > 1e15 {
        return Err(GsuError::DegenerateAlternative(
            "required sample size is unbounded".into(),
        ));
    }
    // The closed form is exact up to rounding; settle the integer by direct
    // evaluation.
    let mut n = (bound.ceil() as usize).max(2);
    while asymptotic_power(n, params)? < target_beta {
        n += 1;
    }
    while n > 2 && asymptotic_power(n - 1, params)? >= target_beta {
        n -= 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ustat::center_similarity;

    fn params(mu: f64, zeta1: f64, q: f64) -> PowerParams {
        PowerParams::new(mu, zeta1, zeta1, 0.05, q).unwrap()
    }

    #[test]
    fn centered_quantiles() {
        let q = null_quantile(&[1.0], 0.05).unwrap();
        assert!((q - 2.841459).abs() < 1e-5, "{q}");
        let q = null_quantile(&[1.0, 1.0], 0.05).unwrap();
        assert!((q - (5.991465 - 2.0)).abs() < 1e-5, "{q}");
    }

    #[test]
    fn quantile_round_trip() {
        let coeffs = [0.9, 0.4, 0.33, 0.1, 0.02];
        let mean: f64 = coeffs.iter().sum();
        for alpha in [0.2, 0.05, 1e-3] {
            let q = null_quantile(&coeffs, alpha).unwrap();
            let (p, _) = davies_tail(&coeffs, q + mean, 1e-10).unwrap();
            assert!((p - alpha).abs() < 1e-5, "alpha={alpha} p={p}");
        }
    }

    #[test]
    fn power_at_critical_mean_is_half() {
        let p = params(0.04, 0.01, 4.0);
        assert!((asymptotic_power(100, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_direct_formula() {
        let p = params(0.05, 0.01, 4.0);
        let b = asymptotic_power(100, &p).unwrap();
        assert!((b - 0.691462461274013).abs() < 1e-9, "{b}");
    }

    #[test]
    fn power_tends_to_one() {
        let p = params(50.0, 0.01, 4.0);
        assert!(asymptotic_power(100, &p).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn degenerate_alternative() {
        let p = PowerParams::new(0.05, 0.0, 0.0, 0.05, 4.0).unwrap();
        assert!(matches!(
            asymptotic_power(10, &p),
            Err(GsuError::DegenerateAlternative(_))
        ));
        assert!(matches!(
            required_sample_size(&p, 0.8),
            Err(GsuError::DegenerateAlternative(_))
        ));
    }

    #[test]
    fn half_power_sample_size() {
        let p = params(0.03, 0.02, 4.0);
        assert_eq!(required_sample_size(&p, 0.5).unwrap(), (4.0f64 / 0.03).ceil() as usize);
    }

    #[test]
    fn sample_size_closed_form_round_trip() {
        let p = params(0.02, 0.015, 3.5);
        for beta in [0.5, 0.8, 0.9] {
            let n = required_sample_size(&p, beta).unwrap();
            let z = std_normal().inverse_cdf(beta);
            let bound = (z * p.zeta1.sqrt() + (z * z * p.zeta1 + p.mu_u * p.q_alpha).sqrt()).powi(2) / p.mu_u.powi(2);
            assert!(n as f64 >= bound - 1e-9);
            assert!(((n - 1) as f64) < bound + 1e-9);
            assert!(asymptotic_power(n, &p).unwrap() >= beta);
        }
    }

    #[test]
    fn zero_phenotype_similarity_gives_zero_moments() {
        let k = center_similarity(
            &SimilarityMatrix::raw(DMatrix::from_fn(12, 12, |i, j| {
                (-((i as f64) - (j as f64)).abs()).exp()
            }))
            .unwrap(),
        )
        .unwrap();
        let s = center_similarity(&SimilarityMatrix::raw(DMatrix::from_element(12, 12, 2.0)).unwrap()).unwrap();
        let e = estimate_effect_params(&k, &s).unwrap();
        assert_eq!((e.mu_u, e.zeta0, e.zeta1), (0.0, 0.0, 0.0));
        let e = estimate_effect_params(&k, &k).unwrap();
        assert!(e.mu_u > 0.0);
        assert!(e.zeta1 <= e.zeta0);
    }
}
