//! Four-cumulant matching of a weighted chi-square sum to a (non-central)
//! chi-square surrogate.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{GsuError, Result};

/// Upper tail of a non-central chi-square with (possibly fractional) `dof`
/// degrees of freedom and non-centrality `ncp`, as a Poisson mixture of
/// central tails.
pub fn noncentral_chi2_sf(x: f64, dof: f64, ncp: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if ncp <= 0.0 {
        return gamma_ur(dof / 2.0, x / 2.0);
    }
    let half = ncp / 2.0;
    let weight = |j: usize| (j as f64 * half.ln() - half - ln_gamma(j as f64 + 1.0)).exp();
    let term = |j: usize| gamma_ur(dof / 2.0 + j as f64, x / 2.0);
    let mode = half.floor() as usize;
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut j = mode;
    loop {
        let w = weight(j);
        total += w * term(j);
        mass += w;
        if w < 1e-17 || mass > 1.0 - 1e-16 {
            break;
        }
        j += 1;
    }
    let mut j = mode;
    while j > 0 {
        j -= 1;
        let w = weight(j);
        total += w * term(j);
        if w < 1e-17 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// `P(sum_k c_k chi2_1 > q)` by moment matching.
///
/// A negative third cumulant is handled by matching the reflected form
/// `-Q`, whose upper tail gives the lower tail of `Q`.
pub fn liu_pvalue(coeffs: &[f64], q: f64) -> Result<f64> {
    let power_sum = |r: i32| coeffs.iter().map(|c| c.powi(r)).sum::<f64>();
    let (c1, c2, c3, c4) = (power_sum(1), power_sum(2), power_sum(3), power_sum(4));
    if !(c2 > 0.0) {
        return Err(GsuError::DegenerateSpectrum);
    }
    let sigma_q = (2.0 * c2).sqrt();
    let s1 = c3 / c2.powf(1.5);
    if s1.abs() < 1e-12 {
        let z = (q - c1) / sigma_q;
        return Ok(Normal::new(0.0, 1.0).unwrap().sf(z));
    }
    if s1 < 0.0 {
        let reflected: Vec<f64> = coeffs.iter().map(|c| -c).collect();
        return Ok((1.0 - liu_pvalue(&reflected, -q)?).clamp(0.0, 1.0));
    }
    let s2 = c4 / (c2 * c2);
    let (a, delta, dof) = if s1 * s1 > s2 {
        let a = 1.0 / (s1 - (s1 * s1 - s2).sqrt());
        let delta = s1 * a * a * a - a * a;
        (a, delta, a * a - 2.0 * delta)
    } else {
        let a = 1.0 / s1;
        (a, 0.0, 1.0 / (s1 * s1))
    };
    let mu_x = dof + delta;
    let sigma_x = std::f64::consts::SQRT_2 * a;
    let x = (q - c1) / sigma_q * sigma_x + mu_x;
    Ok(noncentral_chi2_sf(x, dof, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coefficient_is_exact() {
        let p = liu_pvalue(&[1.0], 3.841458820694124).unwrap();
        assert!((p - 0.05).abs() < 1e-10);
    }

    #[test]
    fn equal_coefficients_are_exact() {
        // 0.4 * chi2_5 > q  <=>  chi2_5 > q / 0.4
        let q = 3.0;
        let p = liu_pvalue(&[0.4; 5], q).unwrap();
        let exact = gamma_ur(2.5, q / 0.4 / 2.0);
        assert!((p - exact).abs() < 1e-10);
    }

    #[test]
    fn noncentral_reduces_to_central() {
        assert!((noncentral_chi2_sf(3.0, 2.0, 0.0) - (-1.5f64).exp()).abs() < 1e-14);
        // ncp -> 0 limit is continuous
        let a = noncentral_chi2_sf(3.0, 2.0, 1e-9);
        assert!((a - (-1.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn noncentral_one_dof_closed_form() {
        // chi2_1(ncp) = (Z + sqrt(ncp))^2
        let n = Normal::new(0.0, 1.0).unwrap();
        let (x, ncp) = (4.0f64, 2.5f64);
        let m = ncp.sqrt();
        let exact = n.sf(x.sqrt() - m) + n.cdf(-x.sqrt() - m);
        assert!((noncentral_chi2_sf(x, 1.0, ncp) - exact).abs() < 1e-12);
    }

    #[test]
    fn reflected_form_for_negative_skew() {
        let p = liu_pvalue(&[-1.0], -3.841458820694124).unwrap();
        assert!((p - 0.95).abs() < 1e-10);
    }
}
