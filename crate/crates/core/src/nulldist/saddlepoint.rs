//! Lugannani-Rice saddlepoint tail for `sum_k c_k chi2_1`, with cumulant
//! generating function `K(t) = -1/2 sum_k log(1 - 2 c_k t)`.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use crate::error::{GsuError, Result};

struct Cgf<'a> {
    coeffs: &'a [f64],
}

impl Cgf<'_> {
    fn k(&self, t: f64) -> f64 {
        -0.5 * self.coeffs.iter().map(|c| (-2.0 * c * t).ln_1p()).sum::<f64>()
    }

    fn k1(&self, t: f64) -> f64 {
        self.coeffs.iter().map(|c| c / (1.0 - 2.0 * c * t)).sum()
    }

    fn k2(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|c| {
                let d = 1.0 - 2.0 * c * t;
                2.0 * c * c / (d * d)
            })
            .sum()
    }
}

fn upper_normal(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Tail at the mean from the limiting form of the approximation.
fn tail_at_mean(coeffs: &[f64]) -> f64 {
    let k2 = 2.0 * coeffs.iter().map(|c| c * c).sum::<f64>();
    let k3 = 8.0 * coeffs.iter().map(|c| c * c * c).sum::<f64>();
    0.5 - k3 / (6.0 * (2.0 * PI).sqrt() * k2.powf(1.5))
}

/// Solve `K'(t) = q` on the admissible interval with Newton steps
/// safeguarded by bisection.
fn solve_saddlepoint(cgf: &Cgf<'_>, q: f64, mean: f64) -> Result<f64> {
    let cmax = cgf.coeffs.iter().cloned().fold(0.0, f64::max);
    let cmin = cgf.coeffs.iter().cloned().fold(0.0, f64::min);
    let upper_pole = if cmax > 0.0 { 0.5 / cmax } else { f64::INFINITY };
    let lower_pole = if cmin < 0.0 { 0.5 / cmin } else { f64::NEG_INFINITY };

    let (mut lo, mut hi) = if q > mean { (0.0, upper_pole) } else { (lower_pole, 0.0) };
    // Replace an infinite end by a finite bracket.
    if hi.is_infinite() {
        hi = 1.0;
        while cgf.k1(hi) < q {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(GsuError::NumericalFailure("saddlepoint bracket".into()));
            }
        }
    }
    if lo.is_infinite() {
        lo = -1.0;
        while cgf.k1(lo) > q {
            lo *= 2.0;
            if lo < -1e300 {
                return Err(GsuError::NumericalFailure("saddlepoint bracket".into()));
            }
        }
    }

    let scale = q.abs() + cgf.k2(0.0).sqrt();
    let mut t = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = cgf.k1(t) - q;
        if f.abs() <= 1e-13 * scale {
            return Ok(t);
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let newton = t - f / cgf.k2(t);
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() <= 1e-16 * t.abs().max(1e-300) {
            return Ok(t);
        }
    }
    Err(GsuError::NumericalFailure("saddlepoint root did not converge".into()))
}

/// `P(sum_k c_k chi2_1 > q)` by the Lugannani-Rice formula.
pub fn saddlepoint_pvalue(coeffs: &[f64], q: f64) -> Result<f64> {
    let coeffs: Vec<f64> = coeffs.iter().cloned().filter(|c| *c != 0.0).collect();
    if coeffs.is_empty() {
        return Err(GsuError::DegenerateSpectrum);
    }
    let all_pos = coeffs.iter().all(|c| *c > 0.0);
    let all_neg = coeffs.iter().all(|c| *c < 0.0);
    if all_pos && q <= 0.0 {
        return Ok(1.0);
    }
    if all_neg && q >= 0.0 {
        return Ok(0.0);
    }
    let cgf = Cgf { coeffs: &coeffs };
    let mean: f64 = coeffs.iter().sum();
    let sd = cgf.k2(0.0).sqrt();
    if (q - mean).abs() <= 1e-9 * sd {
        return Ok(tail_at_mean(&coeffs).clamp(0.0, 1.0));
    }
    let t = solve_saddlepoint(&cgf, q, mean)?;
    let w2 = 2.0 * (t * q - cgf.k(t));
    let w = t.signum() * w2.max(0.0).sqrt();
    let v = t * cgf.k2(t).sqrt();
    if w.abs() < 1e-5 {
        return Ok(tail_at_mean(&coeffs).clamp(0.0, 1.0));
    }
    let density = (-0.5 * w * w).exp() / (2.0 * PI).sqrt();
    let p = upper_normal(w) + density * (1.0 / v - 1.0 / w);
    if !p.is_finite() {
        return Err(GsuError::NumericalFailure("saddlepoint tail not finite".into()));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_one_tail() {
        // the first-order formula overshoots the exact 0.05 by about 2.4e-4
        let p = saddlepoint_pvalue(&[1.0], 3.841458820694124).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "{p}");
    }

    #[test]
    fn matches_independent_evaluation() {
        // closed form for one coefficient: t = (1 - 1/q) / 2, K = ln(q) / 2,
        // K'' = 2 q^2
        for q in [0.5f64, 3.841458820694124, 9.0, 30.0] {
            let t = 0.5 * (1.0 - 1.0 / q);
            let w = t.signum() * (2.0 * (t * q - 0.5 * q.ln())).sqrt();
            let v = t * std::f64::consts::SQRT_2 * q;
            let phi = (-0.5 * w * w).exp() / (2.0 * PI).sqrt();
            let expected = upper_normal(w) + phi * (1.0 / v - 1.0 / w);
            let p = saddlepoint_pvalue(&[1.0], q).unwrap();
            assert!((p - expected).abs() < 1e-12, "q={q}: {p} vs {expected}");
        }
        let p = saddlepoint_pvalue(&[0.7, 0.3], 8.0).unwrap();
        assert!((p - 0.0010208853387344854).abs() < 1e-12, "{p}");
    }

    #[test]
    fn chi2_two_dof_tail_shape() {
        // relative error of the approximation for chi2_2 is small in the tail
        for q in [4.0, 8.0, 16.0] {
            let p = saddlepoint_pvalue(&[1.0, 1.0], q).unwrap();
            let exact = (-q / 2.0f64).exp();
            assert!((p / exact - 1.0).abs() < 0.02, "q={q} p={p} exact={exact}");
        }
    }

    #[test]
    fn support_edges() {
        assert_eq!(saddlepoint_pvalue(&[1.0, 2.0], -1.0).unwrap(), 1.0);
        assert_eq!(saddlepoint_pvalue(&[-1.0, -2.0], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn negative_only_coefficients() {
        // -chi2_2 > -2  <=>  chi2_2 < 2
        let p = saddlepoint_pvalue(&[-1.0, -1.0], -2.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 0.01, "{p}");
    }

    #[test]
    fn continuous_through_the_mean() {
        let c = [0.7, 0.3];
        let at = saddlepoint_pvalue(&c, 1.0).unwrap();
        let near = saddlepoint_pvalue(&c, 1.0 + 1e-4).unwrap();
        assert!((at - near).abs() < 1e-3);
    }
}
