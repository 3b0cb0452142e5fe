//! Distribution function of a linear combination of independent
//! (non-central) chi-square variables plus a normal term, by numerical
//! inversion of the characteristic function with explicit control of the
//! truncation and integration errors (Davies, Applied Statistics AS 155).

use std::f64::consts::PI;

const LOG28: f64 = 0.0866; // log(2) / 8

/// Fault codes reported by the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaviesFault {
    /// Requested accuracy could not be reached within the term limit.
    AccuracyNotAchieved,
    /// Round-off error may be significant.
    RoundOff,
    /// Invalid parameters.
    InvalidParameters,
    /// Integration parameters could not be located within the term limit.
    NoIntegrationParameters,
}

impl DaviesFault {
    pub fn code(self) -> u8 {
        match self {
            DaviesFault::AccuracyNotAchieved => 1,
            DaviesFault::RoundOff => 2,
            DaviesFault::InvalidParameters => 3,
            DaviesFault::NoIntegrationParameters => 4,
        }
    }
}

/// Result of one inversion.
#[derive(Debug, Clone, Copy)]
pub struct DaviesOutput {
    /// `P(Q < c)`.
    pub cdf: f64,
    pub fault: Option<DaviesFault>,
    /// Total number of integration terms used.
    pub terms: usize,
    /// Absolute value sum bounding the round-off error.
    pub abs_sum: f64,
    /// Number of error-bound evaluations.
    pub evaluations: usize,
}

/// Term of the quadratic form: `weight * chi2(dof, noncentrality)`.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTerm {
    pub weight: f64,
    pub dof: u32,
    pub noncentrality: f64,
}

struct Exhausted;

struct Qf<'a> {
    terms: &'a [ChiSquareTerm],
    order: Vec<usize>,
    sorted: bool,
    sigsq: f64,
    lmax: f64,
    lmin: f64,
    mean: f64,
    c: f64,
    intl: f64,
    ersm: f64,
    count: usize,
    lim: usize,
    fail: bool,
}

#[inline]
fn exp1(x: f64) -> f64 {
    if x < -50.0 {
        0.0
    } else {
        x.exp()
    }
}

/// `log(1 + x)` when `first`, otherwise `log(1 + x) - x`.
fn log1(x: f64, first: bool) -> f64 {
    if x.abs() > 0.1 {
        if first {
            x.ln_1p()
        } else {
            x.ln_1p() - x
        }
    } else {
        let mut y = x / (2.0 + x);
        let mut term = 2.0 * y * y * y;
        let mut k = 3.0;
        let mut s = if first { 2.0 } else { -x } * y;
        y *= y;
        let mut s1 = s + term / k;
        while s1 != s {
            k += 2.0;
            term *= y;
            s = s1;
            s1 = s + term / k;
        }
        s
    }
}

impl<'a> Qf<'a> {
    fn counter(&mut self) -> Result<(), Exhausted> {
        self.count += 1;
        if self.count > self.lim {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    /// Indices of the weights in decreasing absolute value.
    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.terms.len()).collect();
        idx.sort_by(|&a, &b| self.terms[b].weight.abs().total_cmp(&self.terms[a].weight.abs()));
        self.order = idx;
        self.sorted = true;
    }

    /// Bound on the tail probability from the moment generating function;
    /// the cutoff point is returned alongside.
    fn errbd(&mut self, u: f64) -> Result<(f64, f64), Exhausted> {
        self.counter()?;
        let mut xconst = u * self.sigsq;
        let mut sum1 = u * xconst;
        let u = 2.0 * u;
        for t in self.terms.iter().rev() {
            let nj = t.dof as f64;
            let x = u * t.weight;
            let y = 1.0 - x;
            xconst += t.weight * (t.noncentrality / y + nj) / y;
            sum1 += t.noncentrality * (x / y).powi(2) + nj * (x * x / y + log1(-x, false));
        }
        Ok((exp1(-0.5 * sum1), xconst))
    }

    /// Cutoff `c` such that `P(Q > c) < accx` when `*upn > 0`, or
    /// `P(Q < c) < accx` otherwise.
    fn ctff(&mut self, accx: f64, upn: &mut f64) -> Result<f64, Exhausted> {
        let mut u2 = *upn;
        let mut u1 = 0.0;
        let mut c1 = self.mean;
        let rb = 2.0 * if u2 > 0.0 { self.lmax } else { self.lmin };
        let mut c2;
        loop {
            let (bound, cx) = self.errbd(u2 / (1.0 + u2 * rb))?;
            c2 = cx;
            if bound <= accx {
                break;
            }
            u1 = u2;
            c1 = c2;
            u2 *= 2.0;
        }
        let mut u = (c1 - self.mean) / (c2 - self.mean);
        while u < 0.9 {
            u = (u1 + u2) / 2.0;
            let (bound, xconst) = self.errbd(u / (1.0 + u * rb))?;
            if bound > accx {
                u1 = u;
                c1 = xconst;
            } else {
                u2 = u;
                c2 = xconst;
            }
            u = (c1 - self.mean) / (c2 - self.mean);
        }
        *upn = u2;
        Ok(c2)
    }

    /// Bound on the integration error from truncating at `u`.
    fn truncation(&mut self, u: f64, tausq: f64) -> Result<f64, Exhausted> {
        self.counter()?;
        let mut sum1 = 0.0;
        let mut prod2 = 0.0;
        let mut prod3 = 0.0;
        let mut s = 0.0;
        let sum2 = (self.sigsq + tausq) * u * u;
        let mut prod1 = 2.0 * sum2;
        let u = 2.0 * u;
        for t in self.terms {
            let nj = t.dof as f64;
            let x = (u * t.weight).powi(2);
            sum1 += t.noncentrality * x / (1.0 + x);
            if x > 1.0 {
                prod2 += nj * x.ln();
                prod3 += nj * log1(x, true);
                s += nj;
            } else {
                prod1 += nj * log1(x, true);
            }
        }
        sum1 *= 0.5;
        prod2 += prod1;
        prod3 += prod1;
        let x = exp1(-sum1 - 0.25 * prod2) / PI;
        let y = exp1(-sum1 - 0.25 * prod3) / PI;
        let mut err1 = if s == 0.0 { 1.0 } else { x * 2.0 / s };
        let err2 = if prod3 > 1.0 { 2.5 * y } else { 1.0 };
        if err2 < err1 {
            err1 = err2;
        }
        let x = 0.5 * sum2;
        let err2 = if x <= y { 1.0 } else { y / x };
        Ok(err1.min(err2))
    }

    /// Find `u` with `truncation(u) < accx` and `truncation(u / 1.2) > accx`.
    fn findu(&mut self, utx: &mut f64, accx: f64) -> Result<(), Exhausted> {
        const DIVIS: [f64; 4] = [2.0, 1.4, 1.2, 1.1];
        let mut ut = *utx;
        let mut u = ut / 4.0;
        if self.truncation(u, 0.0)? > accx {
            u = ut;
            while self.truncation(u, 0.0)? > accx {
                ut *= 4.0;
                u = ut;
            }
        } else {
            ut = u;
            u /= 4.0;
            while self.truncation(u, 0.0)? <= accx {
                ut = u;
                u /= 4.0;
            }
        }
        for d in DIVIS {
            let u = ut / d;
            if self.truncation(u, 0.0)? <= accx {
                ut = u;
            }
        }
        *utx = ut;
        Ok(())
    }

    /// Integrate with `nterm` terms at step `interv`; when `!mainx` the
    /// integrand is multiplied by `1 - exp(-tausq u^2 / 2)`.
    fn integrate(&mut self, nterm: usize, interv: f64, tausq: f64, mainx: bool) {
        let inpi = interv / PI;
        for k in (0..=nterm).rev() {
            let u = (k as f64 + 0.5) * interv;
            let mut sum1 = -2.0 * u * self.c;
            let mut sum2 = sum1.abs();
            let mut sum3 = -0.5 * self.sigsq * u * u;
            for t in self.terms.iter().rev() {
                let nj = t.dof as f64;
                let x = 2.0 * t.weight * u;
                let y = x * x;
                sum3 -= 0.25 * nj * log1(y, true);
                let y = t.noncentrality * x / (1.0 + y);
                let z = nj * x.atan() + y;
                sum1 += z;
                sum2 += z.abs();
                sum3 -= 0.5 * x * y;
            }
            let mut x = inpi * exp1(sum3) / u;
            if !mainx {
                x *= 1.0 - exp1(-0.5 * tausq * u * u);
            }
            self.intl += (0.5 * sum1).sin() * x;
            self.ersm += 0.5 * sum2 * x;
        }
    }

    /// Coefficient of `tausq` in the error when the convergence factor
    /// `exp(-tausq u^2 / 2)` is used and the cdf is evaluated at `x`.
    fn cfe(&mut self, x: f64) -> Result<f64, Exhausted> {
        self.counter()?;
        if !self.sorted {
            self.order();
        }
        let mut axl = x.abs();
        let sxl = if x > 0.0 { 1.0 } else { -1.0 };
        let mut sum1 = 0.0;
        for j in (0..self.terms.len()).rev() {
            let t = self.terms[self.order[j]];
            if t.weight * sxl > 0.0 {
                let lj = t.weight.abs();
                let axl1 = axl - lj * (t.dof as f64 + t.noncentrality);
                let axl2 = lj / LOG28;
                if axl1 > axl2 {
                    axl = axl1;
                } else {
                    if axl > axl2 {
                        axl = axl2;
                    }
                    sum1 = (axl - axl1) / lj;
                    for k in (0..j).rev() {
                        let tk = self.terms[self.order[k]];
                        sum1 += tk.dof as f64 + tk.noncentrality;
                    }
                    break;
                }
            }
        }
        if sum1 > 100.0 {
            self.fail = true;
            Ok(1.0)
        } else {
            Ok(2f64.powf(sum1 / 4.0) / (PI * axl * axl))
        }
    }
}

/// `P(sum_j w_j chi2_j + sigma Z < c)`.
///
/// `lim` bounds the number of integration terms and `acc` is the target
/// absolute error.
pub fn qf_cdf(terms: &[ChiSquareTerm], sigma: f64, c: f64, lim: usize, acc: f64) -> DaviesOutput {
    let mut out = DaviesOutput {
        cdf: -1.0,
        fault: None,
        terms: 0,
        abs_sum: 0.0,
        evaluations: 0,
    };
    let mut qf = Qf {
        terms,
        order: Vec::new(),
        sorted: false,
        sigsq: sigma * sigma,
        lmax: 0.0,
        lmin: 0.0,
        mean: 0.0,
        c,
        intl: 0.0,
        ersm: 0.0,
        count: 0,
        lim,
        fail: false,
    };
    match run(&mut qf, sigma, acc, &mut out) {
        Ok(()) => {}
        Err(Exhausted) => out.fault = Some(DaviesFault::NoIntegrationParameters),
    }
    out.evaluations = qf.count;
    out
}

fn run(qf: &mut Qf<'_>, sigma: f64, acc: f64, out: &mut DaviesOutput) -> Result<(), Exhausted> {
    const RATS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
    let mut acc1 = acc;
    let mut xlim = qf.lim as f64;
    let mut sd = qf.sigsq;
    for t in qf.terms {
        if t.noncentrality < 0.0 || !t.weight.is_finite() {
            out.fault = Some(DaviesFault::InvalidParameters);
            return Ok(());
        }
        let lj = t.weight;
        sd += lj * lj * (2.0 * t.dof as f64 + 4.0 * t.noncentrality);
        qf.mean += lj * (t.dof as f64 + t.noncentrality);
        if qf.lmax < lj {
            qf.lmax = lj;
        } else if qf.lmin > lj {
            qf.lmin = lj;
        }
    }
    if sd == 0.0 {
        out.cdf = if qf.c > 0.0 { 1.0 } else { 0.0 };
        return Ok(());
    }
    if qf.lmin == 0.0 && qf.lmax == 0.0 && sigma == 0.0 {
        out.fault = Some(DaviesFault::InvalidParameters);
        return Ok(());
    }
    let sd = sd.sqrt();
    let almx = if qf.lmax < -qf.lmin { -qf.lmin } else { qf.lmax };

    let mut utx = 16.0 / sd;
    let mut up = 4.5 / sd;
    let mut un = -up;
    qf.findu(&mut utx, 0.5 * acc1)?;
    if qf.c != 0.0 && almx > 0.07 * sd {
        let tausq = 0.25 * acc1 / qf.cfe(qf.c)?;
        if qf.fail {
            qf.fail = false;
        } else if qf.truncation(utx, tausq)? < 0.2 * acc1 {
            qf.sigsq += tausq;
            qf.findu(&mut utx, 0.25 * acc1)?;
        }
    }
    acc1 *= 0.5;

    let intv;
    let xnt;
    loop {
        let d1 = qf.ctff(acc1, &mut up)? - qf.c;
        if d1 < 0.0 {
            out.cdf = 1.0;
            return Ok(());
        }
        let d2 = qf.c - qf.ctff(acc1, &mut un)?;
        if d2 < 0.0 {
            out.cdf = 0.0;
            return Ok(());
        }
        let step = 2.0 * PI / d1.max(d2);
        let nt = utx / step;
        let xntm = 3.0 / acc1.sqrt();
        if nt > xntm * 1.5 {
            // auxiliary integration with a convergence factor
            if xntm > xlim {
                out.fault = Some(DaviesFault::AccuracyNotAchieved);
                return Ok(());
            }
            let ntm = (xntm + 0.5).floor() as usize;
            let intv1 = utx / ntm as f64;
            let x = 2.0 * PI / intv1;
            if x <= qf.c.abs() {
                intv = step;
                xnt = nt;
                break;
            }
            let tausq = 0.33 * acc1 / (1.1 * (qf.cfe(qf.c - x)? + qf.cfe(qf.c + x)?));
            if qf.fail {
                intv = step;
                xnt = nt;
                break;
            }
            acc1 *= 0.67;
            qf.integrate(ntm, intv1, tausq, false);
            xlim -= xntm;
            qf.sigsq += tausq;
            out.terms += ntm + 1;
            qf.findu(&mut utx, 0.25 * acc1)?;
            acc1 *= 0.75;
            continue;
        }
        intv = step;
        xnt = nt;
        break;
    }

    if xnt > xlim {
        out.fault = Some(DaviesFault::AccuracyNotAchieved);
        return Ok(());
    }
    let nt = (xnt + 0.5).floor() as usize;
    qf.integrate(nt, intv, 0.0, true);
    out.terms += nt + 1;
    out.cdf = 0.5 - qf.intl;
    out.abs_sum = qf.ersm;

    let up = qf.ersm;
    let x = up + acc / 10.0;
    if RATS.iter().any(|r| r * x == r * up) {
        out.fault = Some(DaviesFault::RoundOff);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(weights: &[f64]) -> Vec<ChiSquareTerm> {
        weights
            .iter()
            .map(|&w| ChiSquareTerm {
                weight: w,
                dof: 1,
                noncentrality: 0.0,
            })
            .collect()
    }

    #[test]
    fn chi2_one_quantile() {
        let out = qf_cdf(&central(&[1.0]), 0.0, 3.841458820694124, 1_000_000, 1e-9);
        assert!(out.fault.is_none(), "{:?}", out.fault);
        assert!((1.0 - out.cdf - 0.05).abs() < 1e-8, "{}", out.cdf);
    }

    #[test]
    fn chi2_two_dof_matches_exponential() {
        // chi2 with 2 dof: P(Q > q) = exp(-q / 2)
        for q in [0.5, 2.0, 5.991464547107979, 12.0] {
            let out = qf_cdf(&central(&[1.0, 1.0]), 0.0, q, 1_000_000, 1e-9);
            assert!((1.0 - out.cdf - (-q / 2.0f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn normal_term_only() {
        // sigma Z < 0 has probability one half
        let out = qf_cdf(&[], 1.0, 0.0, 1_000_000, 1e-9);
        assert!((out.cdf - 0.5).abs() < 1e-8);
    }

    #[test]
    fn mixed_sign_laplace() {
        // chi2_2 - chi2_2 is Laplace with scale 2
        let w = central(&[1.0, 1.0, -1.0, -1.0]);
        for c in [-3.0f64, -0.5, 0.0, 1.5] {
            let out = qf_cdf(&w, 0.0, c, 1_000_000, 1e-9);
            assert!(out.fault.is_none(), "{:?}", out);
            let exact = if c < 0.0 {
                0.5 * (c / 2.0).exp()
            } else {
                1.0 - 0.5 * (-c / 2.0).exp()
            };
            assert!((out.cdf - exact).abs() < 1e-8, "c={c}: {} vs {exact}", out.cdf);
        }
    }

    #[test]
    fn log1_series_branch() {
        for x in [0.05, -0.05, 1e-6, 0.09] {
            assert!((log1(x, true) - f64::ln_1p(x)).abs() < 1e-15);
            assert!((log1(x, false) - (f64::ln_1p(x) - x)).abs() < 1e-15);
        }
    }
}
