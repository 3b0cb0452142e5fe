//! Tail probabilities of a weighted chi-square mixture by Davies inversion,
//! Liu moment matching and the saddlepoint approximation.

use gsu::nulldist::{davies_pvalue, liu_pvalue, saddlepoint_pvalue, tail_probability, PValueOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let coeffs = [0.5, 0.25, 0.125, 0.0625, -0.05];
    let mean: f64 = coeffs.iter().sum();
    println!("coefficients {coeffs:?}, mean {mean}");
    println!("{:>8} {:>12} {:>12} {:>12}", "q", "davies", "liu", "saddlepoint");
    for q in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        println!(
            "{q:>8} {:>12.4e} {:>12.4e} {:>12.4e}",
            davies_pvalue(&coeffs, q, 1e-9)?,
            liu_pvalue(&coeffs, q)?,
            saddlepoint_pvalue(&coeffs, q)?
        );
    }

    // The default policy hands deep tails over to the saddlepoint.
    for q in [4.0, 40.0] {
        let t = tail_probability(&coeffs, q, &PValueOptions::default())?;
        println!("auto at q = {q}: p = {:.4e} via {}", t.p_value, t.method);
    }
    Ok(())
}
