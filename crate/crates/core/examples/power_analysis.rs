//! Power curves and sample sizes, from given moments and from a pilot
//! sample.

use gsu::kernels::{genotype_similarity, phenotype_similarity, KernelConfig};
use gsu::model::{validate_phenotypes, CovariateMatrix, VariantSet};
use gsu::nulldist::replicate_rng;
use gsu::power::{
    asymptotic_power, estimate_effect_params, null_quantile, pilot_coefficients, required_sample_size, PowerParams,
};
use gsu::simgen::GenotypePanel;
use gsu::ustat::{prepare, ProjectionContext};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = PowerParams::new(0.05, 0.01, 0.01, 0.05, 4.0)?;
    for n in [25, 50, 100, 200] {
        println!("n = {n:>3}: power {:.4}", asymptotic_power(n, &params)?);
    }
    for beta in [0.5, 0.8, 0.9] {
        println!("power {beta}: n = {}", required_sample_size(&params, beta)?);
    }

    // Pilot data: estimate the effect moments and the null critical value.
    let panel = GenotypePanel::fixture();
    let mut rng = replicate_rng(21, 0);
    let segment = panel.sample_segment(400, 30_000, Some(0.05), &mut rng)?;
    let g = &segment.genotypes;
    let n = g.n_subjects();
    let y = DMatrix::from_fn(n, 1, |i, _| {
        0.3 * g.values().row(i).sum() + rng.sample::<f64, _>(StandardNormal)
    });
    let y = validate_phenotypes(y, None)?;
    let kernels = KernelConfig::default();
    let ctx = ProjectionContext::new(&CovariateMatrix::intercept_only(n))?;
    let (k, _) = prepare(&genotype_similarity(g, &VariantSet::all("pilot", g), &kernels)?, &ctx)?;
    let (s, _) = prepare(&phenotype_similarity(&y, &kernels)?, &ctx)?;

    let effect = estimate_effect_params(&k, &s)?;
    let q = null_quantile(&pilot_coefficients(&k, &s, 1e-8)?, 0.05)?;
    println!(
        "pilot: mu_U = {:.3e}, zeta0 = {:.3e}, zeta1 = {:.3e}, q = {:.4}",
        effect.mu_u, effect.zeta0, effect.zeta1, q
    );
    let pilot = effect.into_params(0.05, q)?;
    for beta in [0.8, 0.9] {
        println!(
            "pilot-based n for power {beta}: {}",
            required_sample_size(&pilot, beta)?
        );
    }
    Ok(())
}
