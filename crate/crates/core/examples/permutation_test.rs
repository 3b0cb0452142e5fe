//! Permutation p-values next to the asymptotic one. Results depend only on
//! the seed, not on the number of threads.

use gsu::kernels::{genotype_similarity, phenotype_similarity, KernelConfig};
use gsu::model::{validate_phenotypes, CovariateMatrix, VariantSet};
use gsu::nulldist::{permutation_pvalue, replicate_rng, test_association, PValueOptions};
use gsu::simgen::GenotypePanel;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = GenotypePanel::fixture();
    let mut rng = replicate_rng(5, 0);
    let segment = panel.sample_segment(100, 30_000, Some(0.05), &mut rng)?;
    let g = &segment.genotypes;
    let n = g.n_subjects();
    let y = DMatrix::from_fn(n, 1, |i, _| {
        0.5 * g.values().row(i).sum() + rng.sample::<f64, _>(StandardNormal)
    });
    let y = validate_phenotypes(y, None)?;
    let set = VariantSet::all("segment", g);
    let kernels = KernelConfig::default();
    let x = CovariateMatrix::intercept_only(n);

    let asymptotic = test_association(g, &set, &y, &x, &kernels, &PValueOptions::default())?;
    println!("asymptotic p = {:.4e}", asymptotic.p_value);

    let k = genotype_similarity(g, &set, &kernels)?;
    let s = phenotype_similarity(&y, &kernels)?;
    for b in [999, 9999] {
        let out = permutation_pvalue(&k, &s, b, 2024)?;
        println!("B = {b:>5}: p = {:.4e} ({} exceedances)", out.p_value, out.exceed);
    }

    let again = permutation_pvalue(&k, &s, 999, 2024)?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()?
        .install(|| permutation_pvalue(&k, &s, 999, 2024))?;
    println!(
        "repeat and single-thread runs agree: {}",
        again.p_value == single.p_value
    );
    Ok(())
}
