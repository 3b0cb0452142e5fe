//! Test one rare-variant set against a phenotype, with and without a
//! covariate, and reuse the prepared phenotype side across sets.

use gsu::kernels::KernelConfig;
use gsu::model::{validate_phenotypes, CovariateMatrix, VariantSet};
use gsu::nulldist::{replicate_rng, test_association, AssociationTest, PValueOptions};
use gsu::simgen::GenotypePanel;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = GenotypePanel::fixture();
    let mut rng = replicate_rng(11, 0);
    let segment = panel.sample_segment(300, 30_000, Some(0.05), &mut rng)?;
    let g = &segment.genotypes;
    println!("{} subjects, {} rare variants", g.n_subjects(), g.n_variants());

    let n = g.n_subjects();
    let burden: Vec<f64> = (0..n).map(|i| g.values().row(i).sum()).collect();
    let age: Vec<f64> = (0..n).map(|_| rng.gen_range(20.0..70.0)).collect();
    let y = DMatrix::from_fn(n, 1, |i, _| {
        0.8 * burden[i] + 0.03 * age[i] + rng.sample::<f64, _>(StandardNormal)
    });
    let y = validate_phenotypes(y, None)?;
    let set = VariantSet::all("segment", g);
    let kernels = KernelConfig::default();
    let options = PValueOptions::default();

    let plain = test_association(g, &set, &y, &CovariateMatrix::intercept_only(n), &kernels, &options)?;
    let x = CovariateMatrix::with_covariates(&DMatrix::from_column_slice(n, 1, &age))?;
    let adjusted = test_association(g, &set, &y, &x, &kernels, &options)?;
    for (label, r) in [("intercept only", &plain), ("age-adjusted", &adjusted)] {
        println!(
            "{label:>15}: n*V = {:.4}  U_gamma = {:.4}  p = {:.3e} ({})",
            r.statistic, r.u_gamma, r.p_value, r.method
        );
    }

    // Prepared once, the phenotype side serves any number of sets.
    let test = AssociationTest::new(&y, &x, kernels, options)?;
    let half = g.n_variants() / 2;
    for (name, members) in [
        ("first half", (0..half).collect::<Vec<_>>()),
        ("second half", (half..g.n_variants()).collect()),
    ] {
        if members.is_empty() {
            continue;
        }
        let s = VariantSet::new(name, "1", members, g.n_variants())?;
        let r = test.test_set(g, &s)?;
        println!("{name:>15}: {} variants, p = {:.3e}", r.set_size, r.p_value);
    }
    Ok(())
}
