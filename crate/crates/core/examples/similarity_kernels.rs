//! Phenotype and genotype similarity matrices on a handful of subjects.

use gsu::kernels::{cross_product_phenotype, genotype_similarity, laplacian_phenotype, GenotypeKernel, KernelConfig};
use gsu::model::{validate_genotypes, validate_phenotypes, VariantInfo, VariantSet};
use gsu::ustat::center_similarity;
use nalgebra::{dmatrix, DMatrix};

fn show(title: &str, m: &DMatrix<f64>) {
    println!("{title}");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:8.4}", m[(i, j)])).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two traits; the last subject is an outlier on the first one.
    let y = validate_phenotypes(dmatrix![0.1, 1.0; 0.3, 0.8; -0.2, 1.1; 0.0, 0.9; 9.0, 1.0], None)?;
    show("laplacian phenotype similarity", laplacian_phenotype(&y).values());
    show(
        "cross-product phenotype similarity",
        cross_product_phenotype(&y).values(),
    );

    let raw = dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 0.0; 1.0, 1.0, 0.0; 0.0, 0.0, 2.0; f64::NAN, 1.0, 0.0];
    let g = validate_genotypes(raw, VariantInfo::anonymous(3))?;
    println!("mafs after imputation: {:?}", g.mafs());
    let set = VariantSet::all("all", &g);
    for kernel in [GenotypeKernel::Ibs, GenotypeKernel::WeightedIbs, GenotypeKernel::Lk] {
        let config = KernelConfig {
            genotype: kernel,
            ..KernelConfig::default()
        };
        let k = genotype_similarity(&g, &set, &config)?;
        show(&format!("{kernel:?} genotype similarity"), k.values());
    }

    let k = genotype_similarity(&g, &set, &KernelConfig::default())?;
    show("double-centered LK similarity", center_similarity(&k)?.values());
    Ok(())
}
