//! Synthetic scan inputs drawn from the fixture panel.
//!
//! The 1 Mb panel region is tiled by 20 genes of 50 kb. Phenotypes are
//! Gaussian; with a nonzero `effect` one gene carries a burden signal from
//! a random half of its variants, scaled so the burden explains a share
//! `effect^2 / (1 + effect^2)` of the phenotype variance.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::nulldist::replicate_rng;
use crate::scan::io::{write_gene_ranges, write_genotypes, write_matrix, GeneRange};
use crate::simgen::GenotypePanel;

pub const FIXTURE_GENES: usize = 20;
pub const FIXTURE_GENE_BP: u64 = 50_000;

/// Paths of a written fixture and the planted gene, if any.
#[derive(Debug, Clone)]
pub struct ScanFixture {
    pub genotype: PathBuf,
    pub phenotype: PathBuf,
    pub generanges: PathBuf,
    pub planted: Option<String>,
}

pub fn fixture_genes(chromosome: &str) -> Vec<GeneRange> {
    (0..FIXTURE_GENES as u64)
        .map(|k| GeneRange {
            gene: format!("GENE{:02}", k + 1),
            chromosome: chromosome.to_string(),
            start: 1 + k * FIXTURE_GENE_BP,
            end: (k + 1) * FIXTURE_GENE_BP,
        })
        .collect()
}

/// Write `n` panel individuals and a phenotype into `dir`.
pub fn write_scan_fixture(panel: &GenotypePanel, dir: &Path, n: usize, effect: f64, seed: u64) -> Result<ScanFixture> {
    let mut rng = replicate_rng(seed, 0);
    let mut individuals = sample(&mut rng, panel.n_individuals(), n).into_vec();
    individuals.sort_unstable();
    let all: Vec<usize> = (0..panel.n_variants()).collect();
    let g = panel.genotypes(&individuals, &all);
    let chromosome = panel.config().chromosome.clone();
    let genes = fixture_genes(&chromosome);

    let mut y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let planted = if effect != 0.0 {
        let gi = rng.gen_range(0..genes.len());
        let gene = &genes[gi];
        let members = panel.variants_in(gene.start, gene.end - gene.start + 1);
        let causal: Vec<usize> = members.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let burden: Vec<f64> = (0..n).map(|i| causal.iter().map(|&m| g[(i, m)]).sum()).collect();
        let mean = burden.iter().sum::<f64>() / n as f64;
        let sd = (burden.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd > 0.0 {
            for (yi, b) in y.iter_mut().zip(&burden) {
                *yi += effect * (b - mean) / sd;
            }
        }
        Some(gene.gene.clone())
    } else {
        None
    };

    let genotype = dir.join("fixture.geno");
    let phenotype = dir.join("fixture.pheno");
    let generanges = dir.join("fixture.genes");
    let info: Vec<_> = all.iter().map(|&m| panel.variant_info(m)).collect();
    write_genotypes(&genotype, &g, &info)?;
    write_matrix(&phenotype, &DMatrix::from_column_slice(n, 1, &y))?;
    write_gene_ranges(&generanges, &genes)?;
    Ok(ScanFixture {
        genotype,
        phenotype,
        generanges,
        planted,
    })
}
