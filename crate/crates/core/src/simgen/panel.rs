//! Synthetic haplotype panel with rare-variant allele frequencies and
//! short-range linkage.
//!
//! Each variant receives a target MAF drawn log-uniformly. A fixed set of
//! founder haplotypes carries independent Bernoulli(MAF) alleles. Every
//! panel haplotype walks along the region copying a founder, switching to
//! a new founder with probability `1 - exp(-d / switch_scale)` between
//! variants `d` bases apart; at each variant the copied allele is kept with
//! probability `copy_prob` and otherwise redrawn from Bernoulli(MAF). The
//! marginal allele frequency therefore equals the target in expectation.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GsuError, Result};
use crate::model::{validate_genotypes, GenotypeMatrix, VariantInfo};
use crate::nulldist::replicate_rng;

/// Seed of the bundled fixture panel.
pub const FIXTURE_SEED: u64 = 0x5eed_1092;

#[derive(Debug, Clone)]
pub struct PanelConfig {
    pub n_individuals: usize,
    pub region_length: u64,
    pub n_variants: usize,
    pub n_founders: usize,
    pub copy_prob: f64,
    pub switch_scale: f64,
    pub maf_min: f64,
    pub maf_max: f64,
    pub chromosome: String,
}

impl Default for PanelConfig {
    fn default() -> Self {
        PanelConfig {
            n_individuals: 1092,
            region_length: 1_000_000,
            n_variants: 3000,
            n_founders: 100,
            copy_prob: 0.8,
            switch_scale: 20_000.0,
            maf_min: 0.001,
            maf_max: 0.05,
            chromosome: "1".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenotypePanel {
    config: PanelConfig,
    positions: Vec<u64>,
    target_mafs: Vec<f64>,
    founders: Vec<Vec<u8>>,
    haplotypes: Vec<Vec<u8>>,
}

/// Rows, columns and validated genotypes of a drawn segment.
#[derive(Debug, Clone)]
pub struct Segment {
    pub individuals: Vec<usize>,
    pub variants: Vec<usize>,
    pub genotypes: GenotypeMatrix,
}

impl GenotypePanel {
    pub fn generate(config: PanelConfig, seed: u64) -> Result<Self> {
        if config.n_individuals < 3 || config.n_variants == 0 || config.n_founders == 0 {
            return Err(GsuError::InvalidParameter(
                "panel needs individuals, variants and founders".into(),
            ));
        }
        if !(config.maf_min > 0.0 && config.maf_min <= config.maf_max && config.maf_max <= 0.5) {
            return Err(GsuError::InvalidParameter(
                "panel MAF range must satisfy 0 < min <= max <= 0.5".into(),
            ));
        }
        if !(0.0..=1.0).contains(&config.copy_prob) || !(config.switch_scale > 0.0) {
            return Err(GsuError::InvalidParameter("invalid copying parameters".into()));
        }
        if (config.region_length as usize) < config.n_variants {
            return Err(GsuError::InvalidParameter(
                "region shorter than the number of variants".into(),
            ));
        }
        let mut rng = replicate_rng(seed, 0);
        let m = config.n_variants;
        let mut positions: Vec<u64> = sample(&mut rng, config.region_length as usize, m)
            .into_iter()
            .map(|p| p as u64 + 1)
            .collect();
        positions.sort_unstable();
        let (lo, hi) = (config.maf_min.ln(), config.maf_max.ln());
        let target_mafs: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..=hi).exp()).collect();
        let founders: Vec<Vec<u8>> = (0..config.n_founders)
            .map(|_| target_mafs.iter().map(|&f| u8::from(rng.gen_bool(f))).collect())
            .collect();
        let mut panel = GenotypePanel {
            config,
            positions,
            target_mafs,
            founders,
            haplotypes: Vec::new(),
        };
        let n_haps = 2 * panel.config.n_individuals;
        panel.haplotypes = (0..n_haps).map(|_| panel.draw_haplotype(&mut rng)).collect();
        Ok(panel)
    }

    /// The deterministic default panel used by tests and examples.
    pub fn fixture() -> Self {
        Self::generate(PanelConfig::default(), FIXTURE_SEED).expect("default panel configuration is valid")
    }

    fn draw_haplotype(&self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let k = self.founders.len();
        let mut founder = rng.gen_range(0..k);
        let mut prev = self.positions[0];
        let mut hap = Vec::with_capacity(self.positions.len());
        for (m, (&pos, &maf)) in self.positions.iter().zip(&self.target_mafs).enumerate() {
            let d = (pos - prev) as f64;
            if rng.gen_bool(1.0 - (-d / self.config.switch_scale).exp()) {
                founder = rng.gen_range(0..k);
            }
            prev = pos;
            let allele = if rng.gen_bool(self.config.copy_prob) {
                self.founders[founder][m]
            } else {
                u8::from(rng.gen_bool(maf))
            };
            hap.push(allele);
        }
        hap
    }

    pub fn config(&self) -> &PanelConfig {
        &self.config
    }

    pub fn n_individuals(&self) -> usize {
        self.config.n_individuals
    }

    pub fn n_variants(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    pub fn target_mafs(&self) -> &[f64] {
        &self.target_mafs
    }

    pub fn variant_info(&self, m: usize) -> VariantInfo {
        VariantInfo::new(
            format!("{}:{}", self.config.chromosome, self.positions[m]),
            self.config.chromosome.clone(),
            self.positions[m],
        )
    }

    /// Minor-allele count of `individual` at `variant`.
    pub fn genotype(&self, individual: usize, variant: usize) -> f64 {
        (self.haplotypes[2 * individual][variant] + self.haplotypes[2 * individual + 1][variant]) as f64
    }

    pub fn genotypes(&self, individuals: &[usize], variants: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(individuals.len(), variants.len(), |i, j| {
            self.genotype(individuals[i], variants[j])
        })
    }

    /// Genotypes of `n` new individuals drawn independently from the panel
    /// model (fresh haplotypes from the same founders).
    pub fn draw_individuals(&self, n: usize, variants: &[usize], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, variants.len());
        for i in 0..n {
            let a = self.draw_haplotype(rng);
            let b = self.draw_haplotype(rng);
            for (j, &m) in variants.iter().enumerate() {
                out[(i, j)] = (a[m] + b[m]) as f64;
            }
        }
        out
    }

    /// Variants whose position lies in `[start, start + length)`.
    pub fn variants_in(&self, start: u64, length: u64) -> Vec<usize> {
        let lo = self.positions.partition_point(|&p| p < start);
        let hi = self.positions.partition_point(|&p| p < start.saturating_add(length));
        (lo..hi).collect()
    }

    /// Draw `n` panel individuals without replacement and a random segment
    /// of `length` bases, keeping variants that are polymorphic in the
    /// sample and, when `maf_filter` is set, whose sample MAF is below it.
    pub fn sample_segment(
        &self,
        n: usize,
        length: u64,
        maf_filter: Option<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Segment> {
        if n > self.n_individuals() {
            return Err(GsuError::InvalidParameter(format!(
                "sample size {n} exceeds panel size {}",
                self.n_individuals()
            )));
        }
        let span = self.config.region_length.saturating_sub(length).max(1);
        for _ in 0..1000 {
            let start = rng.gen_range(1..=span);
            let candidates = self.variants_in(start, length);
            if candidates.is_empty() {
                continue;
            }
            let mut individuals = sample(rng, self.n_individuals(), n).into_vec();
            individuals.sort_unstable();
            let variants: Vec<usize> = candidates
                .into_iter()
                .filter(|&m| {
                    let count: f64 = individuals.iter().map(|&i| self.genotype(i, m)).sum();
                    let freq = count / (2 * n) as f64;
                    let maf = freq.min(1.0 - freq);
                    maf > 0.0 && maf_filter.is_none_or(|t| maf < t)
                })
                .collect();
            if variants.is_empty() {
                continue;
            }
            let raw = self.genotypes(&individuals, &variants);
            let info = variants.iter().map(|&m| self.variant_info(m)).collect();
            let genotypes = validate_genotypes(raw, info)?;
            return Ok(Segment {
                individuals,
                variants,
                genotypes,
            });
        }
        Err(GsuError::InvalidParameter(
            "no segment with polymorphic variants found".into(),
        ))
    }
}
