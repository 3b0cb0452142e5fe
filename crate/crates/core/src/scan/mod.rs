//! Genome scan: load files, group variants into sets, test every set in
//! parallel and write a ranked table.
//!
//! Variants are grouped before any filtering so set names do not depend on
//! quality control. Each set then keeps members whose missing rate is at
//! most `max_missing` and, when `maf_max` is given, whose MAF is at most
//! `maf_max`. Sets left empty are skipped; their variants count as skipped.

pub mod fixture;
pub mod grouping;
pub mod io;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GsuError, Result};
use crate::kernels::{genotype_similarity, KernelConfig};
use crate::model::{
    validate_genotypes, validate_phenotypes, CovariateMatrix, GenotypeMatrix, SimilarityMatrix, TestResult, VariantSet,
};
use crate::nulldist::{AssociationTest, PValueOptions};

pub use grouping::{group_variants, overlapping_genes, window_name, WindowAnchor};
pub use io::GeneRange;

pub const DEFAULT_WINDOW_BP: u64 = 50_000;
pub const DEFAULT_MAX_MISSING: f64 = 0.1;

/// Where the phenotype side comes from.
#[derive(Debug, Clone)]
pub enum PhenotypeSource {
    /// Phenotype matrix file, with optional per-column weights.
    Matrix { path: PathBuf, weights: Option<Vec<f64>> },
    /// Precomputed raw `n x n` phenotype similarity.
    Similarity(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub genotype: PathBuf,
    /// Variant sidecar; defaults to the genotype path plus `.variants`.
    pub variants: Option<PathBuf>,
    pub phenotype: PhenotypeSource,
    pub covariates: Option<PathBuf>,
    pub generanges: Option<PathBuf>,
    pub window_bp: u64,
    pub anchor: WindowAnchor,
    pub maf_max: Option<f64>,
    pub max_missing: f64,
    pub kernels: KernelConfig,
    pub options: PValueOptions,
    pub alpha: f64,
    /// Worker threads; `0` uses all available cores.
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl ScanConfig {
    pub fn new(genotype: impl Into<PathBuf>, phenotype: PhenotypeSource) -> Self {
        ScanConfig {
            genotype: genotype.into(),
            variants: None,
            phenotype,
            covariates: None,
            generanges: None,
            window_bp: DEFAULT_WINDOW_BP,
            anchor: WindowAnchor::default(),
            maf_max: None,
            max_missing: DEFAULT_MAX_MISSING,
            kernels: KernelConfig::default(),
            options: PValueOptions::default(),
            alpha: 0.05,
            threads: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_bp == 0 {
            return Err(GsuError::InvalidParameter("window size must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GsuError::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.max_missing) {
            return Err(GsuError::InvalidParameter(format!(
                "max missing rate must lie in [0, 1], got {}",
                self.max_missing
            )));
        }
        if let Some(m) = self.maf_max {
            if !(m > 0.0 && m <= 0.5) {
                return Err(GsuError::InvalidParameter(format!(
                    "maf-max must lie in (0, 0.5], got {m}"
                )));
            }
        }
        self.options.validate()
    }
}

/// One tested set.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub set: String,
    pub chromosome: String,
    pub size: usize,
    pub outcome: std::result::Result<TestResult, String>,
}

impl ScanRow {
    pub fn p_value(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.p_value)
    }
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    /// Sorted by p-value, then set name; failed sets last.
    pub rows: Vec<ScanRow>,
    pub alpha: f64,
    pub n_variants: usize,
    pub skipped_sets: Vec<String>,
    pub skipped_variants: usize,
}

impl ScanReport {
    pub fn bonferroni(&self) -> f64 {
        self.alpha / self.rows.len().max(1) as f64
    }

    /// Rows whose p-value is at or below the Bonferroni threshold.
    pub fn significant(&self) -> impl Iterator<Item = &ScanRow> {
        let t = self.bonferroni();
        self.rows.iter().filter(move |r| r.p_value().is_some_and(|p| p <= t))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# sets={} alpha={} bonferroni={} skipped_sets={} skipped_variants={}",
            self.rows.len(),
            self.alpha,
            self.bonferroni(),
            self.skipped_sets.len(),
            self.skipped_variants
        );
        for s in &self.skipped_sets {
            let _ = writeln!(out, "# skipped {s}: no variants left after filtering");
        }
        out.push_str("set\tchr\tsize\tstatistic\tu_gamma\tp_value\tmethod\tnote\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        row.set,
                        row.chromosome,
                        row.size,
                        r.statistic,
                        r.u_gamma,
                        r.p_value,
                        r.method,
                        note(r)
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\tNA\tNA\tNA\tNA\terror: {}",
                        row.set,
                        row.chromosome,
                        row.size,
                        e.replace(['\t', '\n'], " ")
                    );
                }
            }
        }
        out
    }
}

fn note(r: &TestResult) -> String {
    let mut parts = Vec::new();
    if r.diagnostics.contains_key("degenerate_spectrum") {
        parts.push("degenerate_spectrum".to_string());
    }
    if r.diagnostics.contains_key("u_gamma_undefined") {
        parts.push("u_gamma_undefined".to_string());
    }
    if let Some(code) = r.diagnostics.get("davies_fault") {
        parts.push(format!("davies_fault={code}"));
    }
    if r.diagnostics.contains_key("fallback") {
        parts.push("fallback".to_string());
    }
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(";")
    }
}

fn compare_rows(a: &ScanRow, b: &ScanRow) -> Ordering {
    match (a.p_value(), b.p_value()) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.set.cmp(&b.set)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.set.cmp(&b.set),
    }
}

/// Members of `set` that pass the missingness and MAF filters.
fn filter_members(g: &GenotypeMatrix, set: &VariantSet, maf_max: Option<f64>, max_missing: f64) -> Vec<usize> {
    set.members()
        .iter()
        .copied()
        .filter(|&j| g.missing_rate(j) <= max_missing && maf_max.is_none_or(|t| g.mafs()[j] <= t))
        .collect()
}

/// Test every set of `g` against a prepared association test.
///
/// The permutation seed of set `i` (in `sets` order) is `options.seed + i`.
pub fn scan_sets(
    test: &AssociationTest,
    g: &GenotypeMatrix,
    sets: &[VariantSet],
    maf_max: Option<f64>,
    max_missing: f64,
    alpha: f64,
) -> ScanReport {
    let base_seed = test.options().seed;
    let results: Vec<(usize, Option<ScanRow>, usize)> = sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let kept = filter_members(g, set, maf_max, max_missing);
            let dropped = set.len() - kept.len();
            if kept.is_empty() {
                return (i, None, dropped);
            }
            let outcome = VariantSet::new(set.name.clone(), set.chromosome.clone(), kept.clone(), g.n_variants())
                .and_then(|s| genotype_similarity(g, &s, test.kernels()))
                .and_then(|k| test.test_similarity_seeded(&k, &set.name, kept.len(), base_seed.wrapping_add(i as u64)))
                .map_err(|e| e.to_string());
            let row = ScanRow {
                set: set.name.clone(),
                chromosome: set.chromosome.clone(),
                size: kept.len(),
                outcome,
            };
            (i, Some(row), dropped)
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped_sets = Vec::new();
    let mut skipped_variants = 0;
    for (i, row, dropped) in results {
        skipped_variants += dropped;
        match row {
            Some(r) => rows.push(r),
            None => skipped_sets.push(sets[i].name.clone()),
        }
    }
    rows.sort_by(compare_rows);
    ScanReport {
        rows,
        alpha,
        n_variants: g.n_variants(),
        skipped_sets,
        skipped_variants,
    }
}

/// Load all inputs named by `config`, run the scan and write the table to
/// `config.output` when set.
pub fn run_scan(config: &ScanConfig) -> Result<ScanReport> {
    config.validate()?;
    let variants_path = config
        .variants
        .clone()
        .unwrap_or_else(|| io::default_variants_path(&config.genotype));
    let raw = io::load_raw_genotypes(&config.genotype, &variants_path)?;
    let g = validate_genotypes(raw.values, raw.variants)?;
    let n = g.n_subjects();

    let covariates = match &config.covariates {
        Some(path) => {
            let x = io::load_covariate_file(path)?;
            check_rows("covariate rows", n, x.nrows())?;
            CovariateMatrix::with_covariates(&x)?
        }
        None => CovariateMatrix::intercept_only(n),
    };
    let test = match &config.phenotype {
        PhenotypeSource::Matrix { path, weights } => {
            let y = io::load_phenotype_file(path)?;
            check_rows("phenotype rows", n, y.nrows())?;
            let y = validate_phenotypes(y, weights.as_deref())?;
            AssociationTest::new(&y, &covariates, config.kernels.clone(), config.options.clone())?
        }
        PhenotypeSource::Similarity(path) => {
            let s: DMatrix<f64> = io::load_similarity_file(path)?;
            check_rows("similarity matrix size", n, s.nrows())?;
            let s = SimilarityMatrix::raw(s)?;
            AssociationTest::from_similarity(&s, &covariates, config.kernels.clone(), config.options.clone())?
        }
    };
    let genes = match &config.generanges {
        Some(path) => io::load_gene_ranges(path)?,
        None => Vec::new(),
    };
    let sets = group_variants(g.variants(), &genes, config.window_bp, config.anchor)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| GsuError::InvalidParameter(format!("thread pool: {e}")))?;
    let report = pool.install(|| scan_sets(&test, &g, &sets, config.maf_max, config.max_missing, config.alpha));
    if let Some(out) = &config.output {
        std::fs::write(out, report.to_tsv())?;
    }
    Ok(report)
}

fn check_rows(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GsuError::DimensionMismatch { what, expected, found })
    }
}
