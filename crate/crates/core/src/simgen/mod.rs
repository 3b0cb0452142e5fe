//! Phenotype simulation and replicate experiments on the synthetic panel.

pub mod panel;

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Cauchy, Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{GsuError, Result};
use crate::kernels::KernelConfig;
use crate::model::{validate_phenotypes, CovariateMatrix, VariantSet};
use crate::nulldist::{replicate_rng, AssociationTest, PValueOptions};

pub use panel::{GenotypePanel, PanelConfig, Segment, FIXTURE_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Binary,
    Poisson,
    Gaussian,
    Cauchy,
}

impl Family {
    pub fn code(self) -> char {
        match self {
            Family::Binary => 'B',
            Family::Poisson => 'P',
            Family::Gaussian => 'G',
            Family::Cauchy => 'C',
        }
    }

    pub fn from_code(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'B' => Ok(Family::Binary),
            'P' => Ok(Family::Poisson),
            'G' => Ok(Family::Gaussian),
            'C' => Ok(Family::Cauchy),
            other => Err(GsuError::InvalidParameter(format!(
                "unknown phenotype family '{other}'"
            ))),
        }
    }

    /// Parse a family string such as `"BCG"`, one letter per phenotype.
    pub fn parse_list(s: &str) -> Result<Vec<Family>> {
        let families: Vec<Family> = s.chars().map(Family::from_code).collect::<Result<_>>()?;
        if families.is_empty() {
            return Err(GsuError::InvalidParameter("empty family list".into()));
        }
        Ok(families)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Generative model of one phenotype given genotypes.
#[derive(Debug, Clone)]
pub struct PhenoModel {
    pub family: Family,
    /// Subject offsets added to the linear predictor; empty means zero.
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub cauchy_scale: f64,
}

impl PhenoModel {
    pub fn new(family: Family, beta: Vec<f64>) -> Self {
        PhenoModel {
            family,
            mu: Vec::new(),
            beta,
            sigma: 1.0,
            cauchy_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Gaussian if !(self.sigma > 0.0) => {
                Err(GsuError::InvalidParameter("gaussian sigma must be positive".into()))
            }
            Family::Cauchy if !(self.cauchy_scale > 0.0) => {
                Err(GsuError::InvalidParameter("cauchy scale must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `m` effects drawn i.i.d. uniform with mean `mean` and sd `sd`.
pub fn sample_effects<R: Rng + ?Sized>(m: usize, mean: f64, sd: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sd >= 0.0) || !mean.is_finite() {
        return Err(GsuError::InvalidParameter("effect sd must be non-negative".into()));
    }
    if sd == 0.0 {
        return Ok(vec![mean; m]);
    }
    let half = 3f64.sqrt() * sd;
    Ok((0..m).map(|_| rng.gen_range(mean - half..=mean + half)).collect())
}

/// One phenotype value per row of `g` (subjects by effect variants).
pub fn simulate_phenotype<R: Rng + ?Sized>(g: &DMatrix<f64>, model: &PhenoModel, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    if g.ncols() != model.beta.len() {
        return Err(GsuError::DimensionMismatch {
            what: "effect vector length",
            expected: g.ncols(),
            found: model.beta.len(),
        });
    }
    if !model.mu.is_empty() && model.mu.len() != g.nrows() {
        return Err(GsuError::DimensionMismatch {
            what: "offset vector length",
            expected: g.nrows(),
            found: model.mu.len(),
        });
    }
    let mut out = Vec::with_capacity(g.nrows());
    for i in 0..g.nrows() {
        let offset = model.mu.get(i).copied().unwrap_or(0.0);
        let eta = offset + (0..g.ncols()).map(|m| g[(i, m)] * model.beta[m]).sum::<f64>();
        let y = match model.family {
            Family::Binary => {
                let p = 1.0 / (1.0 + (-eta).exp());
                f64::from(u8::from(Bernoulli::new(p).unwrap().sample(rng)))
            }
            Family::Poisson => {
                let rate = eta.exp();
                if rate <= 0.0 {
                    0.0
                } else {
                    Poisson::new(rate)
                        .map_err(|e| GsuError::InvalidParameter(format!("poisson rate {rate}: {e}")))?
                        .sample(rng)
                }
            }
            Family::Gaussian => eta + Normal::new(0.0, model.sigma).unwrap().sample(rng),
            Family::Cauchy => Cauchy::new(eta, model.cauchy_scale).unwrap().sample(rng),
        };
        out.push(y);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentDesign {
    pub n: usize,
    pub replicates: usize,
    pub alpha_levels: Vec<f64>,
    pub causal_fraction: f64,
    pub effect_mean: f64,
    pub effect_sd: f64,
    pub maf_filter: Option<f64>,
    pub segment_length: u64,
    pub seed: u64,
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        ExperimentDesign {
            n: 50,
            replicates: 1000,
            alpha_levels: vec![0.05],
            causal_fraction: 0.0,
            effect_mean: 0.0,
            effect_sd: 0.0,
            maf_filter: Some(0.05),
            segment_length: 30_000,
            seed: 1,
        }
    }
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(GsuError::InvalidParameter("at least one replicate required".into()));
        }
        if !(0.0..=1.0).contains(&self.causal_fraction) {
            return Err(GsuError::InvalidParameter("causal fraction must lie in [0, 1]".into()));
        }
        if self.n < 4 {
            return Err(GsuError::SampleTooSmall { n: self.n, min: 4 });
        }
        if self.alpha_levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(GsuError::InvalidParameter("alpha levels must lie in (0, 1)".into()));
        }
        if !(self.effect_sd >= 0.0) {
            return Err(GsuError::InvalidParameter("effect sd must be non-negative".into()));
        }
        Ok(())
    }
}

/// Phenotype families of one simulated scenario plus an optional
/// confounder: a covariate correlated with the segment burden that also
/// shifts every linear predictor by `strength` per unit.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub families: Vec<Family>,
    pub confounding: Option<f64>,
}

impl Scenario {
    pub fn new(families: Vec<Family>) -> Self {
        let name = families.iter().map(|f| f.code()).collect();
        Scenario {
            name,
            families,
            confounding: None,
        }
    }

    pub fn parse(codes: &str) -> Result<Self> {
        Ok(Self::new(Family::parse_list(codes)?))
    }
}

/// Named association test applied to every replicate.
#[derive(Debug, Clone)]
pub struct TestConfig {
    pub name: String,
    pub kernels: KernelConfig,
    pub options: PValueOptions,
    /// Whether a scenario's confounder enters the test as a covariate.
    pub adjust: bool,
}

impl TestConfig {
    pub fn new(name: impl Into<String>, kernels: KernelConfig) -> Self {
        TestConfig {
            name: name.into(),
            kernels,
            options: PValueOptions::default(),
            adjust: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRow {
    pub scenario: String,
    pub test: String,
    pub alpha: f64,
    pub rejections: usize,
    pub valid: usize,
    pub failures: usize,
    pub rate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueRecord {
    pub scenario: String,
    pub test: String,
    pub replicate: usize,
    /// `None` when the replicate failed.
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<RejectionRow>,
    pub pvalues: Vec<PValueRecord>,
}

impl ExperimentReport {
    pub fn row(&self, scenario: &str, test: &str, alpha: f64) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.test == test && r.alpha == alpha)
    }

    pub fn p_values(&self, scenario: &str, test: &str) -> Vec<f64> {
        self.pvalues
            .iter()
            .filter(|r| r.scenario == scenario && r.test == test)
            .filter_map(|r| r.p_value)
            .collect()
    }

    pub fn write_rates_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario\ttest\talpha\trejections\tvalid\tfailures\trate\tstd_error")?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.scenario, r.test, r.alpha, r.rejections, r.valid, r.failures, r.rate, r.std_error
            )?;
        }
        Ok(())
    }

    pub fn write_pvalues_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario\ttest\treplicate\tp_value\tstatistic")?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for r in &self.pvalues {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                r.scenario,
                r.test,
                r.replicate,
                fmt(r.p_value),
                fmt(r.statistic)
            )?;
        }
        Ok(())
    }
}

/// Simulated data of one replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub segment: Segment,
    pub causal: Vec<usize>,
    pub phenotypes: DMatrix<f64>,
    pub covariates: Option<DMatrix<f64>>,
}

fn scenario_seed(seed: u64, scenario: usize) -> u64 {
    seed.wrapping_add((scenario as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Draw segment, causal variants, effects and phenotypes for one replicate.
pub fn simulate_replicate(
    panel: &GenotypePanel,
    design: &ExperimentDesign,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
) -> Result<Replicate> {
    let segment = panel.sample_segment(design.n, design.segment_length, design.maf_filter, rng)?;
    let g = segment.genotypes.values();
    let m = g.ncols();
    let n_causal = if design.causal_fraction > 0.0 {
        ((design.causal_fraction * m as f64).round() as usize).clamp(1, m)
    } else {
        0
    };
    let mut causal = sample(rng, m, n_causal).into_vec();
    causal.sort_unstable();
    let g_causal = DMatrix::from_fn(design.n, n_causal, |i, j| g[(i, causal[j])]);

    let confounder = scenario.confounding.map(|strength| {
        let burden: Vec<f64> = (0..design.n).map(|i| g.row(i).sum()).collect();
        let mean = burden.iter().sum::<f64>() / design.n as f64;
        let sd = (burden.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / design.n as f64).sqrt();
        let z: Vec<f64> = burden
            .iter()
            .map(|b| {
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                let std = if sd > 0.0 { (b - mean) / sd } else { 0.0 };
                0.7 * std + 0.5 * noise
            })
            .collect();
        (strength, z)
    });

    let mut phenotypes = DMatrix::zeros(design.n, scenario.families.len());
    for (col, family) in scenario.families.iter().enumerate() {
        let beta = sample_effects(n_causal, design.effect_mean, design.effect_sd, rng)?;
        let mut model = PhenoModel::new(*family, beta);
        if let Some((strength, z)) = &confounder {
            model.mu = z.iter().map(|v| strength * v).collect();
        }
        let y = simulate_phenotype(&g_causal, &model, rng)?;
        phenotypes.set_column(col, &nalgebra::DVector::from_vec(y));
    }
    let covariates = confounder.map(|(_, z)| DMatrix::from_column_slice(design.n, 1, &z));
    Ok(Replicate {
        segment,
        causal,
        phenotypes,
        covariates,
    })
}

/// `(p-value, statistic)` of one test on one replicate, or the error text.
pub type TestOutcome = std::result::Result<(f64, f64), String>;

/// Apply every test in `tests` to one replicate.
pub fn test_replicate(replicate: &Replicate, tests: &[TestConfig]) -> Vec<TestOutcome> {
    let n = replicate.phenotypes.nrows();
    let y = match validate_phenotypes(replicate.phenotypes.clone(), None) {
        Ok(y) => y,
        Err(e) => return tests.iter().map(|_| Err(e.to_string())).collect(),
    };
    let set = VariantSet::all("segment", &replicate.segment.genotypes);
    tests
        .iter()
        .map(|t| {
            let run = || -> Result<(f64, f64)> {
                let x = match (&replicate.covariates, t.adjust) {
                    (Some(c), true) => CovariateMatrix::with_covariates(c)?,
                    _ => CovariateMatrix::intercept_only(n),
                };
                let test = AssociationTest::new(&y, &x, t.kernels.clone(), t.options.clone())?;
                let r = test.test_set(&replicate.segment.genotypes, &set)?;
                Ok((r.p_value, r.statistic))
            };
            run().map_err(|e| e.to_string())
        })
        .collect()
}

/// Run `design.replicates` replicates of every scenario and tabulate
/// rejection rates (`p <= alpha`) for every test and alpha level.
pub fn run_experiment(
    panel: &GenotypePanel,
    design: &ExperimentDesign,
    scenarios: &[Scenario],
    tests: &[TestConfig],
) -> Result<ExperimentReport> {
    design.validate()?;
    if tests.is_empty() || scenarios.is_empty() {
        return Err(GsuError::InvalidParameter(
            "at least one scenario and one test required".into(),
        ));
    }
    for t in tests {
        t.options.validate()?;
    }
    let mut report = ExperimentReport::default();
    for (si, scenario) in scenarios.iter().enumerate() {
        let seed = scenario_seed(design.seed, si);
        let outcomes: Vec<Vec<TestOutcome>> = (0..design.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, r as u64);
                match simulate_replicate(panel, design, scenario, &mut rng) {
                    Ok(rep) => test_replicate(&rep, tests),
                    Err(e) => tests.iter().map(|_| Err(e.to_string())).collect(),
                }
            })
            .collect();
        for (ti, test) in tests.iter().enumerate() {
            let mut ps = Vec::with_capacity(design.replicates);
            for (r, out) in outcomes.iter().enumerate() {
                let (p, stat) = match &out[ti] {
                    Ok((p, s)) => (Some(*p), Some(*s)),
                    Err(_) => (None, None),
                };
                report.pvalues.push(PValueRecord {
                    scenario: scenario.name.clone(),
                    test: test.name.clone(),
                    replicate: r,
                    p_value: p,
                    statistic: stat,
                });
                if let Some(p) = p {
                    ps.push(p);
                }
            }
            let valid = ps.len();
            for &alpha in &design.alpha_levels {
                let rejections = ps.iter().filter(|&&p| p <= alpha).count();
                let rate = if valid > 0 {
                    rejections as f64 / valid as f64
                } else {
                    f64::NAN
                };
                report.rows.push(RejectionRow {
                    scenario: scenario.name.clone(),
                    test: test.name.clone(),
                    alpha,
                    rejections,
                    valid,
                    failures: design.replicates - valid,
                    rate,
                    std_error: (rate * (1.0 - rate) / valid as f64).sqrt(),
                });
            }
        }
    }
    Ok(report)
}
