//! Command-line front end.
//!
//! Exit codes: 0 on success (including `--help`), 1 on usage errors,
//! 2 on data errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{GsuError, Result};
use crate::kernels::{GenotypeKernel, KernelConfig, PhenotypeKernel};
use crate::nulldist::{tail_probability, PValueMethod, PValueOptions};
use crate::power::{asymptotic_power, null_quantile, required_sample_size, PowerParams};
use crate::scan::io::parse_real_list;
use crate::scan::{run_scan, PhenotypeSource, ScanConfig, WindowAnchor, DEFAULT_MAX_MISSING, DEFAULT_WINDOW_BP};
use crate::simgen::{run_experiment, ExperimentDesign, GenotypePanel, PanelConfig, Scenario, TestConfig, FIXTURE_SEED};

/// Permutations used by `--method permutation` when `--permutations` is absent.
pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Parser)]
#[command(name = "gsu", version, about = "Generalized similarity U association test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test every gene or window set of a genotype file against a phenotype.
    Scan(ScanArgs),
    /// Run a type-I-error / power simulation described by a TOML file.
    Simulate(SimulateArgs),
    /// Asymptotic power at a sample size, or the sample size for a target power.
    Power(PowerArgs),
    /// Upper tail of a weighted sum of independent chi-square(1) variables.
    Pvalue(PvalueArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenoKernelArg {
    Ibs,
    Wibs,
    Lk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhenoKernelArg {
    Laplacian,
    LaplacianCorr,
    Cross,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    Davies,
    Liu,
    Saddlepoint,
    Permutation,
}

/// Analytic methods only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TailMethodArg {
    Auto,
    Davies,
    Liu,
    Saddlepoint,
}

pub fn kernel_config(pheno: PhenoKernelArg, geno: GenoKernelArg, rank_transform: bool) -> KernelConfig {
    KernelConfig {
        phenotype: match pheno {
            PhenoKernelArg::Laplacian => PhenotypeKernel::Laplacian,
            PhenoKernelArg::LaplacianCorr => PhenotypeKernel::LaplacianCorrelated { gamma: None },
            PhenoKernelArg::Cross => PhenotypeKernel::CrossProduct { standardize: false },
            PhenoKernelArg::Gaussian => PhenotypeKernel::Gaussian,
        },
        genotype: match geno {
            GenoKernelArg::Ibs => GenotypeKernel::Ibs,
            GenoKernelArg::Wibs => GenotypeKernel::WeightedIbs,
            GenoKernelArg::Lk => GenotypeKernel::Lk,
        },
        rank_transform,
        ..KernelConfig::default()
    }
}

/// P-value options for `method`; a permutation method without an explicit
/// count uses [`DEFAULT_PERMUTATIONS`].
pub fn pvalue_options(
    method: MethodArg,
    permutations: Option<usize>,
    seed: u64,
) -> std::result::Result<PValueOptions, String> {
    let mut options = PValueOptions {
        seed,
        ..PValueOptions::default()
    };
    match method {
        MethodArg::Permutation => options.permutations = permutations.unwrap_or(DEFAULT_PERMUTATIONS),
        other => {
            if permutations.is_some() {
                return Err("--permutations requires --method permutation".into());
            }
            options.method = match other {
                MethodArg::Davies => PValueMethod::Davies,
                MethodArg::Liu => PValueMethod::Liu,
                MethodArg::Saddlepoint => PValueMethod::Saddlepoint,
                _ => PValueMethod::Auto,
            };
        }
    }
    Ok(options)
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("pheno_source").required(true).args(["phenotype", "similarity"])))]
struct ScanArgs {
    /// Genotype matrix (subjects by variants; 0/1/2 or `.` for missing).
    #[arg(long)]
    genotype: PathBuf,
    /// Variant sidecar `id chr pos` [default: <genotype>.variants].
    #[arg(long)]
    variants: Option<PathBuf>,
    /// Phenotype matrix (subjects by traits).
    #[arg(long)]
    phenotype: Option<PathBuf>,
    /// Precomputed raw n x n phenotype similarity, used instead of --phenotype.
    #[arg(long)]
    similarity: Option<PathBuf>,
    /// Comma-separated phenotype column weights.
    #[arg(long, requires = "phenotype")]
    pheno_weights: Option<String>,
    /// Covariate matrix (subjects by covariates, no intercept column).
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Gene ranges `gene chr start end` (inclusive).
    #[arg(long)]
    generanges: Option<PathBuf>,
    /// Width of the windows covering variants outside genes.
    #[arg(long, default_value_t = DEFAULT_WINDOW_BP)]
    window_bp: u64,
    /// Window origin: `min` (smallest ungrouped position per chromosome) or a base-pair position.
    #[arg(long, default_value = "min", value_parser = parse_anchor)]
    window_anchor: WindowAnchor,
    /// Keep only variants with MAF at or below this value.
    #[arg(long)]
    maf_max: Option<f64>,
    /// Drop variants whose missing rate exceeds this value.
    #[arg(long, default_value_t = DEFAULT_MAX_MISSING)]
    max_missing: f64,
    #[arg(long, value_enum, default_value_t = GenoKernelArg::Lk)]
    kernel_geno: GenoKernelArg,
    #[arg(long, value_enum, default_value_t = PhenoKernelArg::Laplacian)]
    kernel_pheno: PhenoKernelArg,
    /// Replace each phenotype column by its normalized ranks.
    #[arg(long)]
    rank_transform: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Number of permutations [default with --method permutation: 999].
    #[arg(long)]
    permutations: Option<usize>,
    /// Family-wise level; the Bonferroni threshold is alpha / number of sets.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_anchor(s: &str) -> std::result::Result<WindowAnchor, String> {
    if s == "min" {
        Ok(WindowAnchor::MinUngrouped)
    } else {
        s.parse::<u64>()
            .map(WindowAnchor::Fixed)
            .map_err(|_| format!("expected 'min' or a position, got '{s}'"))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving rates.tsv and pvalues.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("critical").required(true).args(["q", "coeffs"])))]
#[command(group(ArgGroup::new("target").required(true).args(["n", "target_power"])))]
struct PowerArgs {
    /// Mean of U under the alternative.
    #[arg(long, allow_negative_numbers = true)]
    mu_u: f64,
    /// First-order variance component under the alternative.
    #[arg(long)]
    zeta1: f64,
    /// Total kernel variance [default: zeta1].
    #[arg(long)]
    zeta0: Option<f64>,
    /// Critical value of the centered statistic.
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    /// Null mixture coefficients; the critical value is their level-alpha quantile.
    #[arg(long, allow_negative_numbers = true)]
    coeffs: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Sample size at which to evaluate power.
    #[arg(long)]
    n: Option<usize>,
    /// Report the smallest sample size reaching this power.
    #[arg(long)]
    target_power: Option<f64>,
}

#[derive(Debug, Args)]
struct PvalueArgs {
    /// Comma-separated mixture coefficients.
    #[arg(long, allow_negative_numbers = true)]
    coeffs: String,
    /// Observed value.
    #[arg(long, allow_negative_numbers = true)]
    q: f64,
    #[arg(long, value_enum, default_value_t = TailMethodArg::Auto)]
    method: TailMethodArg,
}

/// Six significant digits, shortest representation.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    rounded.to_string()
}

enum Failure {
    Usage(String),
    Data(GsuError),
}

impl From<GsuError> for Failure {
    fn from(e: GsuError) -> Self {
        Failure::Data(e)
    }
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn cli_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let outcome = match cli.command {
        Command::Scan(a) => scan(a, &mut stdout.lock()),
        Command::Simulate(a) => simulate(a, &mut stdout.lock()),
        Command::Power(a) => power(a, &mut stdout.lock()),
        Command::Pvalue(a) => pvalue(a, &mut stdout.lock()),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Data(GsuError::Io(e))
}

fn scan(a: ScanArgs, out: &mut impl Write) -> std::result::Result<(), Failure> {
    let options = pvalue_options(a.method, a.permutations, a.seed).map_err(Failure::Usage)?;
    let phenotype = match (a.phenotype, a.similarity) {
        (Some(path), None) => {
            let weights = a.pheno_weights.as_deref().map(parse_real_list).transpose()?;
            PhenotypeSource::Matrix { path, weights }
        }
        (None, Some(path)) => PhenotypeSource::Similarity(path),
        _ => {
            return Err(Failure::Usage(
                "exactly one of --phenotype or --similarity is required".into(),
            ))
        }
    };
    let mut config = ScanConfig::new(a.genotype, phenotype);
    config.variants = a.variants;
    config.covariates = a.covariates;
    config.generanges = a.generanges;
    config.window_bp = a.window_bp;
    config.anchor = a.window_anchor;
    config.maf_max = a.maf_max;
    config.max_missing = a.max_missing;
    config.kernels = kernel_config(a.kernel_pheno, a.kernel_geno, a.rank_transform);
    config.options = options;
    config.alpha = a.alpha;
    config.threads = a.threads;
    config.output = a.out.clone();
    if let Err(e) = config.validate() {
        return Err(Failure::Usage(e.to_string()));
    }
    let report = run_scan(&config)?;
    if a.out.is_none() {
        out.write_all(report.to_tsv().as_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// `[panel]` table of a simulation config.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelSpec {
    n_individuals: Option<usize>,
    n_variants: Option<usize>,
    region_length: Option<u64>,
    n_founders: Option<usize>,
    copy_prob: Option<f64>,
    switch_scale: Option<f64>,
    maf_min: Option<f64>,
    maf_max: Option<f64>,
    seed: Option<u64>,
}

/// One `[[tests]]` entry.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestSpec {
    name: String,
    #[serde(default = "default_pheno")]
    kernel_pheno: PhenoKernelArg,
    #[serde(default = "default_geno")]
    kernel_geno: GenoKernelArg,
    #[serde(default)]
    rank_transform: bool,
    #[serde(default = "default_method")]
    method: MethodArg,
    permutations: Option<usize>,
    #[serde(default = "default_true")]
    adjust: bool,
}

fn default_pheno() -> PhenoKernelArg {
    PhenoKernelArg::Laplacian
}
fn default_geno() -> GenoKernelArg {
    GenoKernelArg::Lk
}
fn default_method() -> MethodArg {
    MethodArg::Auto
}
fn default_true() -> bool {
    true
}

/// Simulation config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSpec {
    n: Option<usize>,
    replicates: Option<usize>,
    alpha: Option<Vec<f64>>,
    causal_fraction: Option<f64>,
    effect_mean: Option<f64>,
    effect_sd: Option<f64>,
    /// Sample-MAF threshold; `0` disables the filter.
    maf_filter: Option<f64>,
    segment_length: Option<u64>,
    seed: Option<u64>,
    scenarios: Vec<String>,
    confounding: Option<f64>,
    #[serde(default)]
    tests: Vec<TestSpec>,
    panel: Option<PanelSpec>,
}

fn simulate(a: SimulateArgs, out: &mut impl Write) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config).map_err(io_err)?;
    let cfg: SimulationSpec =
        toml::from_str(&text).map_err(|e| Failure::Data(GsuError::InvalidParameter(format!("config: {e}"))))?;

    let defaults = ExperimentDesign::default();
    let design = ExperimentDesign {
        n: cfg.n.unwrap_or(defaults.n),
        replicates: cfg.replicates.unwrap_or(defaults.replicates),
        alpha_levels: cfg.alpha.unwrap_or(defaults.alpha_levels),
        causal_fraction: cfg.causal_fraction.unwrap_or(defaults.causal_fraction),
        effect_mean: cfg.effect_mean.unwrap_or(defaults.effect_mean),
        effect_sd: cfg.effect_sd.unwrap_or(defaults.effect_sd),
        maf_filter: match cfg.maf_filter {
            Some(t) if t <= 0.0 => None,
            Some(t) => Some(t),
            None => defaults.maf_filter,
        },
        segment_length: cfg.segment_length.unwrap_or(defaults.segment_length),
        seed: cfg.seed.unwrap_or(defaults.seed),
    };
    let scenarios = cfg
        .scenarios
        .iter()
        .map(|s| {
            Scenario::parse(s).map(|mut sc| {
                sc.confounding = cfg.confounding;
                sc
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tests = if cfg.tests.is_empty() {
        vec![TestConfig::new("gsu", KernelConfig::default())]
    } else {
        cfg.tests
            .iter()
            .map(|t| {
                let mut c = TestConfig::new(&t.name, kernel_config(t.kernel_pheno, t.kernel_geno, t.rank_transform));
                c.options = pvalue_options(t.method, t.permutations, design.seed).map_err(Failure::Usage)?;
                c.adjust = t.adjust;
                Ok(c)
            })
            .collect::<std::result::Result<Vec<_>, Failure>>()?
    };
    let panel = match cfg.panel {
        None => GenotypePanel::fixture(),
        Some(p) => {
            let d = PanelConfig::default();
            let config = PanelConfig {
                n_individuals: p.n_individuals.unwrap_or(d.n_individuals),
                n_variants: p.n_variants.unwrap_or(d.n_variants),
                region_length: p.region_length.unwrap_or(d.region_length),
                n_founders: p.n_founders.unwrap_or(d.n_founders),
                copy_prob: p.copy_prob.unwrap_or(d.copy_prob),
                switch_scale: p.switch_scale.unwrap_or(d.switch_scale),
                maf_min: p.maf_min.unwrap_or(d.maf_min),
                maf_max: p.maf_max.unwrap_or(d.maf_max),
                ..d
            };
            GenotypePanel::generate(config, p.seed.unwrap_or(FIXTURE_SEED))?
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| Failure::Data(GsuError::InvalidParameter(format!("thread pool: {e}"))))?;
    let report = pool.install(|| run_experiment(&panel, &design, &scenarios, &tests))?;

    std::fs::create_dir_all(&a.out_dir).map_err(io_err)?;
    let rates = File::create(a.out_dir.join("rates.tsv")).map_err(io_err)?;
    report.write_rates_tsv(BufWriter::new(rates)).map_err(io_err)?;
    let pvals = File::create(a.out_dir.join("pvalues.tsv")).map_err(io_err)?;
    report.write_pvalues_tsv(BufWriter::new(pvals)).map_err(io_err)?;
    report.write_rates_tsv(out).map_err(io_err)?;
    Ok(())
}

fn power(a: PowerArgs, out: &mut impl Write) -> std::result::Result<(), Failure> {
    let q = match (a.q, &a.coeffs) {
        (Some(q), None) => q,
        (None, Some(c)) => null_quantile(&parse_real_list(c)?, a.alpha)?,
        _ => return Err(Failure::Usage("give exactly one of --q or --coeffs".into())),
    };
    let params = PowerParams::new(a.mu_u, a.zeta0.unwrap_or(a.zeta1), a.zeta1, a.alpha, q)?;
    match (a.n, a.target_power) {
        (Some(n), None) => writeln!(out, "{}", format_sig(asymptotic_power(n, &params)?)).map_err(io_err)?,
        (None, Some(beta)) => writeln!(out, "{}", required_sample_size(&params, beta)?).map_err(io_err)?,
        _ => return Err(Failure::Usage("give exactly one of --n or --target-power".into())),
    }
    Ok(())
}

fn pvalue(a: PvalueArgs, out: &mut impl Write) -> std::result::Result<(), Failure> {
    let coeffs = parse_real_list(&a.coeffs)?;
    let options = PValueOptions {
        method: match a.method {
            TailMethodArg::Auto => PValueMethod::Auto,
            TailMethodArg::Davies => PValueMethod::Davies,
            TailMethodArg::Liu => PValueMethod::Liu,
            TailMethodArg::Saddlepoint => PValueMethod::Saddlepoint,
        },
        ..PValueOptions::default()
    };
    let tail = tail_probability(&coeffs, a.q, &options)?;
    writeln!(out, "{}", format_sig(tail.p_value)).map_err(io_err)?;
    Ok(())
}
