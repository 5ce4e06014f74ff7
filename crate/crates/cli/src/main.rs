//! `qexp`: build random quantum channels from variance profiles and measure
//! their spectral gaps.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qexp_core::channel::{
    build_ensemble, compute_sigma, load_ensemble, renormalize_with_sigma, save_ensemble, tp_defect, Normalization, TransferOperator,
};
use qexp_core::harness::{
    fit_scaling, load_report, median, run_experiment, DegreeSpec, ExperimentConfig, ExperimentRecord, FitField, ProfileModel,
};
use qexp_core::profile::{load_profile, permutation_sum_profile, uniform_profile, validate_profile_with, ValidationReport};
use qexp_core::sampler::{DistributionKind, EntryDistribution};
use qexp_core::spectral::{
    dense_svd_oracle, leading_eigen_power, top_singular_pair, top_singular_values, von_neumann_entropy, SolverOptions, SpectralReport,
};
use qexp_core::{Error, KrausEnsemble64, SeedSpec, VarianceProfile64};

#[derive(Parser)]
#[command(name = "qexp", version, about = "Random quantum channels from classical expander profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a variance profile and write it as a triplet file.
    GenProfile(GenProfileArgs),
    /// Check a profile file and print a JSON report.
    ValidateProfile(ValidateArgs),
    /// Sample a Kraus ensemble and save it to a directory.
    Build(BuildArgs),
    /// Leading singular values of a saved ensemble's transfer operator.
    Spectrum(SpectrumArgs),
    /// Run a seeded sweep from a JSON config.
    Experiment(ExperimentArgs),
    /// Fit `median(field) ~ C d^α` to a CSV or JSON report.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenModel {
    Uniform,
    PermSum,
    File,
}

#[derive(Args)]
struct GenProfileArgs {
    #[arg(long, value_enum)]
    model: GenModel,
    #[arg(long)]
    n: Option<usize>,
    /// Number of permutations (perm-sum).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u32,
    /// Source file for `--model file`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_prime: f64,
}

#[derive(Args)]
struct BuildArgs {
    /// Profile triplet file.
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value = "complex-gaussian")]
    dist: DistributionKind,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u32,
    #[arg(long)]
    tp_renormalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// Analyse `Y - E(Y)` instead of the transfer operator (raw ensembles).
    #[arg(long, requires = "profile")]
    centered: bool,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Number of singular values to extract.
    #[arg(long, default_value_t = 2)]
    nev: usize,
    /// Compare with the dense SVD (n <= 12).
    #[arg(long)]
    oracle: bool,
    /// Also compute λ₁ and the fixed-point entropy by power iteration.
    #[arg(long)]
    fixed_point: bool,
    /// Report entropy in bits instead of nats.
    #[arg(long)]
    log2: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', conflicts_with = "d_rule")]
    d: Option<Vec<usize>>,
    /// `c,gamma` for `d = ceil(c (ln n)^gamma)`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    d_rule: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    dist: Option<DistributionKind>,
    #[arg(long, value_enum)]
    profile_model: Option<ConfigModel>,
    #[arg(long)]
    profile_degree: Option<usize>,
    #[arg(long)]
    profile_path: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tp_renormalize: Option<bool>,
    #[arg(long)]
    centered: Option<bool>,
    #[arg(long)]
    oracle: Option<bool>,
    #[arg(long)]
    fixed_point: Option<bool>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigModel {
    Uniform,
    PermSum,
    File,
}

#[derive(Args)]
struct FitArgs {
    /// CSV or JSON report.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "s2")]
    field: FitField,
    #[arg(long)]
    n: Option<usize>,
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Failure that should exit with the validation code.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn gen_profile(a: GenProfileArgs) -> anyhow::Result<()> {
    let need_n = || a.n.ok_or_else(|| Invalid("--n is required for this model".into()));
    let p: VarianceProfile64 = match a.model {
        GenModel::Uniform => uniform_profile(need_n()?)?,
        GenModel::PermSum => {
            let d = a.d.ok_or_else(|| Invalid("--d is required for perm-sum".into()))?;
            permutation_sum_profile(need_n()?, d, SeedSpec::new(a.seed).with_trial(a.trial))?
        }
        GenModel::File => {
            let src = a
                .input
                .as_ref()
                .ok_or_else(|| Invalid("--in is required for --model file".into()))?;
            let p: VarianceProfile64 = load_profile(src)?;
            if let Some(n) = a.n.filter(|&n| n != p.n()) {
                bail!(Invalid(format!("--n {n} does not match the file (n = {})", p.n())));
            }
            p
        }
    };
    p.save(&a.out)?;
    print_json(&validate_profile_with(&p, 0.0, 1.0))
}

fn validate(a: ValidateArgs) -> anyhow::Result<()> {
    let p: VarianceProfile64 = load_profile(&a.input)?;
    let report: ValidationReport = validate_profile_with(&p, a.beta, a.c_prime);
    print_json(&report)?;
    if !report.valid {
        bail!(Invalid("profile is not doubly sub-stochastic".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct BuildSummary {
    n: usize,
    d: usize,
    normalization: &'static str,
    sparse: bool,
    sigma_deviation: f64,
    sigma_min_eig: f64,
    sigma_max_eig: f64,
    tp_defect: f64,
    out: PathBuf,
}

fn build(a: BuildArgs) -> anyhow::Result<()> {
    let p: VarianceProfile64 = load_profile(&a.profile)?;
    let seed = SeedSpec::new(a.seed).with_trial(a.trial);
    let raw = build_ensemble(&p, &EntryDistribution::new(a.dist), a.d, seed)?;
    let sigma = compute_sigma(&raw)?;
    let e = if a.tp_renormalize {
        renormalize_with_sigma(&raw, &sigma.sigma)?
    } else {
        raw
    };
    save_ensemble(&e, &a.out)?;
    print_json(&BuildSummary {
        n: e.n(),
        d: e.d(),
        normalization: e.normalization().name(),
        sparse: e.is_sparse(),
        sigma_deviation: sigma.deviation,
        sigma_min_eig: sigma.min_eig,
        sigma_max_eig: sigma.max_eig,
        tp_defect: tp_defect(&e)?,
        out: a.out,
    })
}

#[derive(Serialize)]
struct OracleCheck {
    singular_values: Vec<f64>,
    max_abs_diff: f64,
}

#[derive(Serialize)]
struct FixedPointSummary {
    lambda1: f64,
    entropy: f64,
    entropy_unit: &'static str,
    iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct SpectrumOutput {
    mode: &'static str,
    n: usize,
    d: usize,
    normalization: &'static str,
    #[serde(flatten)]
    report: SpectralReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixed_point: Option<FixedPointSummary>,
}

fn spectrum(a: SpectrumArgs) -> anyhow::Result<ExitCode> {
    let e: KrausEnsemble64 = load_ensemble(&a.ensemble)?;
    let profile: Option<VarianceProfile64> = a.profile.as_ref().map(load_profile).transpose()?;
    let opts = SolverOptions {
        tol: a.tol,
        max_iters: a.max_iters,
        nev: a.nev,
        ..SolverOptions::default()
    };
    let op = if a.centered {
        if e.normalization() != Normalization::RawOverSqrtD {
            bail!(Invalid("--centered needs an ensemble built without --tp-renormalize".into()));
        }
        TransferOperator::centered(&e, profile.as_ref().expect("clap enforces --profile"))?
    } else {
        TransferOperator::forward(&e)
    };
    let report = if a.nev >= 2 {
        top_singular_pair(&op, &opts)?
    } else {
        top_singular_values(&op, &opts)?
    };
    let oracle = if a.oracle {
        let sv = dense_svd_oracle(&op)?;
        let max_abs_diff = report
            .singular_values
            .iter()
            .zip(&sv)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Some(OracleCheck {
            singular_values: sv,
            max_abs_diff,
        })
    } else {
        None
    };
    let fixed_point = if a.fixed_point && !a.centered {
        let fp = leading_eigen_power(&op, a.tol.max(1e-12), a.max_iters.max(1000))?;
        let nats = von_neumann_entropy(&fp.state);
        Some(FixedPointSummary {
            lambda1: fp.lambda1,
            entropy: if a.log2 { nats / std::f64::consts::LN_2 } else { nats },
            entropy_unit: if a.log2 { "bits" } else { "nats" },
            iterations: fp.iterations,
            residual: fp.residual,
        })
    } else {
        None
    };
    let converged = report.converged;
    print_json(&SpectrumOutput {
        mode: if a.centered { "centered" } else { "forward" },
        n: e.n(),
        d: e.d(),
        normalization: e.normalization().name(),
        report: report.with_degree(e.d()),
        oracle,
        fixed_point,
    })?;
    if !converged {
        eprintln!("error: spectral solver did not converge");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment_config(a: &ExperimentArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &a.n {
        cfg.n = n.clone();
    }
    if let Some(d) = &a.d {
        cfg.d = DegreeSpec::List(d.clone());
    }
    if let Some(rule) = &a.d_rule {
        cfg.d = DegreeSpec::Rule {
            c: rule[0],
            gamma: rule[1],
        };
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { cfg.$field = v; } )* };
    }
    set!(trials, seed, tol, max_iters, tp_renormalize, centered, oracle, fixed_point);
    if let Some(v) = a.dist {
        cfg.distribution = v;
    }
    if let Some(m) = a.profile_model {
        cfg.profile.model = match m {
            ConfigModel::Uniform => ProfileModel::Uniform,
            ConfigModel::PermSum => ProfileModel::PermSum,
            ConfigModel::File => ProfileModel::File,
        };
    }
    if a.profile_degree.is_some() {
        cfg.profile.degree = a.profile_degree;
    }
    if a.profile_path.is_some() {
        cfg.profile.path = a.profile_path.clone();
    }
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CellSummary {
    n: usize,
    d: usize,
    trials: usize,
    failed: usize,
    median_sqrt_d_times_s2: Option<f64>,
    median_sigma_deviation: Option<f64>,
}

#[derive(Serialize)]
struct ExperimentSummary {
    records: usize,
    failed: usize,
    unconverged: usize,
    workers: usize,
    output: Option<PathBuf>,
    cells: Vec<CellSummary>,
}

fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    for chunk in records.chunk_by(|a, b| (a.n, a.d) == (b.n, b.d)) {
        let ok = || chunk.iter().filter(|r| r.error.is_none());
        let mut gaps: Vec<f64> = ok()
            .filter(|r| r.spectral_converged == Some(true))
            .filter_map(|r| r.sqrt_d_times_s2)
            .collect();
        let mut devs: Vec<f64> = ok().filter_map(|r| r.sigma_deviation).collect();
        out.push(CellSummary {
            n: chunk[0].n,
            d: chunk[0].d,
            trials: chunk.len(),
            failed: chunk.len() - ok().count(),
            median_sqrt_d_times_s2: median(&mut gaps),
            median_sigma_deviation: median(&mut devs),
        });
    }
    out
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let cfg = experiment_config(&a)?;
    let outcome = run_experiment(&cfg)?;
    print_json(&ExperimentSummary {
        records: outcome.manifest.records,
        failed: outcome.manifest.failed,
        unconverged: outcome.manifest.unconverged,
        workers: outcome.manifest.workers,
        output: cfg.output.clone(),
        cells: summarize(&outcome.records),
    })
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let records = load_report(&a.input)?;
    print_json(&fit_scaling(&records, a.field, a.n)?)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_validation() { 1 } else { 2 };
        }
        if cause.downcast_ref::<Invalid>().is_some() {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenProfile(a) => gen_profile(a)?,
        Command::ValidateProfile(a) => validate(a)?,
        Command::Build(a) => build(a)?,
        Command::Spectrum(a) => return spectrum(a),
        Command::Experiment(a) => experiment(a)?,
        Command::Fit(a) => fit(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
