use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProfileModel};
use super::record::{emit_report, write_atomic, ExperimentRecord, ReportFormat, COLUMNS};
use crate::channel::{build_ensemble, compute_sigma_with, kraus_rank, renormalize_with_sigma, tp_defect, unital_defect, TransferOperator};
use crate::error::{Error, Result};
use crate::profile::{load_profile, permutation_sum_profile, profile_s2, uniform_profile, VarianceProfile};
use crate::rng::SeedSpec;
use crate::sampler::EntryDistribution;
use crate::spectral::{dense_svd_oracle, leading_eigen_power, top_singular_pair, top_singular_values, von_neumann_entropy, SolverOptions};

pub const RECORDS_CSV: &str = "records.csv";
pub const RECORDS_JSON: &str = "records.json";
/// Append-only log, one JSON record per line in completion order.
pub const RECORDS_LOG: &str = "records.jsonl";
pub const TIMINGS_JSON: &str = "timings.json";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Wall time per pipeline phase of one trial, kept out of the records so
/// that reruns produce identical reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialTiming {
    pub n: usize,
    pub d: usize,
    pub trial: u32,
    pub phases: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub records: usize,
    pub failed: usize,
    pub unconverged: usize,
    pub workers: usize,
    pub wall_seconds: f64,
    pub files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// Sorted by `(n, d, trial)`.
    pub records: Vec<ExperimentRecord>,
    pub timings: Vec<TrialTiming>,
    pub manifest: RunManifest,
}

struct Task {
    n: usize,
    d: usize,
    trial: u32,
    stream_trial: u32,
}

struct Phases(BTreeMap<String, f64>, Instant);

impl Phases {
    fn new() -> Self {
        Self(BTreeMap::new(), Instant::now())
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.0.insert(name.to_string(), (now - self.1).as_secs_f64());
        self.1 = now;
    }
}

fn solver_options(cfg: &ExperimentConfig, stream_trial: u32) -> SolverOptions {
    SolverOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        nev: 2,
        seed: cfg.seed ^ (u64::from(stream_trial) << 32 | 0x5eed),
        max_basis: cfg.max_basis,
    }
}

fn trial_profile(cfg: &ExperimentConfig, file: Option<&VarianceProfile<f64>>, task: &Task, seed: SeedSpec) -> Result<VarianceProfile<f64>> {
    match cfg.profile.model {
        ProfileModel::Uniform => uniform_profile(task.n),
        ProfileModel::PermSum => permutation_sum_profile(task.n, cfg.profile.degree.unwrap_or(task.d), seed),
        ProfileModel::File => Ok(file.expect("file profile loaded").clone()),
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    file: Option<&VarianceProfile<f64>>,
    task: &Task,
    rec: &mut ExperimentRecord,
    phases: &mut Phases,
) -> Result<()> {
    let seed = SeedSpec::new(cfg.seed).with_trial(task.stream_trial);
    let opts = solver_options(cfg, task.stream_trial);
    let profile = trial_profile(cfg, file, task, seed)?;
    rec.profile = profile.label().to_string();
    if profile.n() >= 2 {
        // A profile solver failure is not fatal for the channel pipeline.
        rec.profile_s2 = profile_s2(&profile).ok().map(|(_, s2)| s2);
    }
    phases.mark("profile");

    let dist = EntryDistribution::new(cfg.distribution);
    let raw = build_ensemble(&profile, &dist, task.d, seed)?;
    phases.mark("sample");

    let sigma = compute_sigma_with(&raw, false)?;
    rec.sigma_deviation = Some(sigma.deviation);
    rec.sigma_min_eig = Some(sigma.min_eig);
    phases.mark("sigma");

    if cfg.centered {
        let op = TransferOperator::centered(&raw, &profile)?;
        let r = top_singular_values(&op, &SolverOptions { nev: 1, ..opts.clone() })?;
        rec.centered_norm = Some(r.s1);
        rec.centered_converged = Some(r.converged);
        phases.mark("centered");
    }

    let channel = if cfg.tp_renormalize {
        let e = renormalize_with_sigma(&raw, &sigma.sigma)?;
        drop(raw);
        e
    } else {
        raw
    };
    phases.mark("renormalize");

    let op = TransferOperator::forward(&channel);
    let r = top_singular_pair(&op, &opts)?;
    rec.s1 = Some(r.s1);
    rec.s2 = Some(r.s2);
    rec.sqrt_d_times_s2 = Some((task.d as f64).sqrt() * r.s2);
    rec.spectral_converged = Some(r.converged);
    rec.spectral_iterations = Some(r.iterations);
    rec.spectral_residual = Some(r.residuals.iter().fold(0.0, |m: f64, &v| m.max(v)));
    phases.mark("spectrum");

    rec.tp_defect = Some(tp_defect(&channel)?);
    rec.unital_defect = Some(unital_defect(&channel)?);
    phases.mark("defects");

    rec.kraus_rank = Some(kraus_rank(&channel)?);
    phases.mark("kraus_rank");

    if cfg.fixed_point {
        match leading_eigen_power(&op, cfg.fixed_point_tol, cfg.fixed_point_max_iters) {
            Ok(fp) => {
                rec.lambda1 = Some(fp.lambda1);
                rec.fixed_point_entropy = Some(von_neumann_entropy(&fp.state));
                rec.fixed_point_converged = Some(true);
            }
            Err(Error::ConvergenceFailure { .. }) => rec.fixed_point_converged = Some(false),
            Err(e) => return Err(e),
        }
        phases.mark("fixed_point");
    }

    if cfg.oracle {
        let sv = dense_svd_oracle(&op)?;
        rec.oracle_s1 = sv.first().copied();
        rec.oracle_s2 = sv.get(1).copied();
        phases.mark("oracle");
    }
    Ok(())
}

fn load_file_profile(cfg: &ExperimentConfig) -> Result<Option<VarianceProfile<f64>>> {
    if cfg.profile.model != ProfileModel::File {
        return Ok(None);
    }
    let path = cfg.profile.path.as_ref().expect("validated");
    let p: VarianceProfile<f64> = load_profile(path)?;
    if let Some(&n) = cfg.n.iter().find(|&&n| n != p.n()) {
        return Err(Error::InvalidConfig(format!(
            "n grid contains {n} but the profile file has n = {}",
            p.n()
        )));
    }
    Ok(Some(p))
}

fn open_log(dir: &Path) -> Result<std::fs::File> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RECORDS_LOG);
    std::fs::File::create(&path).map_err(|e| Error::io(&path, e))
}

/// Runs every `(n, d, trial)` of the sweep.
///
/// Trials run concurrently on up to [`ExperimentConfig::effective_workers`]
/// threads. Each trial draws from its own counter-based streams, so the
/// records do not depend on scheduling. A failing trial is recorded with its
/// error message and the sweep continues. When `output` is set, records are
/// appended to `records.jsonl` as they finish and the sorted reports,
/// timings and manifest are written atomically at the end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let file = load_file_profile(cfg)?;
    let trials = u32::try_from(cfg.trials).map_err(|_| Error::InvalidConfig("too many trials".into()))?;
    let tasks: Vec<Task> = cfg
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(c, (n, d))| {
            (0..trials).map(move |t| Task {
                n,
                d,
                trial: t,
                stream_trial: c as u32 * trials + t,
            })
        })
        .collect();
    let workers = cfg.effective_workers();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let (tx, rx) = mpsc::channel::<String>();
    let writer = match &cfg.output {
        Some(dir) => {
            let mut log = open_log(dir)?;
            let path = dir.join(RECORDS_LOG);
            Some(std::thread::spawn(move || -> Result<()> {
                for line in rx {
                    writeln!(log, "{line}").and_then(|_| log.flush()).map_err(|e| Error::io(&path, e))?;
                }
                Ok(())
            }))
        }
        None => {
            drop(rx);
            None
        }
    };

    let results: Vec<(ExperimentRecord, TrialTiming)> = pool.install(|| {
        tasks
            .par_iter()
            .map_with(tx, |tx, task| {
                let mut rec = ExperimentRecord::new(
                    task.n,
                    task.d,
                    task.trial,
                    task.stream_trial,
                    cfg.seed,
                    String::new(),
                    cfg.distribution,
                    cfg.tp_renormalize,
                );
                let mut phases = Phases::new();
                if let Err(e) = run_trial(cfg, file.as_ref(), task, &mut rec, &mut phases) {
                    rec.error = Some(e.to_string());
                }
                // The log is best effort while the sweep runs; a closed
                // channel only means no output directory.
                let _ = tx.send(rec.to_json_line());
                let timing = TrialTiming {
                    n: task.n,
                    d: task.d,
                    trial: task.trial,
                    phases: phases.0,
                };
                (rec, timing)
            })
            .collect()
    });
    if let Some(w) = writer {
        w.join().expect("log writer panicked")?;
    }

    let (mut records, mut timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    records.sort_by_key(ExperimentRecord::key);
    timings.sort_by_key(|t: &TrialTiming| (t.n, t.d, t.trial));
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let unconverged = records
        .iter()
        .filter(|r| r.spectral_converged == Some(false) || r.centered_converged == Some(false) || r.fixed_point_converged == Some(false))
        .count();
    let mut manifest = RunManifest {
        format_version: 1,
        config: cfg.clone(),
        columns: COLUMNS.iter().map(|s| s.to_string()).collect(),
        records: records.len(),
        failed,
        unconverged,
        workers,
        wall_seconds: started.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    if let Some(dir) = &cfg.output {
        write_outputs(dir, &records, &timings, &mut manifest)?;
    }
    Ok(ExperimentOutcome {
        records,
        timings,
        manifest,
    })
}

fn write_outputs(dir: &Path, records: &[ExperimentRecord], timings: &[TrialTiming], manifest: &mut RunManifest) -> Result<()> {
    emit_report(records, dir.join(RECORDS_CSV), ReportFormat::Csv)?;
    emit_report(records, dir.join(RECORDS_JSON), ReportFormat::Json)?;
    write_atomic(&dir.join(TIMINGS_JSON), pretty(&timings).as_bytes())?;
    manifest.files = [RECORDS_CSV, RECORDS_JSON, RECORDS_LOG, TIMINGS_JSON]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_atomic(&dir.join(MANIFEST_JSON), pretty(&*manifest).as_bytes())
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Output directory paths of a finished run.
pub fn report_paths(dir: &Path) -> [PathBuf; 2] {
    [dir.join(RECORDS_CSV), dir.join(RECORDS_JSON)]
}
