use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::DistributionKind;
use crate::spectral::MAX_ORACLE_DIM;

/// Kraus counts per `n`: an explicit list, or `ceil(c · (ln n)^γ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DegreeSpec {
    List(Vec<usize>),
    Rule { c: f64, gamma: f64 },
}

impl DegreeSpec {
    pub fn degrees(&self, n: usize) -> Vec<usize> {
        match self {
            DegreeSpec::List(v) => v.clone(),
            DegreeSpec::Rule { c, gamma } => {
                let d = (c * (n as f64).ln().powf(*gamma)).ceil();
                vec![d.max(1.0) as usize]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileModel {
    Uniform,
    PermSum,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub model: ProfileModel,
    /// Number of permutations for `perm-sum`; defaults to the cell's `d`.
    #[serde(default)]
    pub degree: Option<usize>,
    /// Triplet file for `file`.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            model: ProfileModel::Uniform,
            degree: None,
            path: None,
        }
    }
}

/// A sweep over `(n, d)` cells with `trials` independent samples each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Vec<usize>,
    pub d: DegreeSpec,
    pub trials: usize,
    pub distribution: DistributionKind,
    pub profile: ProfileSpec,
    pub tp_renormalize: bool,
    /// Also estimate `‖Y - E(Y)‖` on the raw ensemble.
    pub centered: bool,
    /// Cross-check against the dense SVD (`n <= 12` only).
    pub oracle: bool,
    /// Compute λ₁ and the fixed-point entropy by power iteration.
    pub fixed_point: bool,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iters: usize,
    pub max_basis: Option<usize>,
    /// Output directory; nothing is written when absent.
    pub output: Option<PathBuf>,
    /// Concurrent trials; `QEXP_THREADS` caps it.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: vec![16],
            d: DegreeSpec::List(vec![4]),
            trials: 1,
            distribution: DistributionKind::ComplexGaussian,
            profile: ProfileSpec::default(),
            tp_renormalize: true,
            centered: false,
            oracle: false,
            fixed_point: false,
            seed: 0,
            tol: 1e-8,
            max_iters: 2000,
            fixed_point_tol: 1e-10,
            fixed_point_max_iters: 10_000,
            max_basis: None,
            output: None,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// All `(n, d)` cells in sweep order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.n
            .iter()
            .flat_map(|&n| self.d.degrees(n).into_iter().map(move |d| (n, d)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n.is_empty() {
            return bad("n grid is empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if [self.tol, self.fixed_point_tol].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if let DegreeSpec::Rule { c, gamma } = self.d {
            if c.is_nan() || c <= 0.0 || !gamma.is_finite() {
                return bad(format!("degree rule needs c > 0 and finite gamma, got c = {c}, gamma = {gamma}"));
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for (n, d) in self.cells() {
            if n == 0 {
                return bad("n must be at least 1".into());
            }
            if d == 0 || d > n * n {
                return bad(format!("cell (n = {n}, d = {d}) violates 1 <= d <= n^2"));
            }
            if self.oracle && n * n > MAX_ORACLE_DIM {
                return bad(format!("oracle mode needs n <= 12, got n = {n}"));
            }
            if self.profile.model == ProfileModel::PermSum {
                let k = self.profile.degree.unwrap_or(d);
                if n < 2 || k == 0 || k > n {
                    return bad(format!(
                        "perm-sum profile needs n >= 2 and 1 <= degree <= n (n = {n}, degree = {k})"
                    ));
                }
            }
        }
        if self.profile.model == ProfileModel::File && self.profile.path.is_none() {
            return bad("file profile model needs a path".into());
        }
        Ok(())
    }

    /// Worker count after applying `QEXP_THREADS`.
    pub fn effective_workers(&self) -> usize {
        let env = std::env::var("QEXP_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
        let base = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
        match env {
            Some(cap) if cap > 0 => base.min(cap),
            _ => base,
        }
        .max(1)
    }
}
