//! Variance profiles: the matrix η of entry variances of the Kraus operators.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use num_rational::Ratio;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::rng::{Domain, SeedSpec};
use crate::scalar::Real;
use crate::spectral::{top_singular_pair, LinearMap, SolverOptions};

/// Stochasticity flags, computed once at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticFlags {
    pub row_stochastic: bool,
    pub column_stochastic: bool,
    pub doubly_substochastic: bool,
}

/// Entries that are integer multiples of `1 / denominator`, kept alongside
/// the floating-point values so row and column sums can be checked exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactGrid {
    pub denominator: u64,
    pub counts: CsrMatrix<u64>,
}

/// Exact row and column sums of a grid profile.
pub type ExactSums = (Vec<Ratio<u64>>, Vec<Ratio<u64>>);

#[derive(Clone, Debug)]
pub struct VarianceProfile<T> {
    n: usize,
    eta: CsrMatrix<T>,
    exact: Option<ExactGrid>,
    row_sums: Vec<T>,
    col_sums: Vec<T>,
    flags: StochasticFlags,
    max_entry: T,
    label: String,
}

impl<T: Real> VarianceProfile<T> {
    /// Builds a profile from `(i, j, η_ij)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("profile dimension must be at least 1".into()));
        }
        for &(i, j, v) in &triplets {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v.as_f64(),
                });
            }
        }
        let eta = CsrMatrix::from_triplets(n, n, triplets)?;
        Ok(Self::from_csr(eta, None, "triplets".into()))
    }

    fn from_grid(n: usize, denominator: u64, counts: Vec<(usize, usize, u64)>, label: String) -> Result<Self> {
        let counts = CsrMatrix::from_triplets(n, n, counts)?;
        let den = T::from_u64(denominator).expect("denominator representable");
        let eta = counts.map(|c| T::from_u64(c).expect("count representable") / den);
        Ok(Self::from_csr(eta, Some(ExactGrid { denominator, counts }), label))
    }

    fn from_csr(eta: CsrMatrix<T>, exact: Option<ExactGrid>, label: String) -> Self {
        let n = eta.nrows();
        let mut row_sums = vec![T::zero(); n];
        let mut col_sums = vec![T::zero(); n];
        let mut max_entry = T::zero();
        for (i, j, v) in eta.iter() {
            row_sums[i] += v;
            col_sums[j] += v;
            max_entry = max_entry.max(v);
        }
        let tol = Self::sum_tolerance(n);
        let one = T::one();
        let flags = match &exact {
            Some(grid) => {
                let (rows, cols) = grid.sums();
                let d = grid.denominator;
                StochasticFlags {
                    row_stochastic: rows.iter().all(|&r| r == d),
                    column_stochastic: cols.iter().all(|&c| c == d),
                    doubly_substochastic: rows.iter().chain(&cols).all(|&s| s <= d),
                }
            }
            None => StochasticFlags {
                row_stochastic: row_sums.iter().all(|&r| (r - one).abs() <= tol),
                column_stochastic: col_sums.iter().all(|&c| (c - one).abs() <= tol),
                doubly_substochastic: row_sums.iter().chain(&col_sums).all(|&s| s <= one + tol),
            },
        };
        Self {
            n,
            eta,
            exact,
            row_sums,
            col_sums,
            flags,
            max_entry,
            label,
        }
    }

    /// Slack allowed on floating-point row and column sums.
    pub fn sum_tolerance(n: usize) -> T {
        let floor = T::lit(1e-12);
        let scaled = T::epsilon() * T::from_usize(n.max(1)).expect("n representable");
        floor.max(scaled)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &CsrMatrix<T> {
        &self.eta
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.eta.get(i, j)
    }

    pub fn nnz(&self) -> usize {
        self.eta.nnz()
    }

    pub fn flags(&self) -> StochasticFlags {
        self.flags
    }

    pub fn max_entry(&self) -> T {
        self.max_entry
    }

    pub fn row_sums(&self) -> &[T] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[T] {
        &self.col_sums
    }

    pub fn exact_grid(&self) -> Option<&ExactGrid> {
        self.exact.as_ref()
    }

    /// Short provenance label such as `uniform(8)` or `perm-sum(n=..,d=..)`.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Whether sparse storage is preferable for matrices with this support.
    pub fn is_sparse(&self) -> bool {
        self.nnz().saturating_mul(4) <= self.n * self.n
    }

    /// Largest number of nonzeros in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.n).map(|i| self.eta.row(i).0.len()).max().unwrap_or(0)
    }

    /// Exact row and column sums when the entries live on a `1/d` grid.
    pub fn exact_sums(&self) -> Option<ExactSums> {
        let grid = self.exact.as_ref()?;
        let (rows, cols) = grid.sums();
        let to_ratio = |v: Vec<u64>| v.into_iter().map(|s| Ratio::new(s, grid.denominator)).collect();
        Some((to_ratio(rows), to_ratio(cols)))
    }

    /// `Some(true)` iff every row and column sums to exactly one in rational
    /// arithmetic; `None` when the profile has no exact grid.
    pub fn is_exactly_doubly_stochastic(&self) -> Option<bool> {
        let (rows, cols) = self.exact_sums()?;
        let one = Ratio::from_integer(1u64);
        Some(rows.iter().chain(&cols).all(|r| *r == one))
    }

    /// Writes the triplet text format.
    pub fn to_triplet_string(&self) -> String {
        let d = match &self.exact {
            Some(g) => g.denominator as usize,
            None => self.max_row_nnz(),
        };
        let mut out = format!("{} {}\n", self.n, d);
        for (i, j, v) in self.eta.iter() {
            writeln!(out, "{i} {j} {:.16e}", v.as_f64()).expect("write to string");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_triplet_string()).map_err(|e| Error::io(path, e))
    }
}

impl ExactGrid {
    fn sums(&self) -> (Vec<u64>, Vec<u64>) {
        let n = self.counts.nrows();
        let mut rows = vec![0u64; n];
        let mut cols = vec![0u64; n];
        for (i, j, c) in self.counts.iter() {
            rows[i] += c;
            cols[j] += c;
        }
        (rows, cols)
    }
}

/// `η = J/n`.
pub fn uniform_profile<T: Real>(n: usize) -> Result<VarianceProfile<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("uniform profile needs n >= 1".into()));
    }
    let counts = (0..n).flat_map(|i| (0..n).map(move |j| (i, j, 1u64))).collect();
    VarianceProfile::from_grid(n, n as u64, counts, format!("uniform(n={n})"))
}

/// Average of `d` independent uniformly random `n x n` permutation matrices.
///
/// Permutation `k` is a Fisher-Yates shuffle driven by the profile stream at
/// coordinates `(seed.trial, k)`.
pub fn permutation_sum_profile<T: Real>(n: usize, d: usize, seed: SeedSpec) -> Result<VarianceProfile<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("permutation-sum profile needs n >= 2, got {n}")));
    }
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "permutation-sum degree must satisfy 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    let mut counts = Vec::with_capacity(n * d);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        let mut rng = seed.with_kraus(k as u32).stream(Domain::Profile);
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        perm.shuffle(&mut rng);
        counts.extend(perm.iter().enumerate().map(|(i, &j)| (i, j, 1u64)));
    }
    VarianceProfile::from_grid(
        n,
        d as u64,
        counts,
        format!("perm-sum(n={n},d={d},seed={},trial={})", seed.master_seed, seed.trial),
    )
}

/// `η = A / r` for the adjacency matrix `A` of an `r`-regular graph.
pub fn regular_graph_profile<T: Real>(adjacency: &[Vec<u8>], r: usize) -> Result<VarianceProfile<T>> {
    let n = adjacency.len();
    if n == 0 || r == 0 {
        return Err(Error::InvalidArgument("adjacency must be nonempty with degree >= 1".into()));
    }
    let mut col_sums = vec![0usize; n];
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        let mut sum = 0;
        for (j, &a) in row.iter().enumerate() {
            if a > 1 {
                return Err(Error::InvalidArgument(format!("adjacency entry ({i}, {j}) = {a} is not 0/1")));
            }
            sum += a as usize;
            col_sums[j] += a as usize;
        }
        if sum != r {
            return Err(Error::NotRegular {
                degree: r,
                axis: "row",
                index: i,
                sum,
            });
        }
    }
    if let Some((j, &sum)) = col_sums.iter().enumerate().find(|(_, &s)| s != r) {
        return Err(Error::NotRegular {
            degree: r,
            axis: "column",
            index: j,
            sum,
        });
    }
    for (i, row) in adjacency.iter().enumerate() {
        for (j, &a) in row.iter().enumerate().take(i) {
            if a != adjacency[j][i] {
                return Err(Error::InvalidArgument(format!("adjacency is not symmetric at ({i}, {j})")));
            }
        }
    }
    let counts = adjacency
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, &a)| a == 1).map(move |(j, _)| (i, j, 1u64)))
        .collect();
    VarianceProfile::from_grid(n, r as u64, counts, format!("regular-graph(n={n},r={r})"))
}

/// Parses the triplet text format: a header line `n d`, then one `i j value`
/// line per nonzero entry (0-indexed). Blank lines and `#` comments are
/// ignored. `d` is the grid denominator (or degree) and is used to recover
/// exact sums when every value is a multiple of `1/d`.
pub fn parse_profile<T: Real>(text: &str) -> Result<VarianceProfile<T>> {
    let mut header: Option<(usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let perr = |message: String| Error::ParseError { line: line_no, message };
        match header {
            None => {
                if fields.len() != 2 {
                    return Err(perr(format!("expected header `n d`, found {} fields", fields.len())));
                }
                let n = fields[0].parse::<usize>().map_err(|e| perr(format!("bad n: {e}")))?;
                let d = fields[1].parse::<usize>().map_err(|e| perr(format!("bad d: {e}")))?;
                if n == 0 {
                    return Err(perr("n must be at least 1".into()));
                }
                header = Some((n, d));
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(perr(format!("expected `i j value`, found {} fields", fields.len())));
                }
                let i = fields[0].parse::<usize>().map_err(|e| perr(format!("bad row index: {e}")))?;
                let j = fields[1].parse::<usize>().map_err(|e| perr(format!("bad column index: {e}")))?;
                let v = fields[2].parse::<f64>().map_err(|e| perr(format!("bad value: {e}")))?;
                if i >= n || j >= n {
                    return Err(perr(format!("index ({i}, {j}) out of range for n = {n}")));
                }
                if !v.is_finite() {
                    return Err(perr(format!("non-finite value {v}")));
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
                if !seen.insert((i, j)) {
                    return Err(perr(format!("duplicate entry ({i}, {j})")));
                }
                triplets.push((i, j, T::lit(v)));
            }
        }
    }
    let (n, d) = header.ok_or(Error::ParseError {
        line: 0,
        message: "missing header".into(),
    })?;
    if d > 0 {
        let df = d as f64;
        let counts: Option<Vec<(usize, usize, u64)>> = triplets
            .iter()
            .map(|&(i, j, v)| {
                let c = (v.as_f64() * df).round();
                let exact = c >= 0.0 && (v.as_f64() - c / df).abs() <= 1e-15 * (1.0 + v.as_f64().abs());
                exact.then_some((i, j, c as u64))
            })
            .collect();
        if let Some(counts) = counts {
            return VarianceProfile::from_grid(n, d as u64, counts, "file".into());
        }
    }
    Ok(VarianceProfile::from_triplets(n, triplets)?.with_label("file"))
}

pub fn load_profile<T: Real>(path: impl AsRef<Path>) -> Result<VarianceProfile<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    Ok(parse_profile::<T>(&text)?.with_label(label))
}

/// Result of [`validate_profile`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub nnz: usize,
    pub row_sum_min: f64,
    pub row_sum_max: f64,
    pub col_sum_min: f64,
    pub col_sum_max: f64,
    pub max_entry: f64,
    /// `C' / (log n)^{max(β/2, 2)}`; absent for `n = 1` where `log n = 0`.
    pub max_entry_threshold: Option<f64>,
    pub max_entry_within_threshold: Option<bool>,
    pub threshold_constant: f64,
    pub beta: f64,
    pub flags: StochasticFlags,
    pub exactly_doubly_stochastic: Option<bool>,
    pub irreducible: bool,
    pub communicating_classes: usize,
    pub valid: bool,
    pub warnings: Vec<String>,
}

/// Validation with `β = 0` and `C' = 1`.
pub fn validate_profile<T: Real>(p: &VarianceProfile<T>) -> ValidationReport {
    validate_profile_with(p, 0.0, 1.0)
}

/// Checks sub-stochasticity, the max-entry threshold and irreducibility.
///
/// The profile is valid when it is doubly sub-stochastic. A reducible
/// support or a large max entry only produces warnings.
pub fn validate_profile_with<T: Real>(p: &VarianceProfile<T>, beta: f64, c_prime: f64) -> ValidationReport {
    let range = |v: &[T]| {
        v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x.as_f64()), hi.max(x.as_f64()))
        })
    };
    let (row_sum_min, row_sum_max) = range(&p.row_sums);
    let (col_sum_min, col_sum_max) = range(&p.col_sums);
    let alpha = (beta / 2.0).max(2.0);
    let max_entry = p.max_entry.as_f64();
    let max_entry_threshold = (p.n > 1).then(|| c_prime / (p.n as f64).ln().powf(alpha));
    let max_entry_within_threshold = max_entry_threshold.map(|t| max_entry <= t);
    let classes = communicating_classes(p);
    let irreducible = classes == 1;
    let flags = p.flags;

    let mut warnings = Vec::new();
    if !flags.doubly_substochastic {
        warnings.push("profile is not doubly sub-stochastic".to_string());
    }
    if !flags.column_stochastic {
        warnings.push("profile is not column-stochastic".to_string());
    }
    if let (Some(false), Some(t)) = (max_entry_within_threshold, max_entry_threshold) {
        warnings.push(format!("max entry {max_entry:e} exceeds C'/(log n)^{alpha} = {t:e}"));
    }
    if !irreducible {
        warnings.push(format!(
            "support digraph is reducible ({classes} communicating classes); proceeding anyway"
        ));
    }
    ValidationReport {
        n: p.n,
        nnz: p.nnz(),
        row_sum_min,
        row_sum_max,
        col_sum_min,
        col_sum_max,
        max_entry,
        max_entry_threshold,
        max_entry_within_threshold,
        threshold_constant: c_prime,
        beta,
        flags,
        exactly_doubly_stochastic: p.is_exactly_doubly_stochastic(),
        irreducible,
        communicating_classes: classes,
        valid: flags.doubly_substochastic,
        warnings,
    }
}

/// Number of strongly connected components of the support digraph
/// (edge `i -> j` whenever `η_ij > 0`).
pub fn communicating_classes<T: Real>(p: &VarianceProfile<T>) -> usize {
    let mut g = DiGraph::<(), ()>::with_capacity(p.n, p.nnz());
    let nodes: Vec<_> = (0..p.n).map(|_| g.add_node(())).collect();
    for (i, j, _) in p.eta.iter() {
        g.add_edge(nodes[i], nodes[j], ());
    }
    tarjan_scc(&g).len()
}

/// Two largest singular values of η, counted with multiplicity.
pub fn profile_s2<T: Real>(p: &VarianceProfile<T>) -> Result<(T, T)> {
    profile_s2_with(p, &SolverOptions::profile_default())
}

pub fn profile_s2_with<T: Real>(p: &VarianceProfile<T>, opts: &SolverOptions) -> Result<(T, T)> {
    if p.n < 2 {
        return Err(Error::InvalidArgument("profile_s2 needs n >= 2".into()));
    }
    let report = top_singular_pair(p, opts)?;
    if !report.converged {
        return Err(Error::ConvergenceFailure {
            iterations: report.iterations,
            residual: report.residuals.iter().fold(0.0, |m: f64, &r| m.max(r)),
            tol: opts.tol,
        });
    }
    Ok((T::lit(report.s1), T::lit(report.s2)))
}

impl<T: Real> LinearMap<T> for VarianceProfile<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.eta.row(i);
            *yi = cols
                .iter()
                .zip(vals)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (&j, &v)| acc + x[j] * v);
        }
    }

    fn apply_adjoint(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y.iter_mut().for_each(|v| *v = Complex::new(T::zero(), T::zero()));
        for (i, j, v) in self.eta.iter() {
            y[j] += x[i] * v;
        }
    }
}
