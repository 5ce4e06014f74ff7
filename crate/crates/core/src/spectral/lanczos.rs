//! Thick-restart Lanczos with full reorthogonalization on a Gram operator.

use num_complex::Complex;

use super::{GramSide, LinearMap, SolverOptions, SpectralReport};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::{Domain, PhiloxStream, SeedSpec};
use crate::scalar::{cone, czero, Op, Real};

/// Memory budget for the Krylov basis.
const BASIS_BYTES: usize = 1_500_000_000;
/// Problems up to this dimension keep the whole space in the basis.
const FULL_BASIS_DIM: usize = 256;
/// Residual tolerance of the run that looks for missed repeated values.
const MULTIPLICITY_TOL: f64 = 1e-3;

type Vector<T> = Vec<Complex<T>>;

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

fn scale<T: Real>(a: &mut [Complex<T>], s: T) {
    a.iter_mut().for_each(|z| *z *= s);
}

/// Orthonormal vectors stored contiguously as the rows of a `len x dim`
/// matrix, so projections are matrix-vector products over one buffer.
struct Basis<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Basis<T> {
    fn new(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * cap),
        }
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn push(&mut self, v: &[Complex<T>]) {
        self.data.extend_from_slice(v);
    }

    fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `c = V* w` over rows `from..`.
    fn project(&self, from: usize, w: &[Complex<T>]) -> Vec<Complex<T>> {
        let m = self.len() - from;
        let mut c = vec![czero(); m];
        if m > 0 {
            let rows = &self.data[from * self.dim..];
            T::gemm(1, m, self.dim, cone(), w, Op::N, rows, Op::H, false, &mut c);
        }
        c
    }

    /// `w -= V c` over rows `from..`.
    fn subtract(&self, from: usize, c: &[Complex<T>], w: &mut [Complex<T>]) {
        if !c.is_empty() {
            let rows = &self.data[from * self.dim..];
            T::gemm(1, self.dim, c.len(), -cone::<T>(), c, Op::N, rows, Op::N, true, w);
        }
    }

    fn pass(&self, from: usize, w: &mut [Complex<T>], coeff: &mut [Complex<T>]) {
        let c = self.project(from, w);
        self.subtract(from, &c, w);
        for (acc, ci) in coeff[from..].iter_mut().zip(c) {
            *acc += ci;
        }
    }

    /// Two full passes of classical Gram-Schmidt; returns the accumulated
    /// projection coefficients.
    fn orthogonalize(&self, w: &mut [Complex<T>]) -> Vec<Complex<T>> {
        let mut coeff = vec![czero(); self.len()];
        self.pass(0, w, &mut coeff);
        self.pass(0, w, &mut coeff);
        coeff
    }

    /// Orthogonalizes a new Lanczos direction. The three-term coupling to
    /// the last two rows goes first, then one full pass, and a second full
    /// pass only if that one removed more than a `1 - 1/√2` fraction of the
    /// norm (the Daniel-Gragg-Kaufman-Stewart test), as happens right after
    /// a restart. Each full pass streams the whole basis through memory.
    fn orthogonalize_krylov(&self, w: &mut [Complex<T>]) -> Vec<Complex<T>> {
        let m = self.len();
        let mut coeff = vec![czero(); m];
        self.pass(m.saturating_sub(2), w, &mut coeff);
        let before = norm(w);
        self.pass(0, w, &mut coeff);
        if norm(w) < before * T::FRAC_1_SQRT_2() {
            self.pass(0, w, &mut coeff);
        }
        coeff
    }

    /// Rows `Σ_k coords[k, c] v_k` for each `c` in `cols`.
    fn combine(&self, coords: &CMatrix<T>, cols: usize) -> Basis<T> {
        let m = self.len();
        let lhs: Vec<_> = (0..cols).flat_map(|c| (0..m).map(move |k| coords[(k, c)])).collect();
        let mut data = vec![czero(); cols * self.dim];
        T::gemm(cols, self.dim, m, cone(), &lhs, Op::N, &self.data, Op::N, false, &mut data);
        Basis { dim: self.dim, data }
    }
}

fn gaussian_vector<T: Real>(rng: &mut PhiloxStream, n: usize, real: bool) -> Vector<T> {
    (0..n)
        .map(|_| {
            let re = T::lit(rng.next_gaussian());
            let im = if real { T::zero() } else { T::lit(rng.next_gaussian()) };
            Complex::new(re, im)
        })
        .collect()
}

/// A random unit vector orthogonal to `locked` and `basis`, or `None` if
/// the two already span the space numerically. With `real` the draw has
/// zero imaginary part.
fn fresh_direction<T: Real>(rng: &mut PhiloxStream, locked: &Basis<T>, basis: &Basis<T>, n: usize, real: bool) -> Option<Vector<T>> {
    if locked.len() + basis.len() >= n {
        return None;
    }
    for _ in 0..3 {
        let mut v = gaussian_vector::<T>(rng, n, real);
        let before = norm(&v);
        locked.orthogonalize(&mut v);
        basis.orthogonalize(&mut v);
        let after = norm(&v);
        if after > before * T::lit(1e-8) {
            scale(&mut v, T::one() / after);
            return Some(v);
        }
    }
    None
}

fn basis_cap<T: Real>(n: usize, requested: Option<usize>, want: usize) -> usize {
    let cap = match requested {
        Some(b) => b,
        None if n <= FULL_BASIS_DIM => n,
        None => {
            let bytes = n * std::mem::size_of::<Complex<T>>();
            (BASIS_BYTES / bytes.max(1)).clamp(8, 64)
        }
    };
    cap.max(want + 3).min(n)
}

struct Ritz<T> {
    /// Descending.
    values: Vec<T>,
    /// Column `i` holds the coordinates of Ritz vector `i` in the basis.
    vectors: CMatrix<T>,
}

fn rayleigh_ritz<T: Real>(hcols: &[Vector<T>]) -> Result<Ritz<T>> {
    let m = hcols.len();
    let mut h = CMatrix::zeros(m, m);
    for (j, col) in hcols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            h[(i, j)] = v;
            if i != j {
                h[(j, i)] = v.conj();
            }
        }
    }
    let eig = h.hermitian_eigen()?;
    let values = eig.values.iter().rev().copied().collect();
    let vectors = CMatrix::from_fn(m, m, |i, k| eig.vectors[(i, m - 1 - k)]);
    Ok(Ritz { values, vectors })
}

/// The two largest singular values of `op`, counted with multiplicity.
pub fn top_singular_pair<T: Real, A: LinearMap<T> + ?Sized>(op: &A, opts: &SolverOptions) -> Result<SpectralReport> {
    let opts = SolverOptions {
        nev: opts.nev.max(2),
        ..opts.clone()
    };
    top_singular_values(op, &opts)
}

/// Outcome of one Lanczos run on the Gram operator restricted to the
/// complement of a locked subspace.
struct Run<T> {
    /// Leading Ritz vectors, descending.
    vectors: Basis<T>,
    residuals: Vec<T>,
    converged: bool,
    /// The run spanned the whole complement, so its Ritz values are exact.
    exhausted: bool,
    matvecs: usize,
}

fn krylov_run<T: Real, A: LinearMap<T> + ?Sized>(
    op: &A,
    opts: &SolverOptions,
    want: usize,
    locked: &Basis<T>,
    rng: &mut PhiloxStream,
    stop_above: Option<T>,
) -> Result<Option<Run<T>>> {
    let n = op.dim();
    let free = n - locked.len();
    let want = want.min(free);
    if want == 0 {
        return Ok(None);
    }
    let maxb = basis_cap::<T>(free, opts.max_basis, want);
    let tol = T::lit(opts.tol);
    let eps = T::epsilon();
    let floor_factor = T::lit(64.0) * eps / tol;

    // A real map has a real Gram operator with the same spectrum on real
    // vectors, so a real start keeps the whole Krylov space real.
    let real = op.is_real();
    let mut basis = Basis::new(n, maxb);
    let mut hcols: Vec<Vector<T>> = Vec::with_capacity(maxb);
    let Some(mut next) = fresh_direction::<T>(rng, locked, &basis, n, real) else {
        return Ok(None);
    };
    let mut w = vec![czero(); n];
    let mut matvecs = 0usize;
    let mut anorm = T::zero();
    let mut since_breakdown = 0usize;
    let mut ever_broke = false;

    let (ritz, residuals, converged, exhausted) = loop {
        basis.push(&next);
        let j = basis.len() - 1;
        op.apply_gram(basis.row(j), &mut w);
        matvecs += 1;
        let w0 = norm(&w);
        anorm = anorm.max(w0);
        if locked.len() > 0 {
            locked.orthogonalize(&mut w);
        }
        let mut col = basis.orthogonalize_krylov(&mut w);
        // Keep the diagonal real for a Hermitian operator.
        col[j] = Complex::new(col[j].re, T::zero());
        hcols.push(col);
        let mut beta = norm(&w);
        let breakdown = beta <= T::lit(100.0) * eps * anorm;
        let mut exhausted = false;
        let pending = if breakdown {
            beta = T::zero();
            ever_broke = true;
            since_breakdown = 0;
            let fresh = fresh_direction::<T>(rng, locked, &basis, n, real);
            exhausted = fresh.is_none();
            fresh
        } else {
            since_breakdown += 1;
            let mut v = w.clone();
            scale(&mut v, T::one() / beta);
            Some(v)
        };

        let m = basis.len();
        let ritz = rayleigh_ritz(&hcols)?;
        let theta_max = ritz.values[0].max(T::zero());
        let k = want.min(m);
        let residuals: Vec<T> = (0..k)
            .map(|i| {
                let res = beta * ritz.vectors[(m - 1, i)].norm();
                let s = ritz.values[i].max(theta_max * floor_factor);
                if s > T::zero() {
                    res / s
                } else if res == T::zero() {
                    T::zero()
                } else {
                    T::infinity()
                }
            })
            .collect();
        let all_small = m >= want && residuals.iter().all(|&r| r <= tol);
        let trusted = !ever_broke || since_breakdown >= want;
        if exhausted || (all_small && trusted) {
            break (ritz, residuals, true, exhausted);
        }
        // Ritz values bound the top eigenvalue from below.
        if stop_above.is_some_and(|t| ritz.values[0] >= t) {
            break (ritz, residuals, false, false);
        }
        if matvecs >= opts.max_iters {
            break (ritz, residuals, false, false);
        }
        let Some(pending) = pending else {
            break (ritz, residuals, true, true);
        };

        if m == maxb {
            let keep = (want + 2).max(maxb / 2).min(m - 1);
            basis = basis.combine(&ritz.vectors, keep);
            hcols = (0..keep)
                .map(|i| {
                    let mut c = vec![czero(); i + 1];
                    c[i] = Complex::new(ritz.values[i], T::zero());
                    c
                })
                .collect();
        }
        next = pending;
    };

    let k = want.min(basis.len());
    Ok(Some(Run {
        vectors: basis.combine(&ritz.vectors, k),
        residuals,
        converged,
        exhausted,
        matvecs,
    }))
}

/// `‖A x‖` or `‖A* x‖`, whichever side the Gram operator lives on.
fn singular_value<T: Real, A: LinearMap<T> + ?Sized>(op: &A, x: &[Complex<T>], y: &mut [Complex<T>]) -> f64 {
    match op.gram_side() {
        GramSide::Inner => op.apply(x, y),
        GramSide::Outer => op.apply_adjoint(x, y),
    }
    norm(y).as_f64()
}

/// The `opts.nev` largest singular values of `op` by Lanczos on its Gram
/// operator, each accepted once its Ritz pair has relative residual at most
/// `opts.tol`. A report with `converged = false` is returned when the
/// iteration budget runs out.
///
/// A single Krylov sequence sees one copy of each distinct eigenvalue, so
/// after convergence a short run from a fresh start on the complement of
/// the accepted vectors looks for further copies. A value it finds above
/// the smallest accepted one is refined, joins the set, and the check
/// repeats.
pub fn top_singular_values<T: Real, A: LinearMap<T> + ?Sized>(op: &A, opts: &SolverOptions) -> Result<SpectralReport> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.nev == 0 {
        return Err(Error::InvalidArgument("nev must be at least 1".into()));
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("operator has dimension 0".into()));
    }
    let want = opts.nev.min(n);
    let mut rng = SeedSpec::new(opts.seed).stream(Domain::StartVector);
    let mut y = vec![czero(); n];

    let mut found = Basis::new(n, want + 2);
    let first = krylov_run(op, opts, want, &found, &mut rng, None)?.expect("nonempty space");
    let mut matvecs = first.matvecs;
    let converged = first.converged;
    let residuals: Vec<f64> = first.residuals.iter().map(|r| r.as_f64()).collect();
    let mut values = Vec::with_capacity(want + 2);
    for i in 0..first.vectors.len() {
        found.push(first.vectors.row(i));
        values.push(singular_value(op, first.vectors.row(i), &mut y));
    }

    if converged && !first.exhausted {
        // Only a copy strictly above the smallest accepted value changes the
        // answer. Such a copy is separated from the rest by at least the gap
        // the first run resolved, so half its budget lifts the probe's Ritz
        // value, a lower bound, past the threshold.
        let check = SolverOptions {
            tol: opts.tol.max(MULTIPLICITY_TOL),
            max_iters: (first.matvecs / 2 + 10).min(opts.max_iters),
            ..opts.clone()
        };
        let mut budget = want;
        while budget > 0 {
            budget -= 1;
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let floor = sorted.get(want - 1).copied().unwrap_or(0.0) * (1.0 + opts.tol);
            let Some(probe) = krylov_run(op, &check, 1, &found, &mut rng, Some(T::lit(floor * floor)))? else {
                break;
            };
            matvecs += probe.matvecs;
            if singular_value(op, probe.vectors.row(0), &mut y) < floor {
                break;
            }
            let accepted = match krylov_run(op, opts, 1, &found, &mut rng, None)? {
                Some(r) if r.converged => {
                    matvecs += r.matvecs;
                    r.vectors
                }
                _ => probe.vectors,
            };
            values.push(singular_value(op, accepted.row(0), &mut y));
            found.push(accepted.row(0));
        }
    }

    values.sort_by(|a, b| b.total_cmp(a));
    values.resize(want, 0.0);
    Ok(SpectralReport {
        s1: values.first().copied().unwrap_or(0.0),
        s2: values.get(1).copied().unwrap_or(0.0),
        singular_values: values,
        lambda1: None,
        gap_ratio: None,
        iterations: matvecs,
        residuals,
        converged,
    })
}
