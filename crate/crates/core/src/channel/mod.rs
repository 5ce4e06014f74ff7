//! Kraus ensembles, the CP maps they define, TP renormalization and
//! structural diagnostics.

mod io;
mod moments;
mod stacked;
mod transfer;

pub use io::{load_ensemble, save_ensemble, EnsembleManifest};
pub use moments::{analytic_second_moment, expected_transfer, MomentDecomposition, MAX_DENSE_MOMENT_N};
pub use transfer::{TransferMode, TransferOperator};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CsrMatrix, Matrix};
use crate::profile::VarianceProfile;
use crate::rng::SeedSpec;
use crate::sampler::{sample_matrix, DistributionKind, EntryDistribution};
use crate::scalar::{cone, czero, Op, Real};

use stacked::StackedSparse;

/// Eigenvalues of Σ at or below this value make renormalization fail.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Largest `n` for which [`choi_matrix`] will build the `n² x n²` matrix.
pub const MAX_CHOI_N: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `K_s = W_s / √d`.
    RawOverSqrtD,
    /// `K_s = W_s Σ^{-1/2} / √d`.
    TpRenormalized,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::RawOverSqrtD => "raw_over_sqrt_d",
            Normalization::TpRenormalized => "tp_renormalized",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub profile: String,
    pub distribution: Option<DistributionKind>,
    pub seed: Option<SeedSpec>,
}

/// `d` Kraus operators on `M_n(C)`.
///
/// Sparse ensembles keep TP renormalization in factored form: the effective
/// operators are `K_s R` with `R = Σ^{-1/2}` stored once, so the sparse
/// pattern survives. Dense ensembles store `K_s R` directly.
#[derive(Clone, Debug)]
pub struct KrausEnsemble<T> {
    n: usize,
    ops: Vec<Matrix<T>>,
    adjoints: Vec<Option<CsrMatrix<Complex<T>>>>,
    /// Forward and adjoint kernels when every operator is sparse.
    stacked: Option<Box<(StackedSparse<T>, StackedSparse<T>)>>,
    right_factor: Option<RightFactor<T>>,
    normalization: Normalization,
    provenance: Provenance,
}

#[derive(Clone, Debug)]
pub(crate) struct RightFactor<T> {
    /// `R`, Hermitian.
    pub(crate) r: CMatrix<T>,
    /// `R R* = Σ^{-1}`.
    pub(crate) rr: CMatrix<T>,
    /// Real parts of `r` and `rr` when both are real (real entry laws), used
    /// for half-cost products on the real and imaginary planes.
    real: Option<(Vec<T>, Vec<T>)>,
}

fn all_real<T: Real>(v: &[Complex<T>]) -> bool {
    v.iter().all(|z| z.im.is_zero())
}

impl<T: Real> RightFactor<T> {
    fn new(r: CMatrix<T>, rr: CMatrix<T>) -> Self {
        let re = |m: &CMatrix<T>| all_real(m.as_slice()).then(|| m.as_slice().iter().map(|z| z.re).collect::<Vec<T>>());
        let real = re(&r).zip(re(&rr));
        Self { r, rr, real }
    }

    /// `R X R`.
    pub(crate) fn apply_r(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match &self.real {
            Some((r, _)) => sandwich_real(r, x),
            None => sandwich(&self.r, x),
        }
    }

    /// `Σ^{-1} X Σ^{-1}`.
    pub(crate) fn apply_rr(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match &self.real {
            Some((_, rr)) => sandwich_real(rr, x),
            None => sandwich(&self.rr, x),
        }
    }
}

impl<T: Real> KrausEnsemble<T> {
    /// Wraps explicit Kraus operators. The ensemble is treated as raw, so
    /// [`compute_sigma`] and [`renormalize_tp`] apply to it.
    pub fn from_kraus(n: usize, ops: Vec<Matrix<T>>) -> Result<Self> {
        Self::from_parts(
            n,
            ops,
            Normalization::RawOverSqrtD,
            Provenance {
                profile: "explicit".into(),
                ..Provenance::default()
            },
        )
    }

    pub fn from_dense(ops: Vec<CMatrix<T>>) -> Result<Self> {
        let n = ops.first().map_or(0, |m| m.rows());
        Self::from_kraus(n, ops.into_iter().map(Matrix::Dense).collect())
    }

    pub(crate) fn from_parts(n: usize, ops: Vec<Matrix<T>>, normalization: Normalization, provenance: Provenance) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("Kraus operators must be at least 1x1".into()));
        }
        let d = ops.len();
        if d == 0 || d > n * n {
            return Err(Error::InvalidArgument(format!(
                "number of Kraus operators must satisfy 1 <= d <= n^2 = {}, got {d}",
                n * n
            )));
        }
        for op in &ops {
            if op.rows() != n || op.cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if op.rows() != n { op.rows() } else { op.cols() },
                });
            }
        }
        let adjoints: Vec<_> = ops
            .iter()
            .map(|op| match op {
                Matrix::Sparse(m) => Some(m.transpose().map(|z| z.conj())),
                Matrix::Dense(_) => None,
            })
            .collect();
        let sparse: Option<Vec<&CsrMatrix<Complex<T>>>> = ops
            .iter()
            .map(|op| match op {
                Matrix::Sparse(m) => Some(m),
                Matrix::Dense(_) => None,
            })
            .collect();
        let stacked = sparse.map(|fwd| {
            let adj: Vec<_> = adjoints.iter().map(|a| a.as_ref().expect("sparse adjoint")).collect();
            Box::new((StackedSparse::new(n, &fwd), StackedSparse::new(n, &adj)))
        });
        Ok(Self {
            n,
            ops,
            adjoints,
            stacked,
            right_factor: None,
            normalization,
            provenance,
        })
    }

    pub(crate) fn with_right_factor(mut self, r: CMatrix<T>, rr: CMatrix<T>) -> Self {
        self.right_factor = Some(RightFactor::new(r, rr));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.ops.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Stored operators; for a factored ensemble these exclude `R`.
    pub fn stored_ops(&self) -> &[Matrix<T>] {
        &self.ops
    }

    /// `R = Σ^{-1/2}` for factored ensembles.
    pub fn right_factor(&self) -> Option<&CMatrix<T>> {
        self.right_factor.as_ref().map(|f| &f.r)
    }

    pub(crate) fn right_factor_parts(&self) -> Option<&RightFactor<T>> {
        self.right_factor.as_ref()
    }

    pub fn is_factored(&self) -> bool {
        self.right_factor.is_some()
    }

    pub fn is_sparse(&self) -> bool {
        self.ops.iter().all(Matrix::is_sparse)
    }

    /// Whether every effective Kraus operator has real entries, so the
    /// channel maps real matrices to real matrices.
    pub fn is_real(&self) -> bool {
        let ops = self.ops.iter().all(|op| match op {
            Matrix::Sparse(m) => all_real(m.values()),
            Matrix::Dense(m) => all_real(m.as_slice()),
        });
        ops && self.right_factor.as_ref().is_none_or(|f| f.real.is_some())
    }

    /// The `s`-th Kraus operator of the channel, including any right factor.
    pub fn kraus(&self, s: usize) -> Matrix<T> {
        match &self.right_factor {
            None => self.ops[s].clone(),
            Some(f) => Matrix::Dense(self.ops[s].mul_dense(&f.r)),
        }
    }

    fn term_forward(&self, s: usize, x: &CMatrix<T>) -> CMatrix<T> {
        let k = &self.ops[s];
        k.dense_mul_adjoint(&k.mul_dense(x))
    }

    fn term_adjoint(&self, s: usize, y: &CMatrix<T>) -> CMatrix<T> {
        let k = &self.ops[s];
        let left = match (&self.adjoints[s], k) {
            (Some(adj), _) => adj.mul_dense(y),
            (None, Matrix::Dense(m)) => m.mul_op(crate::scalar::Op::H, y, crate::scalar::Op::N),
            (None, Matrix::Sparse(_)) => unreachable!("sparse operators carry their adjoint"),
        };
        k.dense_mul(&left)
    }

    /// `Σ_s K_s X K_s*` over the stored operators.
    pub(crate) fn raw_forward(&self, x: &CMatrix<T>) -> CMatrix<T> {
        if let Some(st) = &self.stacked {
            return st.0.sandwich_sum(x);
        }
        tree_sum(0, self.d(), &|s| self.term_forward(s, x))
    }

    /// `Σ_s K_s* Y K_s` over the stored operators.
    pub(crate) fn raw_adjoint(&self, y: &CMatrix<T>) -> CMatrix<T> {
        if let Some(st) = &self.stacked {
            return st.1.sandwich_sum(y);
        }
        tree_sum(0, self.d(), &|s| self.term_adjoint(s, y))
    }

    fn check_dim(&self, x: &CMatrix<T>) -> Result<()> {
        if x.rows() != self.n || x.cols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: if x.rows() != self.n { x.rows() } else { x.cols() },
            });
        }
        Ok(())
    }

    /// `Φ(X) = Σ_s K_s X K_s*`.
    pub fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        self.check_dim(x)?;
        Ok(self.forward_unchecked(x))
    }

    /// `Φ*(Y) = Σ_s K_s* Y K_s`.
    pub fn apply_adjoint(&self, y: &CMatrix<T>) -> Result<CMatrix<T>> {
        self.check_dim(y)?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn forward_unchecked(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match &self.right_factor {
            None => self.raw_forward(x),
            Some(f) => self.raw_forward(&f.apply_r(x)),
        }
    }

    pub(crate) fn adjoint_unchecked(&self, y: &CMatrix<T>) -> CMatrix<T> {
        match &self.right_factor {
            None => self.raw_adjoint(y),
            Some(f) => f.apply_r(&self.raw_adjoint(y)),
        }
    }
}

/// `R X R*` for Hermitian `R` (written `R X R`).
pub(crate) fn sandwich<T: Real>(r: &CMatrix<T>, x: &CMatrix<T>) -> CMatrix<T> {
    r.matmul(x).matmul(r)
}

/// [`sandwich`] for a real symmetric `r`, stacking the real and imaginary
/// planes of `x` so that two real products replace two complex ones.
fn sandwich_real<T: Real>(r: &[T], x: &CMatrix<T>) -> CMatrix<T> {
    let n = x.rows();
    if x.as_slice().iter().all(|z| z.im.is_zero()) {
        let re: Vec<T> = x.as_slice().iter().map(|z| z.re).collect();
        let mut left = vec![T::zero(); n * n];
        T::gemm_real(n, n, n, r, Op::N, &re, &mut left);
        let mut out = re;
        T::gemm_real(n, n, n, &left, Op::N, r, &mut out);
        return CMatrix::from_vec(n, n, out.into_iter().map(|a| Complex::new(a, T::zero())).collect()).expect("n x n");
    }
    // [Re X | Im X], n x 2n.
    let mut planes = vec![T::zero(); 2 * n * n];
    for (i, row) in planes.chunks_exact_mut(2 * n).enumerate() {
        for (j, z) in x.row(i).iter().enumerate() {
            row[j] = z.re;
            row[n + j] = z.im;
        }
    }
    let mut left = vec![T::zero(); 2 * n * n];
    T::gemm_real(n, 2 * n, n, r, Op::N, &planes, &mut left);
    // [R Re X ; R Im X], 2n x n.
    for i in 0..n {
        let (re, im) = left[2 * n * i..2 * n * (i + 1)].split_at(n);
        planes[n * i..n * (i + 1)].copy_from_slice(re);
        planes[n * (n + i)..n * (n + i + 1)].copy_from_slice(im);
    }
    T::gemm_real(2 * n, n, n, &planes, Op::N, r, &mut left);
    let (re, im) = left.split_at(n * n);
    CMatrix::from_vec(n, n, re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect()).expect("n x n")
}

/// Deterministic pairwise reduction over `lo..hi`; the tree shape depends
/// only on the range, never on how rayon schedules the halves.
pub(crate) fn tree_sum<T: Real>(lo: usize, hi: usize, f: &(impl Fn(usize) -> CMatrix<T> + Sync)) -> CMatrix<T> {
    debug_assert!(hi > lo);
    if hi - lo == 1 {
        return f(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (mut a, b) = rayon::join(|| tree_sum(lo, mid, f), || tree_sum(mid, hi, f));
    a.axpy(cone(), &b);
    a
}

/// Samples `W_1..W_d` and returns `K_s = W_s / √d`.
pub fn build_ensemble<T: Real>(
    profile: &VarianceProfile<T>,
    dist: &EntryDistribution,
    d: usize,
    seed: SeedSpec,
) -> Result<KrausEnsemble<T>> {
    let n = profile.n();
    if d == 0 {
        return Err(Error::InvalidArgument("number of Kraus operators d must be at least 1".into()));
    }
    if d > n * n {
        return Err(Error::InvalidArgument(format!("d = {d} exceeds n^2 = {}", n * n)));
    }
    let scale = T::one() / T::from_usize(d).expect("d representable").sqrt();
    let ops = (0..d)
        .map(|s| sample_matrix(dist, profile, seed.with_kraus(s as u32)).scale_real(scale))
        .collect();
    KrausEnsemble::from_parts(
        n,
        ops,
        Normalization::RawOverSqrtD,
        Provenance {
            profile: profile.label().to_string(),
            distribution: Some(dist.kind),
            seed: Some(seed),
        },
    )
}

#[derive(Clone, Debug)]
pub struct SigmaReport<T> {
    /// `Σ = (1/d) Σ_s W_s* W_s`.
    pub sigma: CMatrix<T>,
    /// `Θ = (1/d) Σ_s W_s W_s*`.
    pub theta: Option<CMatrix<T>>,
    /// `‖Σ - I‖` in operator norm.
    pub deviation: T,
    pub theta_deviation: Option<T>,
    pub min_eig: T,
    pub max_eig: T,
}

/// Σ and Θ of a raw ensemble, with spectral deviation from the identity.
pub fn compute_sigma<T: Real>(e: &KrausEnsemble<T>) -> Result<SigmaReport<T>> {
    compute_sigma_with(e, true)
}

pub fn compute_sigma_with<T: Real>(e: &KrausEnsemble<T>, with_theta: bool) -> Result<SigmaReport<T>> {
    if e.normalization != Normalization::RawOverSqrtD {
        return Err(Error::WrongNormalization {
            found: e.normalization.name(),
        });
    }
    let id = CMatrix::identity(e.n);
    let sigma = e.raw_adjoint(&id).hermitian_part();
    let eig = sigma.hermitian_eigenvalues()?;
    let min_eig = eig[0];
    let max_eig = eig[eig.len() - 1];
    let deviation = (max_eig - T::one()).abs().max((min_eig - T::one()).abs());
    let (theta, theta_deviation) = if with_theta {
        let theta = e.raw_forward(&id).hermitian_part();
        let dev = theta.sub(&id).hermitian_op_norm()?;
        (Some(theta), Some(dev))
    } else {
        (None, None)
    };
    Ok(SigmaReport {
        sigma,
        theta,
        deviation,
        theta_deviation,
        min_eig,
        max_eig,
    })
}

/// Returns the ensemble with `K_s Σ^{-1/2}` in place of `K_s`.
pub fn renormalize_tp<T: Real>(e: &KrausEnsemble<T>) -> Result<KrausEnsemble<T>> {
    let report = compute_sigma_with(e, false)?;
    renormalize_with_sigma(e, &report.sigma)
}

/// As [`renormalize_tp`], reusing an already computed Σ.
pub fn renormalize_with_sigma<T: Real>(e: &KrausEnsemble<T>, sigma: &CMatrix<T>) -> Result<KrausEnsemble<T>> {
    if e.normalization != Normalization::RawOverSqrtD {
        return Err(Error::WrongNormalization {
            found: e.normalization.name(),
        });
    }
    let eig = sigma.hermitian_eigen()?;
    let floor = T::lit(SIGMA_FLOOR);
    if eig.values[0] <= floor {
        return Err(Error::SingularSigma {
            min_eig: eig.values[0].as_f64(),
            floor: SIGMA_FLOOR,
        });
    }
    let n = e.n;
    // A real symmetric Σ has real eigenvectors and real functions.
    let real_vectors = all_real(eig.vectors.as_slice()).then(|| eig.vectors.as_slice().iter().map(|z| z.re).collect::<Vec<T>>());
    let func = |f: &dyn Fn(T) -> T| match &real_vectors {
        Some(v) => {
            // diag(f(λ)) Vᵀ, then V times it.
            let mut st = vec![T::zero(); n * n];
            for (j, &lam) in eig.values.iter().enumerate() {
                let fl = f(lam);
                for i in 0..n {
                    st[j * n + i] = fl * v[i * n + j];
                }
            }
            let mut m = vec![T::zero(); n * n];
            T::gemm_real(n, n, n, v, Op::N, &st, &mut m);
            CMatrix::from_vec(n, n, m.into_iter().map(|a| Complex::new(a, T::zero())).collect())
                .expect("n x n")
                .hermitian_part()
        }
        None => {
            let mut scaled = eig.vectors.clone();
            for i in 0..n {
                for (j, &v) in eig.values.iter().enumerate() {
                    scaled[(i, j)] *= f(v);
                }
            }
            scaled.mul_op(Op::N, &eig.vectors, Op::H).hermitian_part()
        }
    };
    let r = func(&|v: T| T::one() / v.sqrt());
    let provenance = e.provenance.clone();
    if e.is_sparse() {
        let rr = func(&|v: T| T::one() / v);
        let out = KrausEnsemble::from_parts(e.n, e.ops.clone(), Normalization::TpRenormalized, provenance)?;
        Ok(out.with_right_factor(r, rr))
    } else {
        let ops = e.ops.iter().map(|k| Matrix::Dense(k.mul_dense(&r))).collect();
        KrausEnsemble::from_parts(e.n, ops, Normalization::TpRenormalized, provenance)
    }
}

/// `‖Σ_s K_s* K_s - I‖` (operator norm).
pub fn tp_defect<T: Real>(e: &KrausEnsemble<T>) -> Result<T> {
    let id = CMatrix::identity(e.n);
    e.adjoint_unchecked(&id).hermitian_part().sub(&id).hermitian_op_norm()
}

/// `‖Σ_s K_s K_s* - I‖` (operator norm).
pub fn unital_defect<T: Real>(e: &KrausEnsemble<T>) -> Result<T> {
    let id = CMatrix::identity(e.n);
    e.forward_unchecked(&id).hermitian_part().sub(&id).hermitian_op_norm()
}

/// Relative threshold on Gram eigenvalues used by [`kraus_rank`].
pub const RANK_TOL: f64 = 1e-10;

/// Gram matrix `G_st = Tr(K_s* K_t)` of the effective Kraus operators.
pub fn kraus_gram<T: Real>(e: &KrausEnsemble<T>) -> CMatrix<T> {
    let d = e.d();
    let mut g = CMatrix::zeros(d, d);
    for s in 0..d {
        for t in s..d {
            let v = match &e.right_factor {
                None => e.ops[s].inner(&e.ops[t]),
                Some(f) => factored_inner(&e.ops[s], &e.ops[t], &f.rr),
            };
            g[(s, t)] = v;
            g[(t, s)] = v.conj();
        }
    }
    g
}

/// `Tr((A R)* (B R)) = Tr(A* B P)` with `P = R R*`.
fn factored_inner<T: Real>(a: &Matrix<T>, b: &Matrix<T>, p: &CMatrix<T>) -> Complex<T> {
    match (a, b) {
        (Matrix::Sparse(a), Matrix::Sparse(b)) => {
            let mut acc = czero::<T>();
            for i in 0..a.nrows() {
                let (ca, va) = a.row(i);
                let (cb, vb) = b.row(i);
                for (&ka, &x) in ca.iter().zip(va) {
                    let xc = x.conj();
                    for (&kb, &y) in cb.iter().zip(vb) {
                        acc += xc * y * p[(kb, ka)];
                    }
                }
            }
            acc
        }
        _ => {
            let bp = b.to_dense().matmul(p);
            a.to_dense().inner(&bp)
        }
    }
}

/// Rank of the Kraus Gram matrix at relative tolerance [`RANK_TOL`]; equals
/// the rank of the Choi matrix.
pub fn kraus_rank<T: Real>(e: &KrausEnsemble<T>) -> Result<usize> {
    let eig = kraus_gram(e).hermitian_eigenvalues()?;
    let max = eig.iter().fold(T::zero(), |m, &v| m.max(v));
    if max <= T::zero() {
        return Ok(0);
    }
    let thresh = T::lit(RANK_TOL) * max;
    Ok(eig.iter().filter(|&&v| v > thresh).count())
}

/// `C_Φ = Σ_ij Φ(E_ij) ⊗ E_ij`, row index `a n + i`, column index `b n + j`.
pub fn choi_matrix<T: Real>(e: &KrausEnsemble<T>) -> Result<CMatrix<T>> {
    let n = e.n;
    if n > MAX_CHOI_N {
        return Err(Error::TooLarge {
            what: "Choi matrix",
            n,
            max: MAX_CHOI_N,
        });
    }
    let d = e.d();
    // Columns of v are the row-major vectorizations of the Kraus operators:
    // C[(a,i),(b,j)] = Σ_s K_s[a,i] conj(K_s[b,j]).
    let mut v = CMatrix::zeros(n * n, d);
    for s in 0..d {
        let k = e.kraus(s).to_dense();
        for (idx, z) in k.as_slice().iter().enumerate() {
            v[(idx, s)] = *z;
        }
    }
    Ok(v.mul_op(crate::scalar::Op::N, &v, crate::scalar::Op::H))
}
