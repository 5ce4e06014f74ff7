//! Matrix-free spectral estimation, dense oracles, fixed points and entropy.

mod fixed_point;
mod lanczos;
mod oracle;

pub use fixed_point::{leading_eigen_power, von_neumann_entropy, DensityMatrix, FixedPoint, PSD_CLIP};
pub use lanczos::{top_singular_pair, top_singular_values};
pub use oracle::{dense_eigs_oracle, dense_svd_oracle, materialize, MAX_ORACLE_DIM};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{czero, Real};

/// Which Gram operator a Krylov solver should iterate on. Both have the
/// singular values of the operator squared as eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramSide {
    /// `M* M`.
    Inner,
    /// `M M*`.
    Outer,
}

/// A square linear operator on `C^dim`, available only through its action.
pub trait LinearMap<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`.
    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]);

    /// `y = M* x`.
    fn apply_adjoint(&self, x: &[Complex<T>], y: &mut [Complex<T>]);

    fn gram_side(&self) -> GramSide {
        GramSide::Inner
    }

    /// Whether the map sends real vectors to real vectors. The solvers then
    /// draw real random vectors, and real-valued kernels stay on their real
    /// fast paths.
    fn is_real(&self) -> bool {
        false
    }

    /// `y = M* M x` or `y = M M* x` according to [`LinearMap::gram_side`].
    fn apply_gram(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let mut t = vec![czero(); self.dim()];
        match self.gram_side() {
            GramSide::Inner => {
                self.apply(x, &mut t);
                self.apply_adjoint(&t, y);
            }
            GramSide::Outer => {
                self.apply_adjoint(x, &mut t);
                self.apply(&t, y);
            }
        }
    }
}

/// Dense matrix as a [`LinearMap`].
impl<T: Real> LinearMap<T> for crate::linalg::CMatrix<T> {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "LinearMap needs a square matrix");
        self.rows()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).fold(czero(), |acc, (a, b)| acc + a * b);
        }
    }

    fn apply_adjoint(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y.iter_mut().for_each(|v| *v = czero());
        for (i, &xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a.conj() * xi;
            }
        }
    }
}

/// Krylov solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual tolerance on each extracted Gram eigenpair.
    pub tol: f64,
    /// Budget of Gram-operator applications.
    pub max_iters: usize,
    /// Number of leading singular values to extract.
    pub nev: usize,
    /// Seed of the random start vector.
    pub seed: u64,
    /// Krylov basis size cap; derived from a memory budget when absent.
    pub max_basis: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 2000,
            nev: 2,
            seed: 0x5eed,
            max_basis: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub(crate) fn profile_default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 20_000,
            ..Self::default()
        }
    }
}

/// Leading singular values of an operator with convergence metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub s1: f64,
    pub s2: f64,
    /// All extracted singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    pub lambda1: Option<Complex<f64>>,
    /// `√d · s2` when the number of Kraus operators is known.
    pub gap_ratio: Option<f64>,
    /// Gram-operator applications used.
    pub iterations: usize,
    /// Relative residual of each extracted Gram eigenpair.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl SpectralReport {
    pub fn with_degree(mut self, d: usize) -> Self {
        self.gap_ratio = Some((d as f64).sqrt() * self.s2);
        self
    }
}
