//! Perron-Frobenius fixed points of CP maps and von Neumann entropy.

use crate::channel::{TransferMode, TransferOperator};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Eigenvalues below `-PSD_CLIP` are set to zero when re-projecting the
/// power iterate onto the PSD cone.
pub const PSD_CLIP: f64 = 1e-12;

const DENSITY_TOL: f64 = 1e-10;

/// A Hermitian positive semidefinite matrix with unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T> {
    matrix: CMatrix<T>,
    eigenvalues: Vec<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let tol = T::lit(DENSITY_TOL);
        let herm = matrix.hermitian_defect();
        if herm > tol {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensityMatrix(format!("trace {} + {}i is not 1", tr.re, tr.im)));
        }
        let eigenvalues = matrix.hermitian_eigenvalues()?;
        if eigenvalues[0] < -tol {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {:e}", eigenvalues[0])));
        }
        Ok(Self { matrix, eigenvalues })
    }

    /// `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let v = T::one() / T::from_usize(n).expect("n representable");
        Self {
            matrix: CMatrix::identity(n).scale_real(v),
            eigenvalues: vec![v; n],
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// Trace-norm distance.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        self.matrix.sub(&other.matrix).hermitian_trace_norm()
    }
}

/// `-Tr(ρ log ρ)` in nats, summing over eigenvalues above `1e-14`.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> T {
    let cut = T::lit(1e-14);
    rho.eigenvalues.iter().filter(|&&l| l > cut).map(|&l| -l * l.ln()).sum()
}

#[derive(Clone, Debug)]
pub struct FixedPoint<T> {
    pub lambda1: T,
    pub state: DensityMatrix<T>,
    pub iterations: usize,
    /// `‖Φ(ρ) - λ₁ρ‖₁` at the returned state.
    pub residual: T,
}

/// Power iteration `ρ <- Φ(ρ) / Tr Φ(ρ)` from `I/n`, re-projected onto the
/// PSD cone after every step, until `‖Φ(ρ) - λρ‖₁ <= tol`.
pub fn leading_eigen_power<T: Real>(op: &TransferOperator<'_, T>, tol: f64, max_iters: usize) -> Result<FixedPoint<T>> {
    if op.mode() == TransferMode::Centered {
        return Err(Error::InvalidArgument(
            "power iteration needs a CP map, not a centered operator".into(),
        ));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = op.n();
    let tol_t = T::lit(tol);
    let clip = T::lit(PSD_CLIP);
    let mut rho = CMatrix::identity(n).scale_real(T::one() / T::from_usize(n).expect("n representable"));
    let mut last = (T::zero(), T::infinity());
    for it in 1..=max_iters.max(1) {
        let sigma = op.apply(&rho)?.hermitian_part();
        let lambda = sigma.trace().re;
        if lambda.is_nan() || lambda <= T::zero() {
            return Err(Error::ConvergenceFailure {
                iterations: it,
                residual: f64::NAN,
                tol,
            });
        }
        let residual = sigma.sub(&rho.scale_real(lambda)).hermitian_trace_norm()?;
        last = (lambda, residual);
        if residual <= tol_t {
            return Ok(FixedPoint {
                lambda1: lambda,
                state: DensityMatrix::new(rho)?,
                iterations: it,
                residual,
            });
        }
        let next = sigma.scale_real(T::one() / lambda);
        let eig = next.hermitian_eigen()?;
        rho = if eig.values[0] < -clip {
            let mut scaled = eig.vectors.clone();
            for i in 0..n {
                for (j, &v) in eig.values.iter().enumerate() {
                    let v = if v < -clip { T::zero() } else { v };
                    scaled[(i, j)] *= v;
                }
            }
            let p = scaled
                .mul_op(crate::scalar::Op::N, &eig.vectors, crate::scalar::Op::H)
                .hermitian_part();
            let tr = p.trace().re;
            p.scale_real(T::one() / tr)
        } else {
            next
        };
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iters,
        residual: last.1.as_f64(),
        tol,
    })
}
