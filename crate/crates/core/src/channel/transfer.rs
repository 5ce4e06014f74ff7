use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{KrausEnsemble, Normalization};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::profile::VarianceProfile;
use crate::scalar::Real;
use crate::spectral::{GramSide, LinearMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// `M_Φ`.
    Forward,
    /// `M_Φ*`.
    Adjoint,
    /// `M_Φ - E(M_Φ)`.
    Centered,
}

/// Matrix-free view of `M_Φ = Σ_s K_s ⊗ conj(K_s)` acting on row-major
/// vectorized `n x n` matrices, so that `M_Φ vec(X) = vec(Φ(X))`.
#[derive(Clone, Copy, Debug)]
pub struct TransferOperator<'a, T> {
    ensemble: &'a KrausEnsemble<T>,
    mode: TransferMode,
    profile: Option<&'a VarianceProfile<T>>,
}

impl<'a, T: Real> TransferOperator<'a, T> {
    pub fn forward(ensemble: &'a KrausEnsemble<T>) -> Self {
        Self {
            ensemble,
            mode: TransferMode::Forward,
            profile: None,
        }
    }

    pub fn adjoint(ensemble: &'a KrausEnsemble<T>) -> Self {
        Self {
            ensemble,
            mode: TransferMode::Adjoint,
            profile: None,
        }
    }

    /// `M_Φ - E(M_Φ)` for a raw ensemble sampled from `profile`.
    pub fn centered(ensemble: &'a KrausEnsemble<T>, profile: &'a VarianceProfile<T>) -> Result<Self> {
        if ensemble.normalization() != Normalization::RawOverSqrtD {
            return Err(Error::WrongNormalization {
                found: ensemble.normalization().name(),
            });
        }
        if profile.n() != ensemble.n() {
            return Err(Error::DimensionMismatch {
                expected: ensemble.n(),
                found: profile.n(),
            });
        }
        Ok(Self {
            ensemble,
            mode: TransferMode::Centered,
            profile: Some(profile),
        })
    }

    pub fn mode(&self) -> TransferMode {
        self.mode
    }

    pub fn ensemble(&self) -> &'a KrausEnsemble<T> {
        self.ensemble
    }

    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    fn check(&self, x: &CMatrix<T>) -> Result<()> {
        let n = self.n();
        if x.rows() != n || x.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if x.rows() != n { x.rows() } else { x.cols() },
            });
        }
        Ok(())
    }

    /// The operator applied to `X`.
    pub fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        self.check(x)?;
        Ok(self.apply_matrix(x))
    }

    /// The adjoint operator applied to `Y`.
    pub fn apply_adjoint(&self, y: &CMatrix<T>) -> Result<CMatrix<T>> {
        self.check(y)?;
        Ok(self.apply_adjoint_matrix(y))
    }

    fn apply_matrix(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match self.mode {
            TransferMode::Forward => self.ensemble.forward_unchecked(x),
            TransferMode::Adjoint => self.ensemble.adjoint_unchecked(x),
            TransferMode::Centered => {
                let mut out = self.ensemble.forward_unchecked(x);
                subtract_expected(self.profile.expect("centered mode has a profile"), x, &mut out, false);
                out
            }
        }
    }

    fn apply_adjoint_matrix(&self, y: &CMatrix<T>) -> CMatrix<T> {
        match self.mode {
            TransferMode::Forward => self.ensemble.adjoint_unchecked(y),
            TransferMode::Adjoint => self.ensemble.forward_unchecked(y),
            TransferMode::Centered => {
                let mut out = self.ensemble.adjoint_unchecked(y);
                subtract_expected(self.profile.expect("centered mode has a profile"), y, &mut out, true);
                out
            }
        }
    }

    fn wrap(&self, x: &[Complex<T>]) -> CMatrix<T> {
        let n = self.n();
        CMatrix::from_vec(n, n, x.to_vec()).expect("vector of length n^2")
    }
}

/// `out -= E_Φ(x)` where `E_Φ(X) = diag(η · diag X)`; with `transpose`, the
/// adjoint `diag(ηᵀ · diag X)`.
fn subtract_expected<T: Real>(eta: &VarianceProfile<T>, x: &CMatrix<T>, out: &mut CMatrix<T>, transpose: bool) {
    for (i, j, v) in eta.entries().iter() {
        let (dst, src) = if transpose { (j, i) } else { (i, j) };
        out[(dst, dst)] -= x[(src, src)] * v;
    }
}

impl<T: Real> LinearMap<T> for TransferOperator<'_, T> {
    fn dim(&self) -> usize {
        self.n() * self.n()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y.copy_from_slice(self.apply_matrix(&self.wrap(x)).as_slice());
    }

    fn apply_adjoint(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y.copy_from_slice(self.apply_adjoint_matrix(&self.wrap(x)).as_slice());
    }

    fn is_real(&self) -> bool {
        self.ensemble.is_real()
    }

    fn gram_side(&self) -> GramSide {
        // With a factored right factor, M̃ M̃* = M (P ⊗ conj P) M* needs two
        // dense products per step instead of four.
        match (self.ensemble.is_factored(), self.mode) {
            (true, TransferMode::Forward) => GramSide::Outer,
            _ => GramSide::Inner,
        }
    }

    fn apply_gram(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        match (self.ensemble.right_factor_parts(), self.mode) {
            (Some(f), TransferMode::Forward | TransferMode::Adjoint) => {
                let inner = self.ensemble.raw_adjoint(&self.wrap(x));
                let out = self.ensemble.raw_forward(&f.apply_rr(&inner));
                y.copy_from_slice(out.as_slice());
            }
            _ => {
                let out = match self.gram_side() {
                    GramSide::Inner => self.apply_adjoint_matrix(&self.apply_matrix(&self.wrap(x))),
                    GramSide::Outer => self.apply_matrix(&self.apply_adjoint_matrix(&self.wrap(x))),
                };
                y.copy_from_slice(out.as_slice());
            }
        }
    }
}
