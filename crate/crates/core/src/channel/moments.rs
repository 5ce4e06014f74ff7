//! Closed-form first and second moments of `W ⊗ conj(W)` for a single
//! profile-shaped random matrix `W`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CsrMatrix};
use crate::profile::VarianceProfile;
use crate::sampler::EntryDistribution;
use crate::scalar::{czero, Real};
use crate::spectral::LinearMap;

/// Largest `n` for which the second-moment parts are assembled.
pub const MAX_DENSE_MOMENT_N: usize = 32;

/// `E(M_Φ)` and, when assembled, the covariance parts `R`, `S`, `T` with
/// `E(X X*) = R + S + T` for `X = W ⊗ conj(W) - E(W ⊗ conj(W))`.
///
/// All `n² x n²` objects use the row-major pair index `(i, i') -> i n + i'`.
#[derive(Clone, Debug)]
pub struct MomentDecomposition<T> {
    pub n: usize,
    /// Nonzero exactly at `((i,i),(j,j))` with value `η_ij`.
    pub expected_transfer: CsrMatrix<T>,
    /// Diagonal of `R`: entry `(i,i')` is `r_i r_i'` with `r` the row sums.
    pub r: Option<Vec<T>>,
    /// Supported on `((i,k),(k,i))` with value `Σ_j ζ_ij conj(ζ_kj)`.
    pub s: Option<CsrMatrix<Complex<T>>>,
    /// Diagonal of `T`, nonzero only at `(i,i)`:
    /// `Σ_j (E|W_ij|⁴ - 2 η_ij² - |ζ_ij|²)`.
    pub t: Option<Vec<T>>,
}

/// `E(M_Φ) = Σ_ij η_ij E_ij ⊗ E_ij` as a sparse `n² x n²` matrix.
pub fn expected_transfer<T: Real>(profile: &VarianceProfile<T>) -> MomentDecomposition<T> {
    let n = profile.n();
    let trip = profile.entries().iter().map(|(i, j, v)| (i * n + i, j * n + j, v)).collect();
    MomentDecomposition {
        n,
        expected_transfer: CsrMatrix::from_triplets(n * n, n * n, trip).expect("indices in range"),
        r: None,
        s: None,
        t: None,
    }
}

/// [`expected_transfer`] plus the covariance parts for entries drawn from
/// `dist`, using its closed-form fourth moment.
pub fn analytic_second_moment<T: Real>(profile: &VarianceProfile<T>, dist: &EntryDistribution) -> Result<MomentDecomposition<T>> {
    let n = profile.n();
    if n > MAX_DENSE_MOMENT_N {
        return Err(Error::TooLarge {
            what: "second-moment decomposition",
            n,
            max: MAX_DENSE_MOMENT_N,
        });
    }
    let mut out = expected_transfer(profile);
    let rs = profile.row_sums();
    let r = (0..n * n).map(|p| rs[p / n] * rs[p % n]).collect();

    let zeta = dist.pseudo_variance;
    let zeta2 = T::lit(zeta.norm_sqr());
    let dense: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| profile.get(i, j)).collect()).collect();
    let mut s_trip = Vec::new();
    if zeta2 > T::zero() {
        for i in 0..n {
            for k in 0..n {
                let v: T = (0..n).map(|j| dense[i][j] * dense[k][j]).sum::<T>() * zeta2;
                if v != T::zero() {
                    s_trip.push((i * n + k, k * n + i, Complex::new(v, T::zero())));
                }
            }
        }
    }
    let s = CsrMatrix::from_triplets(n * n, n * n, s_trip)?;

    let m4 = T::lit(dist.fourth_moment());
    let two = T::lit(2.0);
    let mut t = vec![T::zero(); n * n];
    for (i, row) in dense.iter().enumerate() {
        t[i * n + i] = row.iter().map(|&e| (m4 - two - zeta2) * e * e).sum();
    }
    out.r = Some(r);
    out.s = Some(s);
    out.t = Some(t);
    Ok(out)
}

impl<T: Real> MomentDecomposition<T> {
    pub fn expected_transfer_dense(&self) -> Result<CMatrix<T>> {
        if self.n > MAX_DENSE_MOMENT_N {
            return Err(Error::TooLarge {
                what: "dense expected transfer",
                n: self.n,
                max: MAX_DENSE_MOMENT_N,
            });
        }
        Ok(self.expected_transfer.to_dense_complex())
    }

    /// `R + S + T` as a dense `n² x n²` matrix.
    pub fn covariance_dense(&self) -> Result<CMatrix<T>> {
        let (Some(r), Some(s), Some(t)) = (&self.r, &self.s, &self.t) else {
            return Err(Error::InvalidArgument("second-moment parts were not assembled".into()));
        };
        let mut out = s.to_dense();
        for (p, (&rv, &tv)) in r.iter().zip(t).enumerate() {
            out[(p, p)] += Complex::new(rv + tv, T::zero());
        }
        Ok(out)
    }
}

/// `E(M_Φ)` as a matrix-free operator.
impl<T: Real> LinearMap<T> for MomentDecomposition<T> {
    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.expected_transfer.row(r);
            *yr = cols.iter().zip(vals).fold(czero(), |acc, (&c, &v)| acc + x[c] * v);
        }
    }

    fn apply_adjoint(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        y.iter_mut().for_each(|v| *v = czero());
        for (r, c, v) in self.expected_transfer.iter() {
            y[c] += x[r] * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::uniform_profile;
    use crate::sampler::DistributionKind;

    #[test]
    fn expected_transfer_pattern() {
        let p = uniform_profile::<f64>(3).unwrap();
        let m = expected_transfer(&p);
        assert_eq!(m.expected_transfer.nnz(), 9);
        for (r, c, v) in m.expected_transfer.iter() {
            assert_eq!(r % 4, 0);
            assert_eq!(c % 4, 0);
            assert!((v - 1.0 / 3.0).abs() < 1e-16);
        }
    }

    #[test]
    fn complex_gaussian_has_no_swap_part() {
        let p = uniform_profile::<f64>(3).unwrap();
        let m = analytic_second_moment(&p, &EntryDistribution::new(DistributionKind::ComplexGaussian)).unwrap();
        assert_eq!(m.s.as_ref().unwrap().nnz(), 0);
        // E|ξ|⁴ = 2 and ζ = 0: the diagonal correction vanishes.
        assert!(m.t.as_ref().unwrap().iter().all(|&v| v.abs() < 1e-16));
    }

    #[test]
    fn rademacher_parts() {
        let p = uniform_profile::<f64>(2).unwrap();
        let m = analytic_second_moment(&p, &EntryDistribution::new(DistributionKind::Rademacher)).unwrap();
        // T_(i,i) = Σ_j (1 - 2 - 1) η_ij² = -2 · 2 · 1/4.
        let t = m.t.as_ref().unwrap();
        assert!((t[0] + 1.0).abs() < 1e-15 && (t[3] + 1.0).abs() < 1e-15);
        assert_eq!(t[1], 0.0);
        let s = m.s.as_ref().unwrap();
        assert!((s.get(1, 2).re - 0.5).abs() < 1e-15);
        assert!(m.r.as_ref().unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn size_guard() {
        let p = uniform_profile::<f64>(MAX_DENSE_MOMENT_N + 1).unwrap();
        assert!(analytic_second_moment(&p, &EntryDistribution::new(DistributionKind::Rademacher)).is_err());
    }
}
