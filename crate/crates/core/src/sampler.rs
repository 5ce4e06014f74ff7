//! Scalar entry laws and sampling of random matrices with a variance profile.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CsrMatrix, Matrix};
use crate::profile::VarianceProfile;
use crate::rng::{gaussian_pair, unit_open, Domain, SeedSpec};
use crate::scalar::Real;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    ComplexGaussian,
    RealGaussian,
    Rademacher,
    /// Uniform on `{1, i, -1, -i}`.
    ComplexRademacher,
    /// Uniform on the real interval `[-√3, √3]`.
    BoundedUniform,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 5] = [
        DistributionKind::ComplexGaussian,
        DistributionKind::RealGaussian,
        DistributionKind::Rademacher,
        DistributionKind::ComplexRademacher,
        DistributionKind::BoundedUniform,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DistributionKind::ComplexGaussian => "complex-gaussian",
            DistributionKind::RealGaussian => "real-gaussian",
            DistributionKind::Rademacher => "rademacher",
            DistributionKind::ComplexRademacher => "complex-rademacher",
            DistributionKind::BoundedUniform => "bounded-uniform",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.token() == s).ok_or_else(|| {
            let tokens: Vec<_> = Self::ALL.iter().map(|k| k.token()).collect();
            Error::InvalidArgument(format!("unknown distribution `{s}` (expected one of {})", tokens.join(", ")))
        })
    }
}

/// A centered law with unit variance.
///
/// `beta` is the moment-growth exponent: `(E|ξ|^{2p})^{1/p} <= C p^β`.
/// `pseudo_variance` is `E(ξ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: DistributionKind,
    pub beta: f64,
    pub pseudo_variance: Complex<f64>,
}

impl EntryDistribution {
    pub fn new(kind: DistributionKind) -> Self {
        let (beta, zeta) = match kind {
            DistributionKind::ComplexGaussian => (1.0, 0.0),
            DistributionKind::RealGaussian => (1.0, 1.0),
            DistributionKind::Rademacher => (0.0, 1.0),
            DistributionKind::ComplexRademacher => (0.0, 0.0),
            DistributionKind::BoundedUniform => (0.0, 1.0),
        };
        Self {
            kind,
            beta,
            pseudo_variance: Complex::new(zeta, 0.0),
        }
    }

    /// `E|ξ|^4`.
    pub fn fourth_moment(&self) -> f64 {
        self.absolute_moment(2)
    }

    /// Closed-form `E|ξ|^{2p}`.
    pub fn absolute_moment(&self, p: u32) -> f64 {
        let p_f = f64::from(p);
        match self.kind {
            DistributionKind::ComplexGaussian => (1..=p).map(f64::from).product(),
            DistributionKind::RealGaussian => (1..=p).map(|k| f64::from(2 * k - 1)).product(),
            DistributionKind::Rademacher | DistributionKind::ComplexRademacher => 1.0,
            DistributionKind::BoundedUniform => 3f64.powf(p_f) / (2.0 * p_f + 1.0),
        }
    }

    /// The constant `C` in the moment bound, fixed per kind so that the
    /// closed-form moments satisfy the bound for every `p`.
    pub fn moment_constant(&self) -> f64 {
        match self.kind {
            DistributionKind::BoundedUniform => 3.0,
            _ => 1.0,
        }
    }

    pub fn moment_bound(&self, p: u32) -> f64 {
        self.moment_constant() * f64::from(p).powf(self.beta)
    }
}

impl From<DistributionKind> for EntryDistribution {
    fn from(kind: DistributionKind) -> Self {
        Self::new(kind)
    }
}

fn draw(kind: DistributionKind, block: [u32; 4]) -> Complex<f64> {
    match kind {
        DistributionKind::ComplexGaussian => {
            let (g1, g2) = gaussian_pair(block);
            Complex::new(g1, g2) * std::f64::consts::FRAC_1_SQRT_2
        }
        DistributionKind::RealGaussian => Complex::new(gaussian_pair(block).0, 0.0),
        DistributionKind::Rademacher => Complex::new(if block[0] & 1 == 0 { 1.0 } else { -1.0 }, 0.0),
        DistributionKind::ComplexRademacher => match block[0] & 3 {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, 1.0),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, -1.0),
        },
        DistributionKind::BoundedUniform => Complex::new(SQRT_3 * (2.0 * unit_open(block[0], block[1]) - 1.0), 0.0),
    }
}

/// One draw of ξ at the coordinates in `seed`.
pub fn sample_entry<T: Real>(dist: &EntryDistribution, seed: SeedSpec) -> Complex<T> {
    let z = draw(dist.kind, seed.block(Domain::Entries));
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// `W_ij = √η_ij · ξ_ij` with `ξ_ij` drawn at `seed.at(i, j)`.
///
/// Zero-variance entries are exactly zero and draw nothing. Storage is sparse
/// whenever the profile is.
pub fn sample_matrix<T: Real>(dist: &EntryDistribution, eta: &VarianceProfile<T>, seed: SeedSpec) -> Matrix<T> {
    let n = eta.n();
    let entries = eta.entries();
    let row_values = |i: usize| -> Vec<(usize, Complex<T>)> {
        let (cols, vals) = entries.row(i);
        cols.iter()
            .zip(vals)
            .map(|(&j, &v)| (j, sample_entry::<T>(dist, seed.at(i as u32, j as u32)) * v.sqrt()))
            .collect()
    };
    if eta.is_sparse() {
        let triplets: Vec<_> = (0..n)
            .flat_map(|i| row_values(i).into_iter().map(move |(j, z)| (i, j, z)))
            .collect();
        Matrix::Sparse(CsrMatrix::from_triplets(n, n, triplets).expect("profile indices in range"))
    } else {
        let rows: Vec<Vec<Complex<T>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![Complex::new(T::zero(), T::zero()); n];
                for (j, z) in row_values(i) {
                    row[j] = z;
                }
                row
            })
            .collect();
        Matrix::Dense(CMatrix::from_vec(n, n, rows.concat()).expect("n x n buffer"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub p: u32,
    /// Sample `(E|ξ|^{2p})^{1/p}`.
    pub sample: f64,
    /// Closed-form `(E|ξ|^{2p})^{1/p}`.
    pub exact: f64,
    /// `C p^β`.
    pub bound: f64,
    /// Sample moment exceeds the bound by more than 20%.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub distribution: DistributionKind,
    pub constant: f64,
    pub beta: f64,
    pub n_samples: usize,
    pub sample_mean: Complex<f64>,
    pub sample_pseudo_variance: Complex<f64>,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| !r.flagged)
    }
}

/// Sample moments `(E|ξ|^{2p})^{1/p}` for `p = 1..=p_max` against `C p^β`.
pub fn empirical_moment_check(dist: &EntryDistribution, p_max: u32, n_samples: usize, seed: SeedSpec) -> Result<MomentReport> {
    if p_max == 0 || p_max > 5 {
        return Err(Error::InvalidArgument(format!("p_max must be in 1..=5, got {p_max}")));
    }
    if n_samples < 100_000 {
        return Err(Error::InvalidArgument(format!("need at least 1e5 samples, got {n_samples}")));
    }
    let mut sums = vec![0.0f64; p_max as usize];
    let mut mean = Complex::new(0.0, 0.0);
    let mut pseudo = Complex::new(0.0, 0.0);
    for k in 0..n_samples {
        let z = draw(dist.kind, seed.at((k >> 32) as u32, k as u32).block(Domain::Entries));
        mean += z;
        pseudo += z * z;
        let a = z.norm_sqr();
        let mut pow = 1.0;
        for s in sums.iter_mut() {
            pow *= a;
            *s += pow;
        }
    }
    let nf = n_samples as f64;
    let rows = (1..=p_max)
        .map(|p| {
            let inv = 1.0 / f64::from(p);
            let sample = (sums[p as usize - 1] / nf).powf(inv);
            let bound = dist.moment_bound(p);
            MomentRow {
                p,
                sample,
                exact: dist.absolute_moment(p).powf(inv),
                bound,
                flagged: sample > 1.2 * bound,
            }
        })
        .collect();
    Ok(MomentReport {
        distribution: dist.kind,
        constant: dist.moment_constant(),
        beta: dist.beta,
        n_samples,
        sample_mean: mean / nf,
        sample_pseudo_variance: pseudo / nf,
        rows,
    })
}
