use num_complex::Complex;
use proptest::prelude::*;
use qexp_core::linalg::Matrix;
use qexp_core::profile::{permutation_sum_profile, uniform_profile, VarianceProfile};
use qexp_core::sampler::{empirical_moment_check, sample_entry, sample_matrix, DistributionKind, EntryDistribution};
use qexp_core::SeedSpec;

fn draws(kind: DistributionKind, count: usize, seed: u64) -> Vec<Complex<f64>> {
    let dist = EntryDistribution::new(kind);
    let base = SeedSpec::new(seed);
    (0..count)
        .map(|k| sample_entry(&dist, base.at((k / 1000) as u32, (k % 1000) as u32)))
        .collect()
}

#[test]
fn rademacher_entries_are_signs() {
    for z in draws(DistributionKind::Rademacher, 1000, 3) {
        assert!(z == Complex::new(1.0, 0.0) || z == Complex::new(-1.0, 0.0), "{z}");
    }
}

#[test]
fn complex_rademacher_entries_are_fourth_roots_of_unity() {
    for z in draws(DistributionKind::ComplexRademacher, 1000, 4) {
        assert_eq!(z.norm_sqr(), 1.0);
        assert!(z.re == 0.0 || z.im == 0.0);
    }
}

#[test]
fn bounded_uniform_stays_in_interval() {
    let s3 = 3f64.sqrt();
    for z in draws(DistributionKind::BoundedUniform, 10_000, 5) {
        assert_eq!(z.im, 0.0);
        assert!(z.re.abs() <= s3);
    }
}

#[test]
fn same_seed_same_draw() {
    let dist = EntryDistribution::new(DistributionKind::ComplexGaussian);
    let seed = SeedSpec::new(42).with_trial(7).with_kraus(2).at(3, 4);
    let a: Complex<f64> = sample_entry(&dist, seed);
    let b: Complex<f64> = sample_entry(&dist, seed);
    assert_eq!(a, b);
    let c: Complex<f64> = sample_entry(&dist, seed.at(3, 5));
    assert_ne!(a, c);
}

#[test]
fn real_gaussian_unit_variance() {
    let xs = draws(DistributionKind::RealGaussian, 1_000_000, 11);
    let n = xs.len() as f64;
    let mean = xs.iter().map(|z| z.re).sum::<f64>() / n;
    let var = xs.iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
    assert!(xs.iter().all(|z| z.im == 0.0));
}

#[test]
fn unit_variance_and_pseudo_variance_all_kinds() {
    let count = 200_000;
    for kind in DistributionKind::ALL {
        let dist = EntryDistribution::new(kind);
        let xs = draws(kind, count, 17);
        let n = count as f64;
        let mean: Complex<f64> = xs.iter().sum::<Complex<f64>>() / n;
        let var = xs.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let pseudo: Complex<f64> = xs.iter().map(|z| z * z).sum::<Complex<f64>>() / n;
        // |ξ|² has variance at most E|ξ|⁴ = 3 here, so 5 standard errors is
        // well under 0.02.
        assert!(mean.norm() < 0.015, "{kind}: mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "{kind}: variance {var}");
        assert!((pseudo - dist.pseudo_variance).norm() < 0.02, "{kind}: pseudo-variance {pseudo}");
    }
}

#[test]
fn moment_check_rademacher_exact() {
    let dist = EntryDistribution::new(DistributionKind::Rademacher);
    let report = empirical_moment_check(&dist, 4, 100_000, SeedSpec::new(1)).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.sample, 1.0);
        assert_eq!(row.exact, 1.0);
    }
}

#[test]
fn moment_check_gaussian_fourth_moments() {
    let real = empirical_moment_check(
        &EntryDistribution::new(DistributionKind::RealGaussian),
        2,
        400_000,
        SeedSpec::new(2),
    )
    .unwrap();
    assert!((real.rows[1].sample - 3f64.sqrt()).abs() < 0.05, "{}", real.rows[1].sample);
    let cplx = empirical_moment_check(
        &EntryDistribution::new(DistributionKind::ComplexGaussian),
        2,
        400_000,
        SeedSpec::new(2),
    )
    .unwrap();
    assert!((cplx.rows[1].sample - 2f64.sqrt()).abs() < 0.05, "{}", cplx.rows[1].sample);
}

#[test]
fn moment_check_bounds_hold_for_every_kind() {
    for kind in DistributionKind::ALL {
        let dist = EntryDistribution::new(kind);
        let report = empirical_moment_check(&dist, 5, 200_000, SeedSpec::new(9)).unwrap();
        assert!(report.all_pass(), "{kind}: {:?}", report.rows);
        for p in 1..=5 {
            let exact = dist.absolute_moment(p).powf(1.0 / f64::from(p));
            assert!(exact <= dist.moment_bound(p) + 1e-12, "{kind} p={p}");
        }
    }
}

#[test]
fn moment_check_rejects_bad_arguments() {
    let dist = EntryDistribution::new(DistributionKind::Rademacher);
    assert!(empirical_moment_check(&dist, 6, 100_000, SeedSpec::new(0)).is_err());
    assert!(empirical_moment_check(&dist, 0, 100_000, SeedSpec::new(0)).is_err());
    assert!(empirical_moment_check(&dist, 2, 99_999, SeedSpec::new(0)).is_err());
}

#[test]
fn rademacher_on_uniform_profile_has_constant_modulus() {
    let eta: VarianceProfile<f64> = uniform_profile(4).unwrap();
    let dist = EntryDistribution::new(DistributionKind::Rademacher);
    let w = sample_matrix(&dist, &eta, SeedSpec::new(5)).to_dense();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(w[(i, j)].norm(), 0.5);
        }
    }
}

#[test]
fn zero_variance_entries_are_exactly_zero() {
    let eta = VarianceProfile::<f64>::from_triplets(3, vec![(0, 0, 0.5), (1, 2, 1.0), (2, 1, 0.25)]).unwrap();
    for kind in DistributionKind::ALL {
        let w = sample_matrix(&EntryDistribution::new(kind), &eta, SeedSpec::new(8)).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                if eta.get(i, j) == 0.0 {
                    assert_eq!(w[(i, j)], Complex::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn entries_do_not_depend_on_the_rest_of_the_profile() {
    // The draw at (i, j) comes from its own substream, so changing other
    // entries of η only rescales, never reshuffles.
    let dist = EntryDistribution::new(DistributionKind::ComplexGaussian);
    let a = VarianceProfile::<f64>::from_triplets(3, vec![(0, 1, 1.0), (2, 2, 1.0)]).unwrap();
    let b = VarianceProfile::<f64>::from_triplets(3, vec![(0, 1, 0.25), (1, 0, 1.0), (2, 2, 1.0)]).unwrap();
    let seed = SeedSpec::new(12).with_trial(1).with_kraus(0);
    let wa = sample_matrix(&dist, &a, seed).to_dense();
    let wb = sample_matrix(&dist, &b, seed).to_dense();
    assert!((wa[(0, 1)] * 0.5 - wb[(0, 1)]).norm() < 1e-15);
    assert_eq!(wa[(2, 2)], wb[(2, 2)]);
}

#[test]
fn sparse_profile_gives_sparse_storage() {
    let eta: VarianceProfile<f64> = permutation_sum_profile(100, 8, SeedSpec::new(3)).unwrap();
    let w = sample_matrix(&EntryDistribution::new(DistributionKind::Rademacher), &eta, SeedSpec::new(4));
    assert!(matches!(w, Matrix::Sparse(_)));
    assert!(w.nnz() <= 800);
    let dense: VarianceProfile<f64> = uniform_profile(8).unwrap();
    assert!(matches!(
        sample_matrix(&EntryDistribution::new(DistributionKind::Rademacher), &dense, SeedSpec::new(4)),
        Matrix::Dense(_)
    ));
}

#[test]
fn ginibre_entry_variance_monte_carlo() {
    let n = 64;
    let eta: VarianceProfile<f64> = uniform_profile(n).unwrap();
    let dist = EntryDistribution::new(DistributionKind::ComplexGaussian);
    // |W_11|² is exponential with mean 1/64, so its standard deviation
    // equals its mean.
    let samples = 10_000;
    let values: Vec<f64> = (0..samples)
        .map(|t| sample_entry::<f64>(&dist, SeedSpec::new(21).with_trial(t).at(0, 0)).norm_sqr() / n as f64)
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let stderr = (1.0 / n as f64) / (samples as f64).sqrt();
    assert!((mean - 1.0 / n as f64).abs() < 3.0 * stderr, "mean {mean}");
    // The matrix sampler uses the same substreams.
    let w = sample_matrix(&dist, &eta, SeedSpec::new(21).with_trial(3)).to_dense();
    let direct: Complex<f64> = sample_entry(&dist, SeedSpec::new(21).with_trial(3).at(0, 0));
    assert!((w[(0, 0)] - direct / (n as f64).sqrt()).norm() < 1e-15);
}

#[test]
fn entry_variance_and_pseudo_variance_match_profile() {
    let eta = VarianceProfile::<f64>::from_triplets(
        4,
        (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j, 0.05 * (1 + i + 2 * j) as f64)))
            .collect(),
    )
    .unwrap();
    let trials = 100_000u32;
    for kind in [DistributionKind::RealGaussian, DistributionKind::ComplexRademacher] {
        let dist = EntryDistribution::new(kind);
        let mut second = [0.0; 16];
        let mut fourth = [0.0; 16];
        let mut pseudo = vec![Complex::new(0.0, 0.0); 16];
        let mut cross = 0.0;
        let mut cross_sq = 0.0;
        for t in 0..trials {
            let w = sample_matrix(&dist, &eta, SeedSpec::new(77).with_trial(t)).to_dense();
            for (k, z) in w.as_slice().iter().enumerate() {
                second[k] += z.norm_sqr();
                fourth[k] += z.norm_sqr().powi(2);
                pseudo[k] += z * z;
            }
            let c = (w[(0, 1)] * w[(2, 3)].conj()).re;
            cross += c;
            cross_sq += c * c;
        }
        let m = f64::from(trials);
        for k in 0..16 {
            let target = eta.get(k / 4, k % 4);
            let mean = second[k] / m;
            let var = fourth[k] / m - mean * mean;
            let stderr = (var / m).sqrt().max(1e-12);
            assert!(
                (mean - target).abs() <= 3.0 * stderr + 1e-12,
                "{kind} entry {k}: {mean} vs {target}"
            );
            let zeta = pseudo[k] / m;
            let expected = dist.pseudo_variance * target;
            // E|W²|² = E|W|⁴ bounds the variance of each component of W².
            let z_err = (fourth[k] / m / m).sqrt();
            assert!(
                (zeta - expected).norm() <= 4.0 * z_err + 1e-12,
                "{kind} entry {k}: ζ {zeta} vs {expected}"
            );
        }
        let cm = cross / m;
        let cs = ((cross_sq / m - cm * cm) / m).sqrt();
        assert!(cm.abs() <= 4.0 * cs, "{kind}: covariance {cm} vs stderr {cs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_matrix_is_pure(seed in any::<u64>(), trial in 0u32..1000, kind_idx in 0usize..5) {
        let kind = DistributionKind::ALL[kind_idx];
        let eta: VarianceProfile<f64> = permutation_sum_profile(12, 3, SeedSpec::new(seed)).unwrap();
        let s = SeedSpec::new(seed).with_trial(trial);
        let a = sample_matrix(&EntryDistribution::new(kind), &eta, s);
        let b = sample_matrix(&EntryDistribution::new(kind), &eta, s);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn distribution_tokens_round_trip(kind_idx in 0usize..5) {
        let kind = DistributionKind::ALL[kind_idx];
        prop_assert_eq!(kind.token().parse::<DistributionKind>().unwrap(), kind);
    }
}
