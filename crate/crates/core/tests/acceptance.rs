//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Pass criterion numbers to run a subset, e.g.
//! `cargo test -p qexp-core --test acceptance -- 1 6 9`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex;
use qexp_core::channel::{
    analytic_second_moment, build_ensemble, choi_matrix, compute_sigma_with, kraus_rank, renormalize_tp, tp_defect, KrausEnsemble,
    TransferOperator,
};
use qexp_core::harness::{
    fit_scaling, median, render_report, run_experiment, DegreeSpec, ExperimentConfig, FitField, ProfileModel, ProfileSpec, ReportFormat,
    RECORDS_CSV,
};
use qexp_core::linalg::CMatrix;
use qexp_core::profile::{permutation_sum_profile, profile_s2, uniform_profile, VarianceProfile};
use qexp_core::sampler::{sample_matrix, DistributionKind, EntryDistribution};
use qexp_core::spectral::{
    dense_eigs_oracle, dense_svd_oracle, leading_eigen_power, materialize, top_singular_pair, von_neumann_entropy, SolverOptions,
};
use qexp_core::SeedSpec;

/// Krylov tolerance for the large sweeps. A relative Gram residual of
/// `1e-4` bounds the relative error of `s²` by the same amount, far inside
/// the bands checked below.
const SWEEP_TOL: f64 = 1e-4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn ginibre(n: usize, d: usize, seed: SeedSpec) -> KrausEnsemble<f64> {
    let eta = uniform_profile(n).unwrap();
    build_ensemble(&eta, &EntryDistribution::new(DistributionKind::ComplexGaussian), d, seed).unwrap()
}

fn medians_by_degree(records: &[qexp_core::harness::ExperimentRecord], degrees: &[usize]) -> Vec<(usize, f64, usize)> {
    degrees
        .iter()
        .map(|&d| {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.d == d && r.error.is_none() && r.spectral_converged == Some(true))
                .filter_map(|r| r.sqrt_d_times_s2)
                .collect();
            let used = v.len();
            (d, median(&mut v).unwrap_or(f64::NAN), used)
        })
        .collect()
}

fn c1_oracle_equivalence() -> Verdict {
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let shapes = [(2, 3), (3, 2), (4, 5), (5, 6), (6, 4), (7, 3), (8, 6), (9, 2), (10, 4), (10, 6)];
    for (k, kind) in DistributionKind::ALL.into_iter().enumerate() {
        let dist = EntryDistribution::new(kind);
        for (s, &(n, d)) in shapes.iter().enumerate() {
            let seed = SeedSpec::new(1000 + (10 * k + s) as u64);
            let eta: VarianceProfile<f64> = if s % 2 == 0 {
                uniform_profile(n).unwrap()
            } else {
                permutation_sum_profile(n, 3.min(n), seed).unwrap()
            };
            let raw = build_ensemble(&eta, &dist, d, seed).unwrap();
            let e = if s % 3 == 2 { raw } else { renormalize_tp(&raw).unwrap_or(raw) };
            let op = TransferOperator::forward(&e);
            let r = top_singular_pair(&op, &SolverOptions::default()).unwrap();
            let sv = dense_svd_oracle(&op).unwrap();
            let e1 = (r.s1 - sv[0]).abs() / sv[0];
            let e2 = (r.s2 - sv[1]).abs() / sv[1];
            worst = worst.max(e1).max(e2);
            if !(r.converged && e1 <= 1e-8 && e2 <= 1e-8) {
                failures.push(format!("{kind} n={n} d={d}"));
            }
            instances += 1;
        }
    }
    verdict(
        failures.is_empty() && instances >= 50,
        format!("{instances} instances, worst relative error {worst:.2e}, failures {failures:?}"),
    )
}

fn c2_tp_exactness() -> Verdict {
    let mut worst_defect: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    let mut ok = true;
    for n in [8, 64, 256] {
        for d in [4, 16, 64] {
            let e = renormalize_tp(&ginibre(n, d, SeedSpec::new(2).with_trial((n * 100 + d) as u32))).unwrap();
            let defect = tp_defect(&e).unwrap();
            let fp = leading_eigen_power(&TransferOperator::forward(&e), 1e-10, 50_000).unwrap();
            let dl = (fp.lambda1 - 1.0).abs();
            worst_defect = worst_defect.max(defect);
            worst_lambda = worst_lambda.max(dl);
            ok &= defect <= 1e-10 && dl <= 1e-8;
        }
    }
    verdict(
        ok,
        format!("9 instances, max tp_defect {worst_defect:.2e}, max |lambda1 - 1| {worst_lambda:.2e}"),
    )
}

fn c3_spectral_gap_rate() -> Verdict {
    let degrees = [8, 16, 32, 64];
    let cfg = ExperimentConfig {
        n: vec![256],
        d: DegreeSpec::List(degrees.to_vec()),
        trials: 10,
        distribution: DistributionKind::ComplexGaussian,
        profile: ProfileSpec {
            model: ProfileModel::Uniform,
            degree: None,
            path: None,
        },
        tp_renormalize: true,
        seed: 3,
        tol: SWEEP_TOL,
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&cfg).unwrap();
    let medians = medians_by_degree(&out.records, &degrees);
    let in_band = medians.iter().all(|&(_, m, used)| used >= 10 && (0.5..=2.5).contains(&m));
    let values: Vec<f64> = medians.iter().map(|m| m.1).collect();
    let ratio = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / values.iter().cloned().fold(f64::INFINITY, f64::min);
    let fit = fit_scaling(&out.records, FitField::S2, Some(256));
    let exponent = fit.as_ref().map_or(f64::NAN, |f| f.exponent);
    let shown: Vec<String> = medians.iter().map(|(d, m, _)| format!("d={d}: {m:.3}")).collect();
    verdict(
        in_band && ratio <= 1.6 && (-0.65..=-0.35).contains(&exponent),
        format!(
            "median sqrt(d)*s2 [{}], max/min {ratio:.3}, fit exponent {exponent:.3}",
            shown.join(", ")
        ),
    )
}

fn c4_sparse_model() -> Verdict {
    let cfg = ExperimentConfig {
        n: vec![2000],
        d: DegreeSpec::List(vec![16]),
        trials: 10,
        distribution: DistributionKind::Rademacher,
        profile: ProfileSpec {
            model: ProfileModel::PermSum,
            degree: Some(16),
            path: None,
        },
        tp_renormalize: true,
        seed: 4,
        tol: SWEEP_TOL,
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&cfg).unwrap();
    let (_, m, used) = medians_by_degree(&out.records, &[16])[0];
    verdict(
        used == 10 && m <= 3.5,
        format!(
            "median sqrt(d)*s2 = {m:.3} over {used} converged trials (failed {})",
            out.manifest.failed
        ),
    )
}

fn c5_sigma_concentration() -> Verdict {
    let mut ok = true;
    let mut shown = Vec::new();
    for d in [16, 64] {
        let mut v: Vec<f64> = (0..10)
            .map(|t| {
                let e = ginibre(256, d, SeedSpec::new(5).with_trial(t));
                (d as f64).sqrt() * compute_sigma_with(&e, false).unwrap().deviation
            })
            .collect();
        let m = median(&mut v).unwrap();
        ok &= (0.3..=4.0).contains(&m);
        shown.push(format!("d={d}: {m:.3}"));
    }
    verdict(ok, format!("median sqrt(d)*|Sigma - I| [{}]", shown.join(", ")))
}

/// Largest entrywise deviations of the Monte Carlo `E(W ⊗ conj W)` and
/// `E(X X*)` from their closed forms.
fn moment_deviation(n: usize, kind: DistributionKind, samples: u32) -> (f64, f64) {
    let eta: VarianceProfile<f64> = uniform_profile(n).unwrap();
    let dist = EntryDistribution::new(kind);
    let analytic = analytic_second_moment(&eta, &dist).unwrap();
    let expected = analytic.expected_transfer_dense().unwrap();
    let covariance = analytic.covariance_dense().unwrap();
    let m = n * n;
    let mut mean = vec![Complex::new(0.0, 0.0); m * m];
    let mut second = vec![Complex::new(0.0, 0.0); m * m];
    for t in 0..samples {
        let w = sample_matrix(&dist, &eta, SeedSpec::new(6).with_trial(t)).to_dense();
        let x = w.kron(&w.conj());
        let xc = x.sub(&expected);
        for p in 0..m {
            for q in 0..m {
                mean[p * m + q] += x[(p, q)];
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..m {
                    acc += xc[(p, r)] * xc[(q, r)].conj();
                }
                second[p * m + q] += acc;
            }
        }
    }
    let s = f64::from(samples);
    let mut dev_mean: f64 = 0.0;
    let mut dev_cov: f64 = 0.0;
    for p in 0..m {
        for q in 0..m {
            dev_mean = dev_mean.max((mean[p * m + q] / s - expected[(p, q)]).norm());
            dev_cov = dev_cov.max((second[p * m + q] / s - covariance[(p, q)]).norm());
        }
    }
    (dev_mean, dev_cov)
}

fn c6_moment_identities() -> Verdict {
    let samples = 200_000;
    let (m3, c3) = moment_deviation(3, DistributionKind::Rademacher, samples);
    let (m4, c4) = moment_deviation(4, DistributionKind::ComplexGaussian, samples);
    verdict(
        [m3, c3, m4, c4].iter().all(|&v| v <= 0.02),
        format!("{samples} samples; n=3 rademacher: mean {m3:.4}, R+S+T {c3:.4}; n=4 complex-gaussian: mean {m4:.4}, R+S+T {c4:.4}"),
    )
}

fn c7_profile_quality() -> Verdict {
    let d = 16;
    let bound = 3.0 / (d as f64).sqrt();
    let values: Vec<f64> = (0..20)
        .map(|seed| {
            profile_s2(&permutation_sum_profile::<f64>(2000, d, SeedSpec::new(seed)).unwrap())
                .unwrap()
                .1
        })
        .collect();
    let hits = values.iter().filter(|&&s| s <= bound).count();
    let worst = values.iter().cloned().fold(0.0, f64::max);
    let (_, uniform_s2) = profile_s2(&uniform_profile::<f64>(256).unwrap()).unwrap();
    verdict(
        hits >= 18 && uniform_s2.abs() <= 1e-10,
        format!("{hits}/20 seeds with s2(eta) <= {bound}, largest {worst:.4}; uniform s2 = {uniform_s2:.1e}"),
    )
}

fn c8_fixed_point_entropy() -> Verdict {
    let (n, d) = (256, 64);
    let target = 0.9 * (n as f64).ln();
    let mut shown = Vec::new();
    let mut ok = true;
    let models: [(&str, DistributionKind); 2] = [
        ("uniform", DistributionKind::ComplexGaussian),
        ("perm-sum", DistributionKind::Rademacher),
    ];
    for (name, kind) in models {
        let mut entropies: Vec<f64> = (0..5)
            .map(|t| {
                let seed = SeedSpec::new(8).with_trial(t);
                let eta: VarianceProfile<f64> = if name == "uniform" {
                    uniform_profile(n).unwrap()
                } else {
                    permutation_sum_profile(n, d, seed).unwrap()
                };
                let e = renormalize_tp(&build_ensemble(&eta, &EntryDistribution::new(kind), d, seed).unwrap()).unwrap();
                let fp = leading_eigen_power(&TransferOperator::forward(&e), 1e-10, 10_000).unwrap();
                von_neumann_entropy(&fp.state)
            })
            .collect();
        let m = median(&mut entropies).unwrap();
        ok &= m >= target;
        shown.push(format!("{name}: {m:.4}"));
    }
    verdict(ok, format!("median entropy [{}] vs 0.9 log n = {target:.4}", shown.join(", ")))
}

struct Tally {
    name: &'static str,
    passed: usize,
    total: usize,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, passed: 0, total: 0 }
    }

    fn check(&mut self, ok: bool) {
        self.total += 1;
        self.passed += usize::from(ok);
    }
}

fn small_ensemble(n: usize, d: usize, k: usize, seed: SeedSpec, tp: bool) -> KrausEnsemble<f64> {
    let kind = DistributionKind::ALL[k % 5];
    let eta: VarianceProfile<f64> = if k.is_multiple_of(2) {
        uniform_profile(n).unwrap()
    } else {
        permutation_sum_profile(n, 2.min(n), seed).unwrap()
    };
    let raw = build_ensemble(&eta, &EntryDistribution::new(kind), d.min(n * n), seed).unwrap();
    if tp {
        renormalize_tp(&raw).unwrap_or(raw)
    } else {
        raw
    }
}

fn gaussian_matrix(n: usize, seed: SeedSpec) -> CMatrix<f64> {
    let eta: VarianceProfile<f64> = uniform_profile(n).unwrap();
    sample_matrix(&EntryDistribution::new(DistributionKind::ComplexGaussian), &eta, seed).to_dense()
}

fn c9_structural_invariants() -> Verdict {
    let mut weyl = Tally::new("Weyl perturbation");
    let mut majorant = Tally::new("Weyl majorant");
    let mut rank = Tally::new("Gram rank = Choi rank");
    let mut psd = Tally::new("Choi PSD");
    let mut adjoint = Tally::new("adjoint consistency");
    let mut entropy = Tally::new("entropy bounds");

    for k in 0..100usize {
        let seed = SeedSpec::new(9).with_trial(k as u32);
        let n = 2 + k % 5;
        let d = 1 + k % 6;

        let a = materialize(&TransferOperator::forward(&small_ensemble(n, d, k, seed, k % 2 == 0))).unwrap();
        let b = materialize(&TransferOperator::forward(&small_ensemble(n, d, k + 1, seed.with_kraus(7), false))).unwrap();
        let b = b.scale_real(0.05 + (k % 10) as f64 * 0.2);
        let (sa, sab, sb) = (
            a.singular_values().unwrap(),
            a.add(&b).singular_values().unwrap(),
            b.singular_values().unwrap(),
        );
        weyl.check((0..2).all(|i| (sab[i] - sa[i]).abs() <= sb[0] + 1e-10));

        let e = small_ensemble(n, d, k, seed, k % 3 != 0);
        let op = TransferOperator::forward(&e);
        let eig = dense_eigs_oracle(&op).unwrap();
        let sv = dense_svd_oracle(&op).unwrap();
        majorant.check(eig[0].norm() + eig[1].norm() <= sv[0] + sv[1] + 1e-8);

        let rn = 1 + k % 8;
        let rd = (1 + k % 10).min(rn * rn);
        let base = ginibre(rn, rd, seed);
        let mut ops: Vec<CMatrix<f64>> = (0..rd).map(|s| base.kraus(s).to_dense()).collect();
        if rd > 2 && k % 3 == 0 {
            ops[rd - 1] = ops[0].scale_real(2.0);
        }
        let dup = KrausEnsemble::from_dense(ops).unwrap();
        let choi = choi_matrix(&dup).unwrap();
        rank.check(kraus_rank(&dup).unwrap() == choi.rank(1e-10).unwrap());
        psd.check(choi.hermitian_eigenvalues().unwrap()[0] >= -1e-10);

        let x = gaussian_matrix(n, seed.with_kraus(100));
        let y = gaussian_matrix(n, seed.with_kraus(101));
        let lhs = y.inner(&op.apply(&x).unwrap());
        let rhs = op.apply_adjoint(&y).unwrap().inner(&x);
        adjoint.check((lhs - rhs).norm() <= 1e-10 * (x.frobenius_norm() * y.frobenius_norm()).max(1.0));

        if let Ok(tp) = renormalize_tp(&small_ensemble(n + 2, d + 1, k, seed.with_kraus(3), false)) {
            if let Ok(fp) = leading_eigen_power(&TransferOperator::forward(&tp), 1e-10, 20_000) {
                let s = von_neumann_entropy(&fp.state);
                entropy.check(s >= 0.0 && s <= ((n + 2) as f64).ln() + 1e-8);
            }
        }
    }
    for k in 0..4u32 {
        let e = ginibre(16, 3 + k as usize, SeedSpec::new(19).with_trial(k));
        psd.check(choi_matrix(&e).unwrap().hermitian_eigenvalues().unwrap()[0] >= -1e-10);
    }

    let tallies = [weyl, majorant, rank, psd, adjoint, entropy];
    let pass = tallies.iter().all(|t| t.total > 0 && t.passed == t.total);
    let shown: Vec<String> = tallies.iter().map(|t| format!("{} {}/{}", t.name, t.passed, t.total)).collect();
    verdict(pass, shown.join(", "))
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, workers: usize| -> (Vec<u8>, String) {
        let cfg = ExperimentConfig {
            n: vec![64],
            d: DegreeSpec::List(vec![4, 16]),
            trials: 3,
            distribution: DistributionKind::ComplexGaussian,
            centered: true,
            fixed_point: true,
            seed: 10,
            workers: Some(workers),
            output: Some(dir.path().join(sub)),
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        (
            std::fs::read(dir.path().join(sub).join(RECORDS_CSV)).unwrap(),
            render_report(&out.records, ReportFormat::Csv).unwrap(),
        )
    };
    let (a, ra) = run("a", 2);
    let (b, _) = run("b", 2);
    let (c, _) = run("c", 1);
    let rows = ra.lines().count() - 1;
    verdict(
        a == b && a == c && rows == 6,
        format!(
            "{rows} records; identical CSV on rerun: {}; identical across worker counts: {}",
            a == b,
            a == c
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "oracle equivalence", c1_oracle_equivalence),
    (2, "TP exactness", c2_tp_exactness),
    (3, "spectral gap rate", c3_spectral_gap_rate),
    (4, "sparse model", c4_sparse_model),
    (5, "sigma concentration", c5_sigma_concentration),
    (6, "moment identities", c6_moment_identities),
    (7, "classical profile quality", c7_profile_quality),
    (8, "fixed-point entropy", c8_fixed_point_entropy),
    (9, "structural invariants", c9_structural_invariants),
    (10, "determinism", c10_determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id}: {} {name}: {} ({secs:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
