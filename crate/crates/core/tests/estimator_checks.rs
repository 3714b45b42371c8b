//! Estimator-level oracle and calibration tests at moderate sample sizes.

mod common;

use ballistic_core::env::{ConstantField, EnvironmentSpec, Family};
use ballistic_core::estimators::{
    compare_exit_distributions, condition_t_scan, covariance_snapshots, velocity_estimate,
    LateralRule,
};
use ballistic_core::linalg::Matrix;
use ballistic_core::sde::{
    annealed_batch, ExitMode, PathConfig, Region, SlabRegion, Stepper,
};
use common::{binomial_se, drifted_front_probability};

#[test]
fn condition_t_scan_recovers_drift_slope() {
    // d = 1, drift 0.5, b = 1: log p(L) has slope about -2 mu = -1
    let spec = EnvironmentSpec::deterministic(1, 1.0, vec![0.5]);
    let cfg = PathConfig::new(2e-3, 200.0, ExitMode::Bridge);
    let lengths = [2.0, 3.0, 4.0];
    let scan = condition_t_scan(
        &spec,
        1.0,
        &lengths,
        &[vec![1.0]],
        20_000,
        LateralRule::None,
        &cfg,
        314,
    )
    .unwrap();
    assert!(scan.consistent);
    let dir = &scan.directions[0];
    // each row against the closed form
    for row in &dir.scan.rows {
        let oracle = 1.0 - drifted_front_probability(0.5, row.scale, row.scale);
        assert!(
            (row.estimate.p_hat - oracle).abs()
                <= 3.0 * binomial_se(oracle, row.estimate.n as usize) + 2e-3,
            "L = {}: {} vs {}",
            row.scale,
            row.estimate.p_hat,
            oracle
        );
    }
    let fit = dir.scan.fit.as_ref().unwrap();
    assert!(fit.upper95 < 0.0);
    assert!(
        (fit.slope + 1.0).abs() < 0.12,
        "slope {} should be near -1",
        fit.slope
    );
}

#[test]
fn driftless_scan_never_decays_over_replicates() {
    // calibration against false positives: 20 replicates of a symmetric
    // environment must never report decay with 95% confidence
    let spec = EnvironmentSpec::deterministic(1, 1.0, vec![0.0]);
    let cfg = PathConfig::new(5e-3, 200.0, ExitMode::Bridge);
    let lengths = [1.0, 2.0, 3.0];
    for rep in 0..20 {
        let scan = condition_t_scan(
            &spec,
            1.0,
            &lengths,
            &[vec![1.0]],
            2000,
            LateralRule::None,
            &cfg,
            9000 + rep,
        )
        .unwrap();
        let dir = &scan.directions[0];
        // p = 1/(1+b) = 1/2 at every length: the confidence band must cover 0
        let fit = dir.scan.fit.as_ref().unwrap();
        assert!(
            fit.upper95 >= 0.0,
            "replicate {rep} produced a spurious decay verdict: {fit:?}"
        );
        assert!(!scan.consistent);
        for row in &dir.scan.rows {
            assert!(
                (row.estimate.p_hat - 0.5).abs()
                    <= 4.0 * binomial_se(0.5, row.estimate.n as usize),
                "row {row:?}"
            );
        }
    }
}

#[test]
fn scan_is_pure_function_of_seed() {
    let spec = EnvironmentSpec::deterministic(1, 1.0, vec![0.3]);
    let cfg = PathConfig::new(5e-3, 100.0, ExitMode::Bridge);
    let run = || {
        condition_t_scan(
            &spec,
            1.0,
            &[1.0, 2.0, 3.0],
            &[vec![1.0]],
            500,
            LateralRule::None,
            &cfg,
            42,
        )
        .unwrap()
    };
    let a = serde_json::to_string(&run()).unwrap();
    let b = serde_json::to_string(&run()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn velocity_of_stream_free_environment_is_exact_in_mean() {
    // divergence-free with zero amplitude: b ≡ v
    let spec = EnvironmentSpec {
        family: Family::DivergenceFree,
        dim: 2,
        range: 1.0,
        nu: 1.0,
        beta_cap: None,
        eta: None,
        lambda: None,
        ell: None,
        v: Some(vec![0.7, -0.1]),
        amp_matrix: 0.0,
        amp_drift: 0.0,
        amp_stream: 0.0,
        amp_potential: 0.0,
        seed: None,
    };
    let est = velocity_estimate(&spec, 10.0, 500, 0.01, 17).unwrap();
    for (i, target) in [0.7, -0.1].iter().enumerate() {
        assert!(
            (est.v_hat[i] - target).abs() <= 3.0 * est.se[i],
            "component {i}: {} vs {target}",
            est.v_hat[i]
        );
    }
}

#[test]
fn covariance_snapshot_matches_anisotropic_diffusion() {
    // a = diag(4, 1): rescaled covariance approaches diag(4, 1)
    let field = ConstantField::new(Matrix::diagonal(&[4.0, 1.0]), vec![0.0, 0.0]);
    let times = [4.0];
    let n = 3000;
    let samples: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| {
            let mut stepper = Stepper::new(
                &field,
                &[0.0, 0.0],
                0.01,
                false,
                ballistic_core::rng::derive(5, &[k as u64]),
            );
            while stepper.time() < times[0] {
                stepper.advance().unwrap();
            }
            vec![stepper.x().to_vec()]
        })
        .collect();
    let snaps = covariance_snapshots(&samples, &times, 2);
    let c = &snaps[0].covariance;
    let tol = |v: f64| 3.0 * v * (2.0 / n as f64).sqrt() + 0.05;
    assert!((c.get(0, 0) - 4.0).abs() <= tol(4.0), "c00 = {}", c.get(0, 0));
    assert!((c.get(1, 1) - 1.0).abs() <= tol(1.0), "c11 = {}", c.get(1, 1));
    assert!(c.get(0, 1).abs() <= tol(2.0), "c01 = {}", c.get(0, 1));
    assert!(snaps[0].min_eigenvalue > 0.5);
}

#[test]
fn energy_test_null_calibration_on_disk_exits() {
    // two independent annealed exit samples from the unit disk: the
    // permutation p-value should look uniform; over 20 replicates at least
    // 18 must exceed 0.01
    let spec = EnvironmentSpec::deterministic(2, 1.0, vec![0.0, 0.0]);
    let region = Region::ball(vec![0.0, 0.0], 1.0).unwrap();
    let cfg = PathConfig::new(2e-3, 100.0, ExitMode::Naive);
    let mut passes = 0usize;
    for rep in 0..20u64 {
        let a = annealed_batch(&spec, &region, 700, &cfg, 10_000 + rep).unwrap();
        let b = annealed_batch(&spec, &region, 700, &cfg, 20_000 + rep).unwrap();
        let pa: Vec<Vec<f64>> = a.records.iter().map(|r| r.position.clone()).collect();
        let pb: Vec<Vec<f64>> = b.records.iter().map(|r| r.position.clone()).collect();
        let report = compare_exit_distributions(&pa, &pb, 99, 555 + rep).unwrap();
        if report.p_value > 0.01 {
            passes += 1;
        }
    }
    assert!(passes >= 18, "only {passes}/20 replicates passed the null test");
}

#[test]
fn lateral_truncation_accounting_is_consistent() {
    // against the untruncated slab, the truncated backward estimate grows by
    // exactly the lateral-exit mass (all lateral exits count as non-front)
    let spec = EnvironmentSpec::deterministic(2, 1.0, vec![0.5, 0.0]);
    let cfg = PathConfig::new(2e-3, 200.0, ExitMode::Bridge);
    let n = 10_000;
    let l = 2.0;
    let run = |lateral: Option<f64>, seed: u64| {
        let slab = SlabRegion::new(vec![1.0, 0.0], l, l, lateral).unwrap();
        annealed_batch(&spec, &Region::Slab(slab), n, &cfg, seed).unwrap()
    };
    let full = run(None, 1);
    let trunc = run(Some(l * l), 2);
    let backward = |records: &[ballistic_core::sde::ExitRecord]| {
        ballistic_core::estimators::exit_prob_backward(records, &[1.0, 0.0], l)
            .unwrap()
            .p_hat
    };
    let p_full = backward(&full.records);
    let p_trunc = backward(&trunc.records);
    let lateral_fraction = trunc
        .records
        .iter()
        .filter(|r| r.face == ballistic_core::sde::ExitFace::Lateral)
        .count() as f64
        / n as f64;
    // exact oracle for the untruncated backward probability
    let oracle = 1.0 - drifted_front_probability(0.5, l, l);
    assert!(
        (p_full - oracle).abs() <= 3.0 * binomial_se(oracle, n) + 3e-3,
        "untruncated {p_full} vs oracle {oracle}"
    );
    // truncation can only add non-front exits, by about the lateral mass
    assert!(p_trunc >= p_full - 4.0 * binomial_se(0.15, n));
    assert!(
        (p_trunc - p_full - lateral_fraction).abs()
            <= 4.0 * (2.0f64).sqrt() * binomial_se(0.15, n),
        "trunc {p_trunc} = full {p_full} + lateral {lateral_fraction}?"
    );
}
