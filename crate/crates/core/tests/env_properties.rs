//! Randomized-scan invariants of the environment families: certified
//! bounds, analytic derivatives against finite differences, and the exact
//! finite-range property.

use ballistic_core::env::{
    verify_regularity, EnvironmentRealization, EnvironmentSpec, Family, Rerandomization,
};
use ballistic_core::linalg;
use ballistic_core::rng::CounterRng;

fn generic_bump_spec() -> EnvironmentSpec {
    EnvironmentSpec {
        family: Family::GenericBump,
        dim: 2,
        range: 1.0,
        nu: 2.0,
        beta_cap: None,
        eta: None,
        lambda: None,
        ell: None,
        v: Some(vec![0.3, 0.0]),
        amp_matrix: 0.3,
        amp_drift: 0.15,
        amp_stream: 0.0,
        amp_potential: 0.0,
        seed: None,
    }
}

fn divergence_free_spec(dim: usize, amp: f64) -> EnvironmentSpec {
    EnvironmentSpec {
        family: Family::DivergenceFree,
        dim,
        range: 1.0,
        nu: 1.0,
        beta_cap: None,
        eta: (amp > 0.0).then_some(amp),
        lambda: None,
        ell: None,
        v: Some({
            let mut v = vec![0.0; dim];
            v[0] = 1.0;
            v
        }),
        amp_matrix: 0.0,
        amp_drift: 0.0,
        amp_stream: amp,
        amp_potential: 0.0,
        seed: None,
    }
}

fn gradient_spec(dim: usize, lambda: f64, eta: f64) -> EnvironmentSpec {
    let mut ell = vec![0.0; dim];
    ell[0] = 1.0;
    EnvironmentSpec {
        family: Family::Gradient,
        dim,
        range: 1.0,
        nu: 1.0,
        beta_cap: None,
        eta: Some(eta),
        lambda: Some(lambda),
        ell: Some(ell),
        v: None,
        amp_matrix: 0.0,
        amp_drift: 0.0,
        amp_stream: 0.0,
        amp_potential: eta,
        seed: None,
    }
}

#[test]
fn certified_bounds_hold_on_random_scans() {
    let specs = vec![
        generic_bump_spec(),
        divergence_free_spec(2, 0.4),
        gradient_spec(2, 0.5, 0.2),
        EnvironmentSpec::deterministic(2, 1.0, vec![0.5, -0.1]),
    ];
    for spec in specs {
        let cert = spec.certified().unwrap();
        for seed in [1u64, 99, 12345] {
            let env = EnvironmentRealization::new(&spec, seed).unwrap();
            let mut rng = CounterRng::new(seed ^ 0xabcd);
            for _ in 0..300 {
                let x = [8.0 * rng.symmetric(), 8.0 * rng.symmetric()];
                let s = env.coefficients(&x);
                assert!(s.a.max_symmetry_defect() <= 1e-12);
                let (lo, hi) = s.a.symmetric_eigen_range();
                assert!(
                    lo >= 1.0 / cert.nu - 1e-12 && hi <= cert.nu + 1e-12,
                    "family {:?}: spectrum [{lo}, {hi}] outside certified nu {}",
                    spec.family,
                    cert.nu
                );
                assert!(
                    linalg::norm(&s.b) <= cert.beta + 1e-12,
                    "family {:?}: |b| = {} > beta = {}",
                    spec.family,
                    linalg::norm(&s.b),
                    cert.beta
                );
            }
        }
    }
}

#[test]
fn regularity_report_within_certified_for_all_families() {
    for spec in [
        generic_bump_spec(),
        divergence_free_spec(2, 0.4),
        gradient_spec(2, 0.5, 0.2),
    ] {
        let env = EnvironmentRealization::new(&spec, 7).unwrap();
        let report = verify_regularity(&env, &[-3.0, -3.0], &[3.0, 3.0], 0.21, 400).unwrap();
        assert!(report.range_test_pass, "family {:?}", spec.family);
        assert!(
            report.within_certified(),
            "family {:?}: {report:?}",
            spec.family
        );
    }
}

#[test]
fn divergence_free_drift_is_divergence_free_and_matches_stream_matrix() {
    let spec = divergence_free_spec(2, 0.5);
    let env = EnvironmentRealization::new(&spec, 5).unwrap();
    let eta = 0.5;
    let mut rng = CounterRng::new(17);

    // 50 random support-interior points: the FD divergence of b is zero up
    // to rounding (far below any c·h² envelope), and |H|_F stays capped
    let divergence_at = |x: &[f64], h: f64| -> f64 {
        let mut div = 0.0;
        for i in 0..2 {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            div += (env.coefficients(&hi).b[i] - env.coefficients(&lo).b[i]) / (2.0 * h);
        }
        div
    };
    let mut points = Vec::new();
    for _ in 0..50 {
        let anchor = [4.0 * rng.symmetric(), 4.0 * rng.symmetric()];
        let cell = env.cell_of(&anchor);
        let point = env.cell_marks(&cell).point.clone();
        points.push([
            point[0] + 0.12 * rng.symmetric(),
            point[1] + 0.12 * rng.symmetric(),
        ]);
    }
    for x in &points {
        assert!(divergence_at(x, 1e-3).abs() < 1e-9);
        assert!(env.stream_matrix(x).unwrap().frobenius_norm() <= eta + 1e-15);
    }

    // analytic b matches the finite-difference row divergence of H at
    // second order in the step
    let fd_error = |h: f64| -> f64 {
        let mut worst = 0.0f64;
        for x in &points {
            let mut fd = [1.0, 0.0]; // + v
            for j in 0..2 {
                for k in 0..2 {
                    let mut hi = x.to_vec();
                    let mut lo = x.to_vec();
                    hi[k] += h;
                    lo[k] -= h;
                    let dh = env.stream_matrix(&hi).unwrap().get(k, j)
                        - env.stream_matrix(&lo).unwrap().get(k, j);
                    fd[j] += dh / (2.0 * h);
                }
            }
            let b = env.coefficients(x).b;
            worst = worst.max(((fd[0] - b[0]).powi(2) + (fd[1] - b[1]).powi(2)).sqrt());
        }
        worst
    };
    let coarse = fd_error(2e-3);
    let fine = fd_error(1e-3);
    let order = (coarse / fine).log2();
    assert!(order >= 1.9, "observed convergence order {order}");
}

#[test]
fn single_skew_mark_matches_hand_expansion() {
    // d = 2, one bump: b - v = a12 * (-∂2 ψ, ∂1 ψ) / r0 for mark [[0, a12], [-a12, 0]]
    let spec = divergence_free_spec(2, 0.5);
    let env = EnvironmentRealization::new(&spec, 21).unwrap();
    let cell = env.cell_of(&[0.0, 0.0]);
    let (point, a12) = {
        let marks = env.cell_marks(&cell);
        (marks.point.clone(), marks.stream.as_ref().unwrap().get(0, 1))
    };
    let r0 = spec.support_radius();
    let mut rng = CounterRng::new(3);
    for _ in 0..50 {
        let x = [
            point[0] + r0 * rng.symmetric(),
            point[1] + r0 * rng.symmetric(),
        ];
        let scaled = [(x[0] - point[0]) / r0, (x[1] - point[1]) / r0];
        let mut grad = [0.0; 2];
        ballistic_core::kernel::psi_value_and_grad(&scaled, &mut grad);
        let expected = [1.0 - a12 * grad[1] / r0, a12 * grad[0] / r0];
        let b = env.coefficients(&x).b;
        assert!((b[0] - expected[0]).abs() < 1e-13 && (b[1] - expected[1]).abs() < 1e-13);
    }
}

#[test]
fn stream_amplitude_zero_gives_constant_drift() {
    let spec = divergence_free_spec(2, 0.0);
    let env = EnvironmentRealization::new(&spec, 11).unwrap();
    let mut rng = CounterRng::new(5);
    for _ in 0..100 {
        let x = [6.0 * rng.symmetric(), 6.0 * rng.symmetric()];
        let s = env.divergence_free_coefficients(&x).unwrap();
        assert_eq!(s.b, vec![1.0, 0.0]);
    }
}

#[test]
fn gradient_family_potential_and_curl() {
    let lambda = 1.0;
    let eta = 0.3;
    let spec = gradient_spec(2, lambda, eta);
    let env = EnvironmentRealization::new(&spec, 9).unwrap();
    let mut rng = CounterRng::new(2);

    // |φ| ≤ η everywhere sampled; ψ value matches φ + λ ℓ·x
    for _ in 0..1000 {
        let x = [10.0 * rng.symmetric(), 10.0 * rng.symmetric()];
        let (_, psi) = env.gradient_coefficients(&x).unwrap();
        let phi = env.potential(&x);
        assert!(phi.abs() <= eta + 1e-15);
        assert!((psi - (phi + lambda * x[0])).abs() < 1e-12);
    }

    // curl of b - λℓ vanishes at second order (gradient fields are curl-free);
    // and b - λℓ matches finite-difference ∇φ
    let curl_at = |x: &[f64], h: f64| -> f64 {
        let mut dx = x.to_vec();
        let mut sx = x.to_vec();
        dx[0] += h;
        sx[0] -= h;
        let d1b2 = (env.coefficients(&dx).b[1] - env.coefficients(&sx).b[1]) / (2.0 * h);
        let mut dy = x.to_vec();
        let mut sy = x.to_vec();
        dy[1] += h;
        sy[1] -= h;
        let d2b1 = (env.coefficients(&dy).b[0] - env.coefficients(&sy).b[0]) / (2.0 * h);
        d1b2 - d2b1
    };
    let mut max_coarse = 0.0f64;
    let mut max_fine = 0.0f64;
    for _ in 0..50 {
        let anchor = [4.0 * rng.symmetric(), 4.0 * rng.symmetric()];
        let cell = env.cell_of(&anchor);
        let point = env.cell_marks(&cell).point.clone();
        let x = [point[0] + 0.05 * rng.symmetric(), point[1] + 0.05 * rng.symmetric()];
        max_coarse = max_coarse.max(curl_at(&x, 2e-3).abs());
        max_fine = max_fine.max(curl_at(&x, 1e-3).abs());

        let h = 1e-5;
        let b = env.coefficients(&x).b;
        for i in 0..2 {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            let fd = (env.potential(&hi) - env.potential(&lo)) / (2.0 * h);
            let analytic = b[i] - lambda * if i == 0 { 1.0 } else { 0.0 };
            assert!(
                (fd - analytic).abs() < 1e-6,
                "component {i}: fd {fd} vs analytic {analytic}"
            );
        }
    }
    // curl may be zero to rounding everywhere it was sampled; only assert
    // the convergence order when it is measurably nonzero
    if max_coarse > 1e-10 {
        let order = (max_coarse / max_fine).log2();
        assert!(order >= 1.9, "curl convergence order {order}");
    } else {
        assert!(max_fine <= 1e-10);
    }
}

#[test]
fn potential_cap_zero_is_pure_drift() {
    let spec = gradient_spec(2, 1.0, 1e-300); // effectively zero potential
    let mut spec = spec;
    spec.amp_potential = 0.0;
    spec.eta = None;
    let env = EnvironmentRealization::new(&spec, 4).unwrap();
    let (s, psi) = env.gradient_coefficients(&[0.7, -0.3]).unwrap();
    assert_eq!(s.b, vec![1.0, 0.0]);
    assert!((psi - 0.7).abs() < 1e-15);
}

#[test]
fn finite_range_exactness_100_probes_per_family() {
    let specs = vec![
        generic_bump_spec(),
        divergence_free_spec(2, 0.4),
        gradient_spec(2, 0.5, 0.2),
        EnvironmentSpec::deterministic(2, 1.0, vec![0.2, 0.0]),
    ];
    for spec in specs {
        let env = EnvironmentRealization::new(&spec, 31).unwrap();
        let radius = spec.range / 2.0;
        let mut rng = CounterRng::new(77);
        for _ in 0..100 {
            let probe = vec![6.0 * rng.symmetric(), 6.0 * rng.symmetric()];
            let far = env.rerandomized(Rerandomization::FarFrom {
                probe: probe.clone(),
                radius,
                alt_seed: 0xfeed,
            });
            let a = env.coefficients(&probe);
            let b = far.coefficients(&probe);
            let bits = |s: &ballistic_core::env::CoefficientSample| {
                s.a.data()
                    .iter()
                    .chain(s.b.iter())
                    .map(|v| v.to_bits())
                    .collect::<Vec<u64>>()
            };
            assert_eq!(bits(&a), bits(&b), "family {:?}", spec.family);
        }
    }
}

#[test]
fn near_rerandomization_changes_active_points() {
    // at a bump point of a non-deterministic family the near marks matter
    for spec in [generic_bump_spec(), divergence_free_spec(2, 0.4), gradient_spec(2, 0.5, 0.2)] {
        let env = EnvironmentRealization::new(&spec, 13).unwrap();
        let cell = env.cell_of(&[0.4, -0.2]);
        let probe = env.cell_marks(&cell).point.clone();
        let near = env.rerandomized(Rerandomization::NearTo {
            probe: probe.clone(),
            radius: spec.range / 2.0,
            alt_seed: 0xbeef,
        });
        let a = env.coefficients(&probe);
        let b = near.coefficients(&probe);
        assert!(
            a.a != b.a || a.b != b.b,
            "family {:?}: near re-randomization must change the value",
            spec.family
        );
    }
}
