use crate::analysis::TestFunctionU;
use crate::env::CoefficientField;
use crate::error::{Error, Result};
use crate::rng::{derive, tag};
use crate::sde::{parallel_paths, ExitMode, PathConfig, Region, SlabRegion, Stepper};
use serde::{Deserialize, Serialize};

/// Fixed modulation rate, or a bisection search for the largest passing one.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    Search,
}

#[derive(Clone, Debug, Serialize)]
pub struct BucketStat {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

/// Empirical check that `v_λ(t ∧ T, X_{t∧T}·ℓ) = e^{λ(t∧T)} u(X·ℓ)` is a
/// supermartingale: bucket means must be non-increasing within noise.
#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleReport {
    pub lambda0: f64,
    pub searched: bool,
    /// Bucket means of `v_{λ₀}` with standard errors.
    pub buckets: Vec<BucketStat>,
    /// Largest upward move between consecutive buckets, in combined-SE units.
    pub max_violation_sigmas: f64,
    /// Mean at the first bucket (exactly `u(0)` when started at the origin).
    pub initial_value: f64,
    pub epsilon: f64,
    pub n: usize,
    /// Search mode: found `λ₀ > 0`; fixed mode: no violation beyond 2 SE.
    pub pass: bool,
}

/// [OP] supermartingale_check: simulate `n` paths of `field` on the
/// lateral-truncated slab, evaluate `v_λ` at bucket times, and verify the
/// means never increase by more than two combined standard errors. In
/// `Search` mode, bisect `λ ∈ (0, 1]` for the largest passing rate (the
/// same paths are re-weighted, so the search is deterministic and cheap).
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_check<F: CoefficientField>(
    field: &F,
    slab: &SlabRegion,
    u: &TestFunctionU,
    lambda: LambdaChoice,
    bucket_times: &[f64],
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<SupermartingaleReport> {
    cfg.validate()?;
    if bucket_times.len() < 2 || bucket_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("bucket times must be increasing, at least two"));
    }
    if bucket_times[0] != 0.0 {
        return Err(Error::usage("the first bucket time must be 0"));
    }
    let region = Region::Slab(slab.clone());
    let x0 = vec![0.0; field.dim()];
    if !region.contains(&x0) {
        return Err(Error::usage("the slab must contain the origin"));
    }
    let horizon = *bucket_times.last().expect("non-empty");

    // per path, per bucket: (t ∧ T, u(X·ℓ at t ∧ T))
    let samples: Vec<Vec<(f64, f64)>> = parallel_paths(n, |k| {
        let path_seed = derive(master_seed, &[tag::PATH, k as u64]);
        let mut stepper = Stepper::new(field, &x0, cfg.dt, cfg.zero_noise, path_seed);
        let mut out = Vec::with_capacity(bucket_times.len());
        out.push((0.0, u.eval(slab.along(&x0))));
        let mut next = 1usize;
        let mut exited: Option<(f64, f64)> = None;
        while next < bucket_times.len() {
            if let Some((t_exit, y_exit)) = exited {
                out.push((t_exit, u.eval(y_exit)));
                next += 1;
                continue;
            }
            stepper.advance()?;
            let t = stepper.time();
            if !region.contains(stepper.x()) {
                let (_, pos) = region.place_on_boundary(stepper.x());
                exited = Some((t, slab.along(&pos)));
                continue;
            }
            if cfg.mode == ExitMode::Bridge && !cfg.zero_noise {
                if let Some((_, pos)) = stepper.bridge_exit(&region) {
                    exited = Some((t, slab.along(&pos)));
                    continue;
                }
            }
            while next < bucket_times.len() && t >= bucket_times[next] {
                out.push((bucket_times[next], u.eval(slab.along(stepper.x()))));
                next += 1;
            }
            if t >= horizon {
                break;
            }
        }
        debug_assert_eq!(out.len(), bucket_times.len());
        Ok(out)
    })?;

    let stats_at = |lam: f64| -> Vec<BucketStat> {
        bucket_times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mut sum = 0.0;
                let mut sum2 = 0.0;
                for path in &samples {
                    let (tau, u_val) = path[k];
                    let v = (lam * tau).exp() * u_val;
                    sum += v;
                    sum2 += v * v;
                }
                let nf = n as f64;
                let mean = sum / nf;
                let var = ((sum2 / nf - mean * mean).max(0.0)) * nf / (nf - 1.0).max(1.0);
                BucketStat { t, mean, se: (var / nf).sqrt() }
            })
            .collect()
    };
    let violation = |stats: &[BucketStat]| -> f64 {
        stats
            .windows(2)
            .map(|w| {
                let denom = (w[0].se * w[0].se + w[1].se * w[1].se).sqrt();
                if denom == 0.0 {
                    if w[1].mean > w[0].mean {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (w[1].mean - w[0].mean) / denom
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let (lambda0, searched, pass) = match lambda {
        LambdaChoice::Fixed(lam) => {
            if !(lam >= 0.0) {
                return Err(Error::config("lambda must be non-negative"));
            }
            let ok = violation(&stats_at(lam)) <= 2.0;
            (lam, false, ok)
        }
        LambdaChoice::Search => {
            // largest lambda in (0, 1] whose buckets stay monotone within 2 SE
            let passes = |lam: f64| violation(&stats_at(lam)) <= 2.0;
            if passes(1.0) {
                (1.0, true, true)
            } else {
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..24 {
                    let mid = 0.5 * (lo + hi);
                    if passes(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo, true, lo > 0.0)
            }
        }
    };

    let buckets = stats_at(lambda0);
    let max_violation_sigmas = violation(&buckets);
    let initial_value = buckets.first().map(|b| b.mean).unwrap_or(f64::NAN);
    Ok(SupermartingaleReport {
        lambda0,
        searched,
        buckets,
        max_violation_sigmas,
        initial_value,
        epsilon: u.alpha.epsilon,
        n,
        pass,
    })
}
