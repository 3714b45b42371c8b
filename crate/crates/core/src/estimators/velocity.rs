use crate::env::{EnvironmentRealization, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive, tag};
use crate::sde::{parallel_paths, Stepper};
use serde::Serialize;

/// Positions of `n` annealed paths at each requested time (times ascending).
/// Returns `samples[path][time_index]`.
pub(crate) fn annealed_positions(
    spec: &EnvironmentSpec,
    times: &[f64],
    n: usize,
    dt: f64,
    master_seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("sample times must be non-empty and increasing"));
    }
    if !(times[0] > 0.0) {
        return Err(Error::usage("sample times must be positive"));
    }
    let horizon = *times.last().expect("non-empty");
    parallel_paths(n, |k| {
        let env_seed = derive(master_seed, &[tag::ENV, k as u64]);
        let env = EnvironmentRealization::new(spec, env_seed)?;
        let path_seed = derive(master_seed, &[tag::PATH, k as u64]);
        let x0 = vec![0.0; spec.dim];
        let mut stepper = Stepper::new(&env, &x0, dt, false, path_seed);
        let mut snapshots = Vec::with_capacity(times.len());
        let mut next = 0usize;
        while stepper.time() < horizon {
            stepper.advance()?;
            while next < times.len() && stepper.time() >= times[next] {
                snapshots.push(stepper.x().to_vec());
                next += 1;
            }
        }
        debug_assert_eq!(snapshots.len(), times.len());
        Ok(snapshots)
    })
}

/// Monte Carlo estimate of the limiting velocity `X_t / t` at one horizon.
#[derive(Clone, Debug, Serialize)]
pub struct VelocityEstimate {
    pub v_hat: Vec<f64>,
    /// Componentwise standard error of the mean.
    pub se: Vec<f64>,
    pub horizon: f64,
    pub n: usize,
}

/// [OP] velocity_estimate: mean of `X_t / t` over annealed paths.
pub fn velocity_estimate(
    spec: &EnvironmentSpec,
    horizon: f64,
    n: usize,
    dt: f64,
    master_seed: u64,
) -> Result<VelocityEstimate> {
    if n < 2 {
        return Err(Error::usage("velocity estimate needs n >= 2"));
    }
    let samples = annealed_positions(spec, &[horizon], n, dt, master_seed)?;
    let d = spec.dim;
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for s in &samples {
        for (i, xi) in s[0].iter().enumerate() {
            let v = xi / horizon;
            mean[i] += v;
            m2[i] += v * v;
        }
    }
    let nf = n as f64;
    let mut se = vec![0.0; d];
    for i in 0..d {
        mean[i] /= nf;
        let var = (m2[i] / nf - mean[i] * mean[i]).max(0.0) * nf / (nf - 1.0);
        se[i] = (var / nf).sqrt();
    }
    Ok(VelocityEstimate { v_hat: mean, se, horizon, n })
}

/// Sample covariance of the diffusive rescaling at one time.
#[derive(Clone, Debug, Serialize)]
pub struct CltSnapshot {
    pub s: f64,
    pub covariance: Matrix,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub n: usize,
}

/// [OP] clt_snapshot: for each time `s`, the sample covariance of
/// `(X_s - s v̂)/√s` with `v̂` the same-batch velocity estimate.
pub fn clt_snapshot(
    spec: &EnvironmentSpec,
    times: &[f64],
    n: usize,
    dt: f64,
    master_seed: u64,
) -> Result<Vec<CltSnapshot>> {
    let d = spec.dim;
    if n < d + 1 {
        return Err(Error::usage("clt snapshot needs n >= dim + 1"));
    }
    let samples = annealed_positions(spec, times, n, dt, master_seed)?;
    Ok(covariance_snapshots(&samples, times, d))
}

/// Sample covariance of the diffusive rescaling at each time, from raw
/// position snapshots `samples[path][time_index]`.
pub fn covariance_snapshots(
    samples: &[Vec<Vec<f64>>],
    times: &[f64],
    dim: usize,
) -> Vec<CltSnapshot> {
    let n = samples.len();
    let nf = n as f64;
    let mut out = Vec::with_capacity(times.len());
    for (ti, &s) in times.iter().enumerate() {
        let mut mean = vec![0.0; dim];
        for path in samples {
            for (m, xi) in mean.iter_mut().zip(&path[ti]) {
                *m += xi;
            }
        }
        for m in mean.iter_mut() {
            *m /= nf;
        }
        let sqrt_s = s.sqrt();
        let mut cov = Matrix::zeros(dim);
        for path in samples {
            let y: Vec<f64> = path[ti]
                .iter()
                .zip(&mean)
                .map(|(xi, m)| (xi - m) / sqrt_s)
                .collect();
            for i in 0..dim {
                for j in 0..dim {
                    cov.set(i, j, cov.get(i, j) + y[i] * y[j]);
                }
            }
        }
        cov.scale(1.0 / (nf - 1.0));
        let (min_eigenvalue, max_eigenvalue) = cov.symmetric_eigen_range();
        out.push(CltSnapshot { s, covariance: cov, min_eigenvalue, max_eigenvalue, n });
    }
    out
}
