use super::decay::{DecayRow, DecayScan};
use super::velocity::annealed_positions;
use super::wilson::ExitProbEstimate;
use crate::env::{EnvironmentRealization, EnvironmentSpec, Family};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{derive, tag};
use crate::sde::{annealed_batch, parallel_paths, PathConfig, Region, SlabRegion, Stepper};
use serde::Serialize;

/// Tail scans of the running displacement maximum `Z_t = sup_{s≤t}|X_s - X_0|`:
///
/// * `linear`: frequencies of `Z_{γL} ≥ 2γβL`, fitted against `L`;
/// * `square`: frequencies of `Z_1 ≥ γL`, fitted against `L²`;
/// * `cubic`:  frequencies of `Z_{γL} ≥ L²`, fitted against `L³`.
#[derive(Clone, Debug, Serialize)]
pub struct BernsteinReport {
    pub gamma: f64,
    /// Certified drift bound used in the linear-scan threshold.
    pub beta: f64,
    pub linear: DecayScan,
    pub square: DecayScan,
    pub cubic: DecayScan,
}

impl BernsteinReport {
    pub fn all_decay(&self) -> bool {
        self.linear.decays() && self.square.decays() && self.cubic.decays()
    }
}

/// [OP] bernstein_tail_scan: quenched free-space paths in one environment,
/// recording the running maximum at times 1 and γL.
pub fn bernstein_tail_scan(
    env: &EnvironmentRealization,
    gamma: f64,
    lengths: &[f64],
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<BernsteinReport> {
    if !(gamma > 0.0) {
        return Err(Error::usage("gamma must be positive"));
    }
    if lengths.is_empty() || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("lengths must be increasing and non-empty"));
    }
    let beta = env.spec().certified()?.beta;
    let d = env.spec().dim;
    let x0 = vec![0.0; d];

    let mut rows_linear = Vec::new();
    let mut rows_square = Vec::new();
    let mut rows_cubic = Vec::new();
    for (li, &length) in lengths.iter().enumerate() {
        let horizon = (gamma * length).max(1.0);
        let seed = derive(master_seed, &[tag::SCAN, li as u64]);
        // per path: running max at t = 1 and at t = gamma L
        let maxima: Vec<(f64, f64)> = parallel_paths(n, |k| {
            let path_seed = derive(seed, &[tag::PATH, k as u64]);
            let mut stepper = Stepper::new(env, &x0, cfg.dt, cfg.zero_noise, path_seed);
            let mut z = 0.0f64;
            let mut z_at_one = 0.0f64;
            let mut seen_one = false;
            while stepper.time() < horizon {
                stepper.advance()?;
                z = z.max(linalg::norm(stepper.x()));
                if !seen_one && stepper.time() >= 1.0 {
                    z_at_one = z;
                    seen_one = true;
                }
            }
            if !seen_one {
                z_at_one = z;
            }
            Ok((z_at_one, z))
        })?;
        let count = |pred: &dyn Fn(&(f64, f64)) -> bool| maxima.iter().filter(|m| pred(m)).count() as u64;
        let nz = n as u64;
        rows_linear.push(DecayRow {
            scale: length,
            estimate: ExitProbEstimate::from_counts(
                count(&|m| m.1 >= 2.0 * gamma * beta * length),
                nz,
                0,
            ),
        });
        rows_square.push(DecayRow {
            scale: length,
            estimate: ExitProbEstimate::from_counts(count(&|m| m.0 >= gamma * length), nz, 0),
        });
        rows_cubic.push(DecayRow {
            scale: length,
            estimate: ExitProbEstimate::from_counts(count(&|m| m.1 >= length * length), nz, 0),
        });
    }
    Ok(BernsteinReport {
        gamma,
        beta,
        linear: DecayScan::from_rows(rows_linear, "L", |l| l),
        square: DecayScan::from_rows(rows_square, "L^2", |l| l * l),
        cubic: DecayScan::from_rows(rows_cubic, "L^3", |l| l * l * l),
    })
}

/// Exit-time tail frequencies `P[T_V ≥ μL]` per time multiplier μ.
#[derive(Clone, Debug, Serialize)]
pub struct ExitTimeTailReport {
    pub delta: f64,
    pub scans: Vec<(f64, DecayScan)>,
    /// Some multiplier shows exponential decay in L.
    pub some_multiplier_decays: bool,
}

/// [OP] exit_time_tail_scan: annealed exit times from the gradient-family
/// slab `V` (lateral bound `L/√δ`), scanned over a grid of multipliers
/// standing in for the unknown spectral-gap ratio.
#[allow(clippy::too_many_arguments)]
pub fn exit_time_tail_scan(
    spec: &EnvironmentSpec,
    delta: f64,
    back_ratio: f64,
    lengths: &[f64],
    multipliers: &[f64],
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<ExitTimeTailReport> {
    if spec.family != Family::Gradient {
        return Err(Error::usage("exit_time_tail_scan requires a gradient-family spec"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::usage("delta must lie in (0, 1)"));
    }
    if lengths.is_empty() || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("lengths must be increasing and non-empty"));
    }
    if multipliers.is_empty() {
        return Err(Error::usage("need at least one time multiplier"));
    }
    let max_mu = multipliers.iter().cloned().fold(0.0f64, f64::max);
    let max_l = *lengths.last().expect("non-empty");
    if cfg.t_max < max_mu * max_l {
        return Err(Error::config(format!(
            "t_max = {} cannot resolve tails up to mu L = {}",
            cfg.t_max,
            max_mu * max_l
        )));
    }
    let ell = spec
        .ell
        .clone()
        .ok_or_else(|| Error::config("gradient spec carries ell"))?;

    // one batch per L serves every multiplier
    let mut times_per_length = Vec::with_capacity(lengths.len());
    for (li, &length) in lengths.iter().enumerate() {
        let slab = SlabRegion::new(
            ell.clone(),
            back_ratio * length,
            length,
            Some(length / delta.sqrt()),
        )?;
        let seed = derive(master_seed, &[tag::SCAN, li as u64]);
        let batch = annealed_batch(spec, &Region::Slab(slab), n, cfg, seed)?;
        times_per_length.push(batch.records.iter().map(|r| r.time).collect::<Vec<f64>>());
    }
    let mut scans = Vec::with_capacity(multipliers.len());
    for &mu in multipliers {
        let rows: Vec<DecayRow> = lengths
            .iter()
            .zip(&times_per_length)
            .map(|(&length, times)| {
                let count = times.iter().filter(|&&t| t >= mu * length).count() as u64;
                DecayRow {
                    scale: length,
                    estimate: ExitProbEstimate::from_counts(count, times.len() as u64, 0),
                }
            })
            .collect();
        scans.push((mu, DecayScan::from_rows(rows, "L", |l| l)));
    }
    Ok(ExitTimeTailReport {
        delta,
        some_multiplier_decays: scans.iter().any(|(_, s)| s.decays()),
        scans,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatKernelRow {
    pub t: f64,
    /// Mean of `X_t - v t` with componentwise standard errors.
    pub mean_displacement: Vec<f64>,
    pub se: Vec<f64>,
    /// Tail frequencies of `|X_t - v t| ≥ r √t` fitted against `r²`.
    pub tail: DecayScan,
}

/// Gaussian-displacement check for the divergence-free family.
#[derive(Clone, Debug, Serialize)]
pub struct HeatKernelReport {
    pub rows: Vec<HeatKernelRow>,
    /// Every horizon shows Gaussian-type tail decay in `r²`.
    pub all_decay: bool,
}

/// [OP] heat_kernel_displacement_check: annealed displacement tails around
/// the exact mean velocity of the divergence-free family.
pub fn heat_kernel_displacement_check(
    spec: &EnvironmentSpec,
    times: &[f64],
    radii: &[f64],
    n: usize,
    dt: f64,
    master_seed: u64,
) -> Result<HeatKernelReport> {
    if spec.family != Family::DivergenceFree {
        return Err(Error::usage(
            "heat_kernel_displacement_check requires a divergence-free spec",
        ));
    }
    if radii.len() < 3 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("need at least three increasing radii"));
    }
    let v = spec.v.clone().unwrap_or_else(|| vec![0.0; spec.dim]);
    let samples = annealed_positions(spec, times, n, dt, master_seed)?;
    let d = spec.dim;
    let nf = n as f64;
    let mut rows = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let sqrt_t = t.sqrt();
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        let mut norms = Vec::with_capacity(n);
        for path in &samples {
            let disp: Vec<f64> = path[ti].iter().zip(&v).map(|(x, vi)| x - vi * t).collect();
            for i in 0..d {
                mean[i] += disp[i];
                m2[i] += disp[i] * disp[i];
            }
            norms.push(linalg::norm(&disp) / sqrt_t);
        }
        let mut se = vec![0.0; d];
        for i in 0..d {
            mean[i] /= nf;
            let var = (m2[i] / nf - mean[i] * mean[i]).max(0.0) * nf / (nf - 1.0);
            se[i] = (var / nf).sqrt();
        }
        let tail_rows: Vec<DecayRow> = radii
            .iter()
            .map(|&r| {
                let count = norms.iter().filter(|&&z| z >= r).count() as u64;
                DecayRow {
                    scale: r,
                    estimate: ExitProbEstimate::from_counts(count, n as u64, 0),
                }
            })
            .collect();
        rows.push(HeatKernelRow {
            t,
            mean_displacement: mean,
            se,
            tail: DecayScan::from_rows(tail_rows, "r^2", |r| r * r),
        });
    }
    Ok(HeatKernelReport {
        all_decay: rows.iter().all(|r| r.tail.decays()),
        rows,
    })
}
