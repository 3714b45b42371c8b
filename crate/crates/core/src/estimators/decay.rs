use super::wilson::{exit_prob_backward, ExitProbEstimate, Z95};
use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::rng::{derive, tag};
use crate::sde::{annealed_batch, PathConfig, Region, SlabRegion};
use serde::{Deserialize, Serialize};

/// One row of a decay scan.
#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    /// Abscissa (slab length L, or a threshold radius).
    pub scale: f64,
    pub estimate: ExitProbEstimate,
}

/// Least-squares fit of `log p̂` against a transformed abscissa, with
/// delta-method standard errors (`var log p̂ ≈ (1-p̂)/(n p̂)`). Rows with
/// `p̂ = 0` are dropped and counted in `zero_rows`.
#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// `slope + z₉₅ · se`: the claim "decays" holds when this is negative.
    pub upper95: f64,
    pub rows_used: usize,
    pub zero_rows: usize,
}

/// Decay scan: estimates per scale plus the fitted log-linear slope.
/// The fit is present only when at least three rows are usable; if every
/// row is zero the decay is below Monte Carlo resolution (a pass-like
/// outcome, flagged).
#[derive(Clone, Debug, Serialize)]
pub struct DecayScan {
    pub rows: Vec<DecayRow>,
    /// Label of the fitted abscissa ("L", "L^2", "L^3", "r^2").
    pub abscissa: String,
    pub fit: Option<SlopeFit>,
    pub below_resolution: bool,
}

impl DecayScan {
    /// Build from rows sorted by scale, fitting `log p̂` against `transform(scale)`.
    pub fn from_rows(
        mut rows: Vec<DecayRow>,
        abscissa: &str,
        transform: impl Fn(f64) -> f64,
    ) -> Self {
        rows.sort_by(|a, b| a.scale.partial_cmp(&b.scale).expect("finite scales"));
        let points: Vec<(f64, f64, u64)> = rows
            .iter()
            .map(|r| (transform(r.scale), r.estimate.p_hat, r.estimate.n))
            .collect();
        let fit = fit_log_decay(&points);
        let below_resolution = rows.iter().all(|r| r.estimate.backward == 0);
        DecayScan { rows, abscissa: abscissa.to_string(), fit, below_resolution }
    }

    /// Decay verdict: fitted slope 95% upper bound below zero, or decay
    /// below resolution.
    pub fn decays(&self) -> bool {
        self.below_resolution || self.fit.as_ref().map(|f| f.upper95 < 0.0).unwrap_or(false)
    }
}

/// Ordinary least squares of `log p` on `x` over rows with `p > 0`.
pub fn fit_log_decay(points: &[(f64, f64, u64)]) -> Option<SlopeFit> {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(_, p, _)| *p > 0.0)
        .map(|(x, p, n)| (*x, p.ln(), (1.0 - p) / (*n as f64 * p)))
        .collect();
    let zero_rows = points.len() - usable.len();
    if usable.len() < 3 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y, _)| y).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|(x, _, _)| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = usable
        .iter()
        .map(|(x, y, _)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // propagate per-row delta-method variances through the OLS weights
    let var: f64 = usable
        .iter()
        .map(|(x, _, v)| {
            let c = (x - mean_x) / sxx;
            c * c * v
        })
        .sum();
    let slope_se = var.sqrt();
    Some(SlopeFit {
        slope,
        intercept,
        slope_se,
        upper95: slope + Z95 * slope_se,
        rows_used: usable.len(),
        zero_rows,
    })
}

/// Lateral truncation rule for slab scans. The theory bounds slabs by
/// `|Π_ℓ(x)| < L²` in the generic setting and `L/√δ` in the gradient
/// setting; finite-length experiments expose the choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "delta")]
pub enum LateralRule {
    SquareOfLength,
    OverSqrtDelta(f64),
    None,
}

impl LateralRule {
    pub fn bound(&self, slab_length: f64) -> Result<Option<f64>> {
        match self {
            LateralRule::SquareOfLength => Ok(Some(slab_length * slab_length)),
            LateralRule::OverSqrtDelta(delta) => {
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::config("lateral delta must lie in (0, 1)"));
                }
                Ok(Some(slab_length / delta.sqrt()))
            }
            LateralRule::None => Ok(None),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionScan {
    pub ell_prime: Vec<f64>,
    pub scan: DecayScan,
    pub pass: bool,
}

/// Result of a condition-(T) style scan over directions and slab lengths.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionTScan {
    pub directions: Vec<DirectionScan>,
    /// Every direction's slope upper bound is negative (or below resolution).
    pub consistent: bool,
    pub back_ratio: f64,
    pub n_per_length: usize,
}

/// [OP] condition_T_scan: annealed exit batches on lateral-truncated slabs
/// for each direction near `ell` and each length `L`; fits `log p̂(L)`.
#[allow(clippy::too_many_arguments)]
pub fn condition_t_scan(
    spec: &EnvironmentSpec,
    back_ratio: f64,
    lengths: &[f64],
    directions: &[Vec<f64>],
    n_per_length: usize,
    lateral: LateralRule,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<ConditionTScan> {
    if lengths.len() < 3 {
        return Err(Error::usage("condition (T) scan needs at least 3 slab lengths"));
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("slab lengths must be strictly increasing"));
    }
    if directions.is_empty() {
        return Err(Error::usage("condition (T) scan needs at least one direction"));
    }
    let mut out = Vec::with_capacity(directions.len());
    for (di, ell_prime) in directions.iter().enumerate() {
        let mut rows = Vec::with_capacity(lengths.len());
        for (li, &length) in lengths.iter().enumerate() {
            let slab = SlabRegion::new(
                ell_prime.clone(),
                back_ratio * length,
                length,
                lateral.bound(length)?,
            )?;
            let seed = derive(master_seed, &[tag::SCAN, di as u64, li as u64]);
            let batch = annealed_batch(spec, &Region::Slab(slab), n_per_length, cfg, seed)?;
            let estimate = exit_prob_backward(&batch.records, ell_prime, length)?;
            rows.push(DecayRow { scale: length, estimate });
        }
        let scan = DecayScan::from_rows(rows, "L", |l| l);
        let pass = scan.decays();
        out.push(DirectionScan { ell_prime: ell_prime.clone(), scan, pass });
    }
    Ok(ConditionTScan {
        consistent: out.iter().all(|d| d.pass),
        directions: out,
        back_ratio,
        n_per_length,
    })
}

/// Directions spanning a neighborhood of `ell`: `ell` itself plus rotations
/// by ±angle in the plane of `ell` and each later coordinate axis direction
/// not parallel to it (d ≥ 2; in one dimension only `ell`).
pub fn neighborhood_directions(ell: &[f64], angle: f64) -> Vec<Vec<f64>> {
    let d = ell.len();
    let mut dirs = vec![ell.to_vec()];
    if d < 2 || angle == 0.0 {
        return dirs;
    }
    // pick the axis least aligned with ell to build an orthonormal partner
    let (axis, _) = ell
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.abs()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
        .expect("non-empty");
    let mut partner: Vec<f64> = vec![0.0; d];
    partner[axis] = 1.0;
    let along = crate::linalg::dot(&partner, ell);
    for (p, l) in partner.iter_mut().zip(ell) {
        *p -= along * l;
    }
    let norm = crate::linalg::norm(&partner);
    for p in partner.iter_mut() {
        *p /= norm;
    }
    for sign in [1.0, -1.0] {
        let rotated: Vec<f64> = ell
            .iter()
            .zip(&partner)
            .map(|(l, p)| l * angle.cos() + p * sign * angle.sin())
            .collect();
        dirs.push(rotated);
    }
    dirs
}
