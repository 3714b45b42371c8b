use crate::error::{Error, Result};
use crate::linalg;
use crate::sde::{ExitFace, ExitRecord};
use serde::Serialize;

/// Two-sided 95% normal quantile used for all intervals and slope bounds.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Estimated probability of a non-front exit, with a Wilson 95% interval.
#[derive(Clone, Debug, Serialize)]
pub struct ExitProbEstimate {
    pub p_hat: f64,
    pub ci: (f64, f64),
    pub n: u64,
    pub backward: u64,
    /// Timeouts are counted in `backward` (conservative) and reported here.
    pub timeouts: u64,
}

impl ExitProbEstimate {
    pub fn from_counts(backward: u64, n: u64, timeouts: u64) -> Self {
        ExitProbEstimate {
            p_hat: backward as f64 / n as f64,
            ci: wilson_interval(backward, n, Z95),
            n,
            backward,
            timeouts,
        }
    }
}

/// [OP] exit_prob_backward: fraction of records with exit position
/// `x·ℓ' < front`, i.e. everything except front exits; timeouts (still
/// inside the slab) count as non-front.
pub fn exit_prob_backward(
    records: &[ExitRecord],
    ell_prime: &[f64],
    front: f64,
) -> Result<ExitProbEstimate> {
    if records.is_empty() {
        return Err(Error::usage("exit_prob_backward needs at least one record"));
    }
    let mut backward = 0u64;
    let mut timeouts = 0u64;
    for rec in records {
        if rec.face == ExitFace::Timeout {
            timeouts += 1;
        }
        // placement tolerance: front exits sit on the face up to rounding
        if linalg::dot(&rec.position, ell_prime) < front - 1e-9 * front.abs().max(1.0) {
            backward += 1;
        }
    }
    Ok(ExitProbEstimate::from_counts(backward, records.len() as u64, timeouts))
}
