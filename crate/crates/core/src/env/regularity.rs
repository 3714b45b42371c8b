use super::field::CoefficientField;
use super::realization::{EnvironmentRealization, Rerandomization};
use super::spec::{CertifiedBounds, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{self, tag, CounterRng};
use serde::Serialize;

/// Empirical scan of the bounds an environment realization must satisfy,
/// plus the exact finite-range test. Failures are reported, never thrown.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    /// Smallest eigenvalue of `a` seen on the grid.
    pub eigenvalue_min: f64,
    /// Largest eigenvalue of `a` seen on the grid.
    pub eigenvalue_max: f64,
    /// Largest `|b|` seen on the grid.
    pub drift_max: f64,
    /// Largest finite-difference ratio `(|Δa|_F + |Δb|) / |Δx|` over sampled pairs.
    pub lipschitz_max: f64,
    /// Largest symmetry defect of `a` seen on the grid.
    pub symmetry_defect_max: f64,
    /// All probes bit-identical after re-randomizing far cells.
    pub range_test_pass: bool,
    pub range_probes: usize,
    pub grid_points: usize,
    pub pair_count: usize,
    pub grid_step: f64,
    pub scan_box: (Vec<f64>, Vec<f64>),
    /// Bounds certified by the construction; empirical values must not exceed them.
    pub certified: CertifiedBounds,
}

impl RegularityReport {
    /// True when every empirical quantity is within its certified bound.
    pub fn within_certified(&self) -> bool {
        let c = &self.certified;
        self.eigenvalue_min >= 1.0 / c.nu - 1e-12
            && self.eigenvalue_max <= c.nu + 1e-12
            && self.drift_max <= c.beta + 1e-12
            && self.lipschitz_max <= c.lipschitz + 1e-9
            && self.range_test_pass
    }
}

/// [OP] verify_regularity: scan eigenvalues, drift and Lipschitz ratios over
/// a grid, and run the exact finite-range test at random probes.
pub fn verify_regularity(
    env: &EnvironmentRealization,
    lo: &[f64],
    hi: &[f64],
    grid_step: f64,
    pair_count: usize,
) -> Result<RegularityReport> {
    let d = env.dim();
    if lo.len() != d || hi.len() != d {
        return Err(Error::usage("scan box endpoints must have length dim"));
    }
    if !(grid_step > 0.0) {
        return Err(Error::usage("grid step must be positive"));
    }
    let certified = env.spec().certified()?;

    let counts: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| (((h - l) / grid_step).floor() as usize).max(1) + 1)
        .collect();
    let total: usize = counts.iter().product();

    let mut a = Matrix::zeros(d);
    let mut b = vec![0.0; d];
    let mut eig_lo = f64::INFINITY;
    let mut eig_hi = f64::NEG_INFINITY;
    let mut drift_max: f64 = 0.0;
    let mut sym_defect: f64 = 0.0;
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..d {
            let k = rem % counts[i];
            rem /= counts[i];
            x[i] = lo[i] + grid_step * k as f64;
        }
        env.eval_into(&x, &mut a, &mut b);
        let (e_lo, e_hi) = a.symmetric_eigen_range();
        eig_lo = eig_lo.min(e_lo);
        eig_hi = eig_hi.max(e_hi);
        drift_max = drift_max.max(linalg::norm(&b));
        sym_defect = sym_defect.max(a.max_symmetry_defect());
    }

    // Lipschitz ratios over random nearby pairs.
    let mut rng = CounterRng::derived(env.seed(), &[tag::REGULARITY, 1]);
    let h = grid_step / 2.0;
    let mut lipschitz: f64 = 0.0;
    let mut a2 = Matrix::zeros(d);
    let mut b2 = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut dir = vec![0.0; d];
    for _ in 0..pair_count {
        for (xi, (l, hb)) in x.iter_mut().zip(lo.iter().zip(hi)) {
            *xi = l + (hb - l) * rng.uniform();
        }
        rng.in_unit_ball(d, &mut dir);
        let n = linalg::norm(&dir);
        if n == 0.0 {
            continue;
        }
        for i in 0..d {
            y[i] = x[i] + h * dir[i] / n;
        }
        env.eval_into(&x, &mut a, &mut b);
        env.eval_into(&y, &mut a2, &mut b2);
        a2.add_scaled(&a, -1.0);
        let db: f64 = b
            .iter()
            .zip(&b2)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        lipschitz = lipschitz.max((a2.frobenius_norm() + db) / h);
    }

    // Exact finite-range test: marks of cells whose influence ball cannot
    // reach the probe are re-drawn; the coefficients must not move by a bit.
    let probes = 100;
    let mut rng = CounterRng::derived(env.seed(), &[tag::REGULARITY, 2]);
    let alt_seed = rng::derive(env.seed(), &[tag::RERANDOMIZE]);
    let radius = env.spec().range / 2.0;
    let mut pass = true;
    for _ in 0..probes {
        for (xi, (l, hb)) in x.iter_mut().zip(lo.iter().zip(hi)) {
            *xi = l + (hb - l) * rng.uniform();
        }
        let far = env.rerandomized(Rerandomization::FarFrom {
            probe: x.clone(),
            radius,
            alt_seed,
        });
        env.eval_into(&x, &mut a, &mut b);
        far.eval_into(&x, &mut a2, &mut b2);
        let bits_equal = a
            .data()
            .iter()
            .zip(a2.data())
            .all(|(p, q)| p.to_bits() == q.to_bits())
            && b.iter().zip(&b2).all(|(p, q)| p.to_bits() == q.to_bits());
        if !bits_equal {
            pass = false;
        }
    }

    Ok(RegularityReport {
        eigenvalue_min: eig_lo,
        eigenvalue_max: eig_hi,
        drift_max,
        lipschitz_max: lipschitz,
        symmetry_defect_max: sym_defect,
        range_test_pass: pass,
        range_probes: probes,
        grid_points: total,
        pair_count,
        grid_step,
        scan_box: (lo.to_vec(), hi.to_vec()),
        certified,
    })
}

/// Classification of the environment by the sign behavior of `b(0, ω)·ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NestlingClass {
    /// `b(0, ω)·ℓ` bounded away from zero from below over all draws.
    NonNestling,
    /// Non-negative but reaching (numerically) zero.
    MarginalNestling,
    /// Takes negative values.
    PlainNestling,
}

/// Monte Carlo estimate of both sides of the drift criterion
/// `E[(b(0,ω)·ℓ)_+] > c₁ E[(b(0,ω)·ℓ)_-]`; the threshold constant is an
/// experiment parameter, so both expectations are reported with standard
/// errors.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionMargin {
    pub mean_positive_part: f64,
    pub mean_negative_part: f64,
    pub se_positive: f64,
    pub se_negative: f64,
    /// Fraction of draws with `b(0,ω)·ℓ < 0`.
    pub fraction_negative: f64,
    pub min_component: f64,
    pub samples: usize,
    pub classification: NestlingClass,
}

/// [OP] criterion_margin: sample `b(0, ω)·ℓ` over fresh environment draws.
pub fn criterion_margin(
    spec: &EnvironmentSpec,
    ell: &[f64],
    samples: usize,
    master_seed: u64,
) -> Result<CriterionMargin> {
    if samples == 0 {
        return Err(Error::usage("criterion_margin needs at least one sample"));
    }
    if ell.len() != spec.dim || !linalg::is_unit(ell, 1e-12) {
        return Err(Error::usage("ell must be a unit vector of length dim"));
    }
    let origin = vec![0.0; spec.dim];
    let mut sum_p = 0.0;
    let mut sum_p2 = 0.0;
    let mut sum_n = 0.0;
    let mut sum_n2 = 0.0;
    let mut negatives = 0usize;
    let mut min_component = f64::INFINITY;
    for k in 0..samples {
        let env = EnvironmentRealization::new(spec, rng::derive(master_seed, &[tag::MARGIN, k as u64]))?;
        let s = env.coefficients(&origin);
        let along = linalg::dot(&s.b, ell);
        let pos = along.max(0.0);
        let neg = (-along).max(0.0);
        sum_p += pos;
        sum_p2 += pos * pos;
        sum_n += neg;
        sum_n2 += neg * neg;
        if along < 0.0 {
            negatives += 1;
        }
        min_component = min_component.min(along);
    }
    let n = samples as f64;
    let mean_p = sum_p / n;
    let mean_n = sum_n / n;
    let var_p = (sum_p2 / n - mean_p * mean_p).max(0.0);
    let var_n = (sum_n2 / n - mean_n * mean_n).max(0.0);
    let classification = if negatives > 0 {
        NestlingClass::PlainNestling
    } else if min_component > 0.0 {
        NestlingClass::NonNestling
    } else {
        NestlingClass::MarginalNestling
    };
    Ok(CriterionMargin {
        mean_positive_part: mean_p,
        mean_negative_part: mean_n,
        se_positive: (var_p / n).sqrt(),
        se_negative: (var_n / n).sqrt(),
        fraction_negative: negatives as f64 / n,
        min_component,
        samples,
        classification,
    })
}
