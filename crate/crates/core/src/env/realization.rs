use super::field::CoefficientField;
use super::spec::{CoefficientSample, EffectiveAmps, EnvironmentSpec, Family};
use crate::error::Result;
use crate::kernel;
use crate::linalg::{self, Matrix};
use crate::rng::{self, tag, CounterRng};
use dashmap::DashMap;
use smallvec::SmallVec;

/// Integer lattice cell index.
pub type CellIndex = SmallVec<[i64; 4]>;

/// Seed used by the deterministic family: the environment law is a
/// singleton, independent of the caller's master seed.
const DETERMINISTIC_SEED: u64 = 0x00c0_ffee;

/// Marks attached to one lattice cell. Which parts are meaningful depends on
/// the family; all are drawn from the cell's own counter stream.
#[derive(Clone, Debug)]
pub struct CellMarks {
    /// Jittered bump point.
    pub point: Vec<f64>,
    /// Symmetric matrix mark (generic-bump, deterministic).
    pub matrix: Option<Matrix>,
    /// Drift vector mark (generic-bump, deterministic).
    pub drift: Option<Vec<f64>>,
    /// Skew-symmetric stream mark (divergence-free).
    pub stream: Option<Matrix>,
    /// Scalar potential mark (gradient).
    pub potential: Option<f64>,
}

/// Selects cells whose marks are re-drawn from an alternative seed; used by
/// the exact finite-range test.
#[derive(Clone, Debug)]
pub enum Rerandomization {
    /// Cells whose influence ball cannot reach `probe` (center distance > radius).
    FarFrom { probe: Vec<f64>, radius: f64, alt_seed: u64 },
    /// Cells whose influence ball can reach `probe` (center distance <= radius).
    NearTo { probe: Vec<f64>, radius: f64, alt_seed: u64 },
}

impl Rerandomization {
    fn applies(&self, center: &[f64]) -> bool {
        match self {
            Rerandomization::FarFrom { probe, radius, .. } => linalg::dist(center, probe) > *radius,
            Rerandomization::NearTo { probe, radius, .. } => linalg::dist(center, probe) <= *radius,
        }
    }

    fn alt_seed(&self) -> u64 {
        match self {
            Rerandomization::FarFrom { alt_seed, .. } | Rerandomization::NearTo { alt_seed, .. } => *alt_seed,
        }
    }
}

/// One realization ω of an environment law: a pure function of
/// `(spec, seed)`. Immutable after creation and safe to share across
/// workers; the per-cell mark cache is a concurrent pure memo (racing fills
/// recompute identical values).
pub struct EnvironmentRealization {
    spec: EnvironmentSpec,
    seed: u64,
    /// Uniform global lattice offset over one fundamental cell.
    offset: Vec<f64>,
    eff: EffectiveAmps,
    mark_base: u64,
    marks: DashMap<CellIndex, CellMarks>,
    rerandomized: Option<Rerandomization>,
    /// With all effective amplitudes zero the field is spatially constant;
    /// the mark machinery is skipped on evaluation.
    constant_drift: Option<Vec<f64>>,
}

/// [OP] realize: construct the environment realization for `(spec, seed)`.
pub(crate) fn realize(spec: &EnvironmentSpec, seed: u64) -> Result<EnvironmentRealization> {
    spec.validate()?;
    let law_seed = match spec.family {
        Family::Deterministic => DETERMINISTIC_SEED,
        _ => seed,
    };
    let offset = match spec.family {
        Family::Deterministic => vec![0.0; spec.dim],
        _ => {
            let mut rng = CounterRng::derived(law_seed, &[tag::OFFSET]);
            (0..spec.dim).map(|_| rng.uniform() * spec.range).collect()
        }
    };
    let eff = spec.effective_amps();
    let amps_zero = match spec.family {
        Family::GenericBump | Family::Deterministic => eff.matrix == 0.0 && eff.drift == 0.0,
        Family::DivergenceFree => eff.stream == 0.0,
        Family::Gradient => eff.potential == 0.0,
    };
    let constant_drift = amps_zero.then(|| base_drift(spec));
    Ok(EnvironmentRealization {
        eff,
        mark_base: rng::derive(law_seed, &[tag::MARKS]),
        spec: spec.clone(),
        seed,
        offset,
        marks: DashMap::new(),
        rerandomized: None,
        constant_drift,
    })
}

fn base_drift(spec: &EnvironmentSpec) -> Vec<f64> {
    match spec.family {
        Family::Gradient => {
            let ell = spec.ell.as_ref().expect("validated");
            let lambda = spec.lambda.expect("validated");
            ell.iter().map(|l| lambda * l).collect()
        }
        _ => spec.v.clone().unwrap_or_else(|| vec![0.0; spec.dim]),
    }
}

impl EnvironmentRealization {
    pub fn new(spec: &EnvironmentSpec, seed: u64) -> Result<Self> {
        realize(spec, seed)
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// A copy of this realization with selected cells re-randomized.
    /// Marks of unselected cells are bit-identical to the original's.
    pub fn rerandomized(&self, selection: Rerandomization) -> Self {
        EnvironmentRealization {
            spec: self.spec.clone(),
            seed: self.seed,
            offset: self.offset.clone(),
            eff: self.eff,
            mark_base: self.mark_base,
            marks: DashMap::new(),
            rerandomized: Some(selection),
            constant_drift: self.constant_drift.clone(),
        }
    }

    /// Cell index of the lattice cell whose center is nearest to `x`.
    /// By the geometry this is the only cell that can influence `x`.
    pub fn cell_of(&self, x: &[f64]) -> CellIndex {
        x.iter()
            .zip(&self.offset)
            .map(|(xi, oi)| ((xi - oi) / self.spec.range).round() as i64)
            .collect()
    }

    pub fn cell_center(&self, cell: &[i64]) -> Vec<f64> {
        cell.iter()
            .zip(&self.offset)
            .map(|(k, oi)| oi + self.spec.range * (*k as f64))
            .collect()
    }

    fn mark_seed(&self, cell: &[i64], center: &[f64]) -> u64 {
        let base = match &self.rerandomized {
            Some(sel) if sel.applies(center) => rng::derive(sel.alt_seed(), &[tag::RERANDOMIZE]),
            _ => self.mark_base,
        };
        let words: SmallVec<[u64; 4]> = cell.iter().map(|k| *k as u64).collect();
        rng::derive(base, &words)
    }

    fn compute_marks(&self, cell: &[i64]) -> CellMarks {
        let d = self.spec.dim;
        let center = self.cell_center(cell);
        let mut stream = CounterRng::new(self.mark_seed(cell, &center));
        let point = if matches!(self.spec.family, Family::Deterministic) {
            center
        } else {
            let mut unit = vec![0.0; d];
            stream.in_unit_ball(d, &mut unit);
            center
                .iter()
                .zip(&unit)
                .map(|(c, u)| c + self.spec.jitter_radius() * u)
                .collect()
        };
        let mut marks = CellMarks {
            point,
            matrix: None,
            drift: None,
            stream: None,
            potential: None,
        };
        match self.spec.family {
            Family::GenericBump | Family::Deterministic => {
                // entries in [-cap/d, cap/d] keep the Frobenius norm within cap
                let entry_cap = self.eff.matrix / d as f64;
                let mut s = Matrix::zeros(d);
                for i in 0..d {
                    for j in i..d {
                        let e = entry_cap * stream.symmetric();
                        s.set(i, j, e);
                        s.set(j, i, e);
                    }
                }
                marks.matrix = Some(s);
                let entry_cap = self.eff.drift / (d as f64).sqrt();
                marks.drift = Some((0..d).map(|_| entry_cap * stream.symmetric()).collect());
            }
            Family::DivergenceFree => {
                // upper-triangle entries in [-cap/sqrt(d(d-1)), ...] keep |A|_F within cap
                let pairs = (d * (d - 1)) as f64;
                let entry_cap = if d > 1 { self.eff.stream / pairs.sqrt() } else { 0.0 };
                let mut a = Matrix::zeros(d);
                for i in 0..d {
                    for j in (i + 1)..d {
                        let e = entry_cap * stream.symmetric();
                        a.set(i, j, e);
                        a.set(j, i, -e);
                    }
                }
                marks.stream = Some(a);
            }
            Family::Gradient => {
                marks.potential = Some(self.eff.potential * stream.symmetric());
            }
        }
        marks
    }

    /// Marks of a cell, from the memo cache (filling it if necessary).
    pub fn cell_marks(&self, cell: &CellIndex) -> dashmap::mapref::one::Ref<'_, CellIndex, CellMarks> {
        if let Some(m) = self.marks.get(cell) {
            return m;
        }
        self.marks
            .entry(cell.clone())
            .or_insert_with(|| self.compute_marks(cell))
            .downgrade()
    }

    /// [OP] coefficients: evaluate `(a(x, ω), b(x, ω))`.
    pub fn coefficients(&self, x: &[f64]) -> CoefficientSample {
        let mut sample = CoefficientSample::identity(self.spec.dim);
        self.eval_into(x, &mut sample.a, &mut sample.b);
        sample
    }

    /// [OP] divergence_free_coefficients: as `coefficients`, restricted to
    /// the divergence-free family.
    pub fn divergence_free_coefficients(&self, x: &[f64]) -> Result<CoefficientSample> {
        if self.spec.family != Family::DivergenceFree {
            return Err(crate::error::Error::usage(
                "divergence_free_coefficients requires a divergence-free environment",
            ));
        }
        Ok(self.coefficients(x))
    }

    /// [OP] gradient_coefficients: coefficients plus the tilted potential
    /// `ψ(x, ω) = φ(x, ω) + λ ℓ·x`.
    pub fn gradient_coefficients(&self, x: &[f64]) -> Result<(CoefficientSample, f64)> {
        if self.spec.family != Family::Gradient {
            return Err(crate::error::Error::usage(
                "gradient_coefficients requires a gradient environment",
            ));
        }
        let sample = self.coefficients(x);
        let ell = self.spec.ell.as_ref().expect("validated");
        let lambda = self.spec.lambda.expect("validated");
        let phi = self.potential(x);
        Ok((sample, phi + lambda * linalg::dot(ell, x)))
    }

    /// The stream matrix `H(x, ω)` of the divergence-free family
    /// (skew-symmetric, `|H|_F ≤ η`).
    pub fn stream_matrix(&self, x: &[f64]) -> Result<Matrix> {
        if self.spec.family != Family::DivergenceFree {
            return Err(crate::error::Error::usage(
                "stream_matrix requires a divergence-free environment",
            ));
        }
        let d = self.spec.dim;
        let cell = self.cell_of(x);
        let marks = self.cell_marks(&cell);
        let r0 = self.spec.support_radius();
        let r2: f64 = x
            .iter()
            .zip(&marks.point)
            .map(|(xi, pi)| {
                let u = (xi - pi) / r0;
                u * u
            })
            .sum();
        let psi = kernel::psi_of_r2(r2);
        let mut h = Matrix::zeros(d);
        if let Some(stream) = &marks.stream {
            h.add_scaled(stream, psi);
        }
        Ok(h)
    }

    /// The scalar potential `φ(x, ω)` of the gradient family.
    pub fn potential(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.spec.family, Family::Gradient);
        let cell = self.cell_of(x);
        let marks = self.cell_marks(&cell);
        let r0 = self.spec.support_radius();
        let r2: f64 = x
            .iter()
            .zip(&marks.point)
            .map(|(xi, pi)| {
                let u = (xi - pi) / r0;
                u * u
            })
            .sum();
        marks.potential.unwrap_or(0.0) * kernel::psi_of_r2(r2)
    }
}

impl CoefficientField for EnvironmentRealization {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn eval_into(&self, x: &[f64], a: &mut Matrix, b: &mut [f64]) {
        let d = self.spec.dim;
        debug_assert_eq!(x.len(), d);
        a.fill_identity();
        if let Some(drift) = &self.constant_drift {
            b.copy_from_slice(drift);
            return;
        }
        match self.spec.family {
            Family::Gradient => {
                let ell = self.spec.ell.as_ref().expect("validated");
                let lambda = self.spec.lambda.expect("validated");
                for (bi, li) in b.iter_mut().zip(ell) {
                    *bi = lambda * li;
                }
            }
            _ => match &self.spec.v {
                Some(v) => b.copy_from_slice(v),
                None => b.fill(0.0),
            },
        }

        let cell = self.cell_of(x);
        let marks = self.cell_marks(&cell);
        let r0 = self.spec.support_radius();
        let mut scaled: SmallVec<[f64; 4]> = SmallVec::with_capacity(d);
        for (xi, pi) in x.iter().zip(&marks.point) {
            scaled.push((xi - pi) / r0);
        }

        match self.spec.family {
            Family::GenericBump | Family::Deterministic => {
                let r2: f64 = scaled.iter().map(|u| u * u).sum();
                let psi = kernel::psi_of_r2(r2);
                if psi > 0.0 {
                    if let Some(s) = &marks.matrix {
                        a.add_scaled(s, psi);
                    }
                    if let Some(m) = &marks.drift {
                        linalg::add_scaled(b, m, psi);
                    }
                }
            }
            Family::DivergenceFree => {
                let mut grad: SmallVec<[f64; 4]> = smallvec::smallvec![0.0; d];
                kernel::psi_value_and_grad(&scaled, &mut grad);
                if let Some(stream) = &marks.stream {
                    // (∇·H)_j = Σ_k A_kj ∂_k ψ / r0
                    for j in 0..d {
                        let mut s = 0.0;
                        for k in 0..d {
                            s += stream.get(k, j) * grad[k];
                        }
                        b[j] += s / r0;
                    }
                }
            }
            Family::Gradient => {
                let mut grad: SmallVec<[f64; 4]> = smallvec::smallvec![0.0; d];
                kernel::psi_value_and_grad(&scaled, &mut grad);
                let m = marks.potential.unwrap_or(0.0);
                for (bj, g) in b.iter_mut().zip(&grad) {
                    *bj += m * g / r0;
                }
            }
        }
    }
}
