use crate::env::{CoefficientField, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::sde::{
    run_batch, simulate_exit, EnvSource, ExitRecord, GridSpec, OccupationAccumulator, PathConfig,
    Region,
};
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};

/// Occupation-weighted coefficient estimate on one grid cell. The values
/// are ratios of time-weighted sums, hence convex combinations of true
/// field values: they inherit the spectrum and drift bounds cell-wise.
#[derive(Clone, Debug, Serialize)]
pub struct AuxCell {
    pub mass: f64,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub visits: u64,
}

/// Per-cell estimate of the auxiliary diffusion and drift coefficients on a
/// domain: `a'(x) = E[g a]/E[g]`, `b'(x) = E[g b]/E[g]` realized as
/// time-weighted averages over (environment, path) pairs, since
/// time-averaging along killed paths weights by the occupation density.
///
/// The origin cell and points outside the domain carry the conventional
/// defaults `(Id, 0)` as metadata only — they are estimated like any other
/// cell and never mixed.
#[derive(Clone, Debug, Serialize)]
pub struct AuxFieldEstimate {
    pub grid: GridSpec,
    pub domain: Region,
    pub cells: Vec<Option<AuxCell>>,
    pub origin_cell: usize,
    pub mass_floor: f64,
    /// Cells flagged empty (no mass or mass below the floor).
    pub empty_cells: usize,
    pub n_pairs: usize,
}

impl AuxFieldEstimate {
    /// Build from accumulated occupation statistics. Cells with mass below
    /// `mass_floor` are flagged empty.
    pub fn from_occupation(
        acc: &OccupationAccumulator,
        domain: &Region,
        mass_floor: f64,
        n_pairs: usize,
    ) -> Result<Self> {
        let origin = vec![0.0; domain.dim()];
        let origin_cell = acc
            .grid
            .cell_of(&origin)
            .ok_or_else(|| Error::usage("domain must contain the origin"))?;
        let n = acc.grid.n_cells();
        let mut cells = Vec::with_capacity(n);
        let mut empty = 0usize;
        for flat in 0..n {
            let mass = acc.mass()[flat];
            if mass <= mass_floor || mass <= 0.0 {
                empty += 1;
                cells.push(None);
                continue;
            }
            cells.push(Some(AuxCell {
                mass,
                a: acc.mean_a(flat).expect("mass positive"),
                b: acc.mean_b(flat).expect("mass positive"),
                visits: acc.visits()[flat],
            }));
        }
        Ok(AuxFieldEstimate {
            grid: acc.grid.clone(),
            domain: domain.clone(),
            cells,
            origin_cell,
            mass_floor,
            empty_cells: empty,
            n_pairs,
        })
    }

    /// The paper-convention default outside the estimated region.
    pub fn convention(&self) -> (Matrix, Vec<f64>) {
        let d = self.grid.dim();
        (Matrix::identity(d), vec![0.0; d])
    }

    pub fn cell_at(&self, x: &[f64]) -> Option<&AuxCell> {
        self.grid.cell_of(x).and_then(|flat| self.cells[flat].as_ref())
    }
}

/// [OP] estimate_aux_coefficients: annealed occupation batch on `domain`
/// binned on a grid of side `cell`.
pub fn estimate_aux_coefficients(
    spec: &EnvironmentSpec,
    domain: &Region,
    cell: f64,
    n: usize,
    cfg: &PathConfig,
    mass_floor: f64,
    master_seed: u64,
) -> Result<AuxFieldEstimate> {
    let origin = vec![0.0; spec.dim];
    if !domain.contains(&origin) {
        return Err(Error::usage("aux estimation requires 0 in the domain"));
    }
    let (lo, hi) = domain.bounding_box();
    let mut cfg = cfg.clone();
    cfg.occupation = Some(GridSpec::covering(&lo, &hi, cell)?);
    let batch = run_batch(EnvSource::Fresh(spec), domain, n, &cfg, master_seed)?;
    let acc = batch.occupation.expect("occupation configured");
    AuxFieldEstimate::from_occupation(&acc, domain, mass_floor, n)
}

/// Simulation counters for empty-cell fallbacks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FallbackStats {
    pub fallback_steps: u64,
    pub total_steps: u64,
}

impl FallbackStats {
    pub fn rate(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.fallback_steps as f64 / self.total_steps as f64
        }
    }
}

/// The diffusion attached to an estimated auxiliary field: coefficients are
/// frozen per cell. Paths entering an empty cell borrow the nearest
/// non-empty cell's coefficients; the event is counted, and comparisons
/// with a high fallback rate should be treated as invalid.
pub struct AuxDynamics<'a> {
    estimate: &'a AuxFieldEstimate,
    /// Nearest non-empty cell for every grid cell (identity where non-empty).
    redirect: Vec<u32>,
    fallback_steps: AtomicU64,
    total_steps: AtomicU64,
}

impl<'a> AuxDynamics<'a> {
    pub fn new(estimate: &'a AuxFieldEstimate) -> Result<Self> {
        let n = estimate.grid.n_cells();
        let non_empty: Vec<usize> =
            (0..n).filter(|&flat| estimate.cells[flat].is_some()).collect();
        if non_empty.is_empty() {
            return Err(Error::usage("auxiliary field has no non-empty cells"));
        }
        let centers: Vec<Vec<f64>> =
            non_empty.iter().map(|&flat| estimate.grid.center_of(flat)).collect();
        let mut redirect = vec![0u32; n];
        for flat in 0..n {
            if estimate.cells[flat].is_some() {
                redirect[flat] = flat as u32;
                continue;
            }
            let center = estimate.grid.center_of(flat);
            let nearest = centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    linalg::dist(&center, a)
                        .partial_cmp(&linalg::dist(&center, b))
                        .expect("finite distances")
                })
                .map(|(i, _)| non_empty[i])
                .expect("non-empty set");
            redirect[flat] = nearest as u32;
        }
        Ok(AuxDynamics {
            estimate,
            redirect,
            fallback_steps: AtomicU64::new(0),
            total_steps: AtomicU64::new(0),
        })
    }

    pub fn domain(&self) -> &Region {
        &self.estimate.domain
    }

    pub fn stats(&self) -> FallbackStats {
        FallbackStats {
            fallback_steps: self.fallback_steps.load(Ordering::Relaxed),
            total_steps: self.total_steps.load(Ordering::Relaxed),
        }
    }
}

impl CoefficientField for AuxDynamics<'_> {
    fn dim(&self) -> usize {
        self.estimate.grid.dim()
    }

    fn eval_into(&self, x: &[f64], a: &mut Matrix, b: &mut [f64]) {
        self.total_steps.fetch_add(1, Ordering::Relaxed);
        let flat = match self.estimate.grid.cell_of(x) {
            Some(flat) => flat,
            None => {
                // outside the grid box entirely: conventional defaults
                self.fallback_steps.fetch_add(1, Ordering::Relaxed);
                a.fill_identity();
                b.fill(0.0);
                return;
            }
        };
        let target = self.redirect[flat] as usize;
        if target != flat {
            self.fallback_steps.fetch_add(1, Ordering::Relaxed);
        }
        let cell = self.estimate.cells[target].as_ref().expect("redirect target non-empty");
        a.copy_from(&cell.a);
        b.copy_from_slice(&cell.b);
    }
}

/// [OP] simulate_aux_exit: one path of the auxiliary diffusion from `x0`,
/// stopped on leaving the estimate's domain.
pub fn simulate_aux_exit(
    dynamics: &AuxDynamics<'_>,
    x0: &[f64],
    cfg: &PathConfig,
    path_seed: u64,
) -> Result<ExitRecord> {
    if dynamics.estimate.cell_at(x0).is_none() {
        return Err(Error::usage("x0 must lie in a non-empty cell of the auxiliary field"));
    }
    simulate_exit(dynamics, x0, &dynamics.estimate.domain, cfg, 0, path_seed, None)
}

/// Check of the drift-margin condition on an estimated auxiliary field.
#[derive(Clone, Debug, Serialize)]
pub struct KConditionReport {
    pub epsilon: f64,
    /// `min b̂'(x)·ℓ` over eligible cells; `None` when no cell is eligible.
    pub min_drift_component: Option<f64>,
    pub argmin_cell: Option<usize>,
    pub eligible_cells: usize,
    /// The infimum over the empty set is +∞: reported as a pass, flagged.
    pub empty_infimum: bool,
    pub pass: bool,
}

/// [OP] condition_K_check: infimum of `b̂'·ℓ` over non-empty cells deep
/// inside the domain (`d(x, ∂U) > 5R`, excluding the origin cell).
pub fn condition_k_check(
    estimate: &AuxFieldEstimate,
    ell: &[f64],
    epsilon: f64,
    range: f64,
) -> KConditionReport {
    let mut min_drift: Option<(f64, usize)> = None;
    let mut eligible = 0usize;
    for (flat, cell) in estimate.cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        if flat == estimate.origin_cell {
            continue;
        }
        let center = estimate.grid.center_of(flat);
        if !estimate.domain.contains(&center)
            || estimate.domain.boundary_distance(&center) <= 5.0 * range
        {
            continue;
        }
        eligible += 1;
        let along = linalg::dot(&cell.b, ell);
        if min_drift.map(|(m, _)| along < m).unwrap_or(true) {
            min_drift = Some((along, flat));
        }
    }
    let empty_infimum = eligible == 0;
    let pass = empty_infimum || min_drift.map(|(m, _)| m > epsilon).unwrap_or(false);
    KConditionReport {
        epsilon,
        min_drift_component: min_drift.map(|(m, _)| m),
        argmin_cell: min_drift.map(|(_, flat)| flat),
        eligible_cells: eligible,
        empty_infimum,
        pass,
    }
}
