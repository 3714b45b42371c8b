use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};

/// Regular grid of cubic cells covering an axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower corner of the covered box.
    pub lo: Vec<f64>,
    /// Cell side length.
    pub cell: f64,
    /// Number of cells per axis.
    pub shape: Vec<usize>,
}

impl GridSpec {
    /// Grid of cells of side `cell` covering `[lo, hi]`.
    pub fn covering(lo: &[f64], hi: &[f64], cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::config("occupation cell size must be positive"));
        }
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
            return Err(Error::config("occupation box must satisfy lo < hi"));
        }
        let shape = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| ((h - l) / cell).ceil().max(1.0) as usize)
            .collect();
        Ok(GridSpec { lo: lo.to_vec(), cell, shape })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell.powi(self.dim() as i32)
    }

    /// Flat index of the cell containing `x`, or `None` outside the box.
    #[inline]
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for i in 0..self.lo.len() {
            let u = (x[i] - self.lo[i]) / self.cell;
            if u < 0.0 {
                return None;
            }
            let k = u as usize;
            if k >= self.shape[i] {
                return None;
            }
            flat = flat * self.shape[i] + k;
        }
        Some(flat)
    }

    /// Center coordinates of a flat cell index.
    pub fn center_of(&self, flat: usize) -> Vec<f64> {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut rem = flat;
        for i in (0..d).rev() {
            idx[i] = rem % self.shape[i];
            rem /= self.shape[i];
        }
        idx.iter()
            .enumerate()
            .map(|(i, k)| self.lo[i] + self.cell * (*k as f64 + 0.5))
            .collect()
    }

    /// Grid with cells `factor` times larger over the same box. Requires the
    /// shape to be divisible by `factor` so aggregation is exact.
    pub fn coarsened(&self, factor: usize) -> Result<GridSpec> {
        if factor == 0 || self.shape.iter().any(|s| s % factor != 0) {
            return Err(Error::usage(format!(
                "grid shape {:?} not divisible by coarsening factor {factor}",
                self.shape
            )));
        }
        Ok(GridSpec {
            lo: self.lo.clone(),
            cell: self.cell * factor as f64,
            shape: self.shape.iter().map(|s| s / factor).collect(),
        })
    }
}

/// Per-cell residence time and time-weighted coefficient sums along paths.
///
/// Merging is exact and order-insensitive up to float rounding: counts are
/// integers and sums are plain additions, so `accumulate(A ∪ B)` equals
/// `merge(accumulate(A), accumulate(B))` bitwise on counts and to rounding
/// on sums.
#[derive(Clone, Debug, Serialize)]
pub struct OccupationAccumulator {
    pub grid: GridSpec,
    dim: usize,
    tri: usize,
    /// Residence time per cell.
    mass: Vec<f64>,
    /// Time-weighted upper-triangle sums of `a` per cell (packed row-major).
    weighted_a: Vec<f64>,
    /// Time-weighted sums of `b` per cell.
    weighted_b: Vec<f64>,
    visits: Vec<u64>,
    /// Total residence time including positions outside the grid box.
    pub total_time: f64,
    /// Number of accumulated paths.
    pub paths: u64,
}

impl OccupationAccumulator {
    pub fn new(grid: GridSpec) -> Self {
        let d = grid.dim();
        let tri = d * (d + 1) / 2;
        let n = grid.n_cells();
        OccupationAccumulator {
            grid,
            dim: d,
            tri,
            mass: vec![0.0; n],
            weighted_a: vec![0.0; n * tri],
            weighted_b: vec![0.0; n * d],
            visits: vec![0; n],
            total_time: 0.0,
            paths: 0,
        }
    }

    #[inline]
    pub(crate) fn deposit(&mut self, x: &[f64], dt: f64, a: &Matrix, b: &[f64]) {
        self.total_time += dt;
        let Some(cell) = self.grid.cell_of(x) else {
            return;
        };
        self.mass[cell] += dt;
        self.visits[cell] += 1;
        let mut t = cell * self.tri;
        for i in 0..self.dim {
            for j in i..self.dim {
                self.weighted_a[t] += dt * a.get(i, j);
                t += 1;
            }
        }
        let wb = &mut self.weighted_b[cell * self.dim..(cell + 1) * self.dim];
        for (o, bi) in wb.iter_mut().zip(b) {
            *o += dt * bi;
        }
    }

    pub fn merge(&mut self, other: &OccupationAccumulator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::usage("cannot merge accumulators over different grids"));
        }
        for (s, o) in self.mass.iter_mut().zip(&other.mass) {
            *s += o;
        }
        for (s, o) in self.weighted_a.iter_mut().zip(&other.weighted_a) {
            *s += o;
        }
        for (s, o) in self.weighted_b.iter_mut().zip(&other.weighted_b) {
            *s += o;
        }
        for (s, o) in self.visits.iter_mut().zip(&other.visits) {
            *s += o;
        }
        self.total_time += other.total_time;
        self.paths += other.paths;
        Ok(())
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Occupation-weighted average of `a` on a cell (symmetric), if visited.
    pub fn mean_a(&self, cell: usize) -> Option<Matrix> {
        let m = self.mass[cell];
        if m <= 0.0 {
            return None;
        }
        let mut out = Matrix::zeros(self.dim);
        let mut t = cell * self.tri;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.weighted_a[t] / m;
                out.set(i, j, v);
                out.set(j, i, v);
                t += 1;
            }
        }
        Some(out)
    }

    /// Occupation-weighted average of `b` on a cell, if visited.
    pub fn mean_b(&self, cell: usize) -> Option<Vec<f64>> {
        let m = self.mass[cell];
        if m <= 0.0 {
            return None;
        }
        Some(
            self.weighted_b[cell * self.dim..(cell + 1) * self.dim]
                .iter()
                .map(|w| w / m)
                .collect(),
        )
    }

    /// Aggregate onto a grid with cells `factor` times larger; exact
    /// (re-binning sums, no re-simulation).
    pub fn coarsened(&self, factor: usize) -> Result<OccupationAccumulator> {
        let coarse_grid = self.grid.coarsened(factor)?;
        let mut out = OccupationAccumulator::new(coarse_grid);
        out.total_time = self.total_time;
        out.paths = self.paths;
        for cell in 0..self.grid.n_cells() {
            if self.visits[cell] == 0 && self.mass[cell] == 0.0 {
                continue;
            }
            let center = self.grid.center_of(cell);
            let coarse = out
                .grid
                .cell_of(&center)
                .expect("fine cell center must lie in the coarse grid");
            out.mass[coarse] += self.mass[cell];
            out.visits[coarse] += self.visits[cell];
            for t in 0..self.tri {
                out.weighted_a[coarse * self.tri + t] += self.weighted_a[cell * self.tri + t];
            }
            for i in 0..self.dim {
                out.weighted_b[coarse * self.dim + i] += self.weighted_b[cell * self.dim + i];
            }
        }
        Ok(out)
    }
}
