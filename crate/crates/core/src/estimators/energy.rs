use crate::error::{Error, Result};
use crate::rng::{derive, tag, CounterRng};
use crate::sde::parallel_paths;
use serde::Serialize;

/// Two-sample energy-distance test with permutation calibration.
#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyReport {
    /// V-statistic `2 E|A-B| - E|A-A'| - E|B-B'|` (all pairs, exact f64).
    pub statistic: f64,
    /// `(1 + #{permuted ≥ observed}) / (permutations + 1)`.
    pub p_value: f64,
    pub permutations: usize,
    pub n_a: usize,
    pub n_b: usize,
}

/// Upper bound on the pooled pairwise-distance matrix (f32 entries).
const MAX_MATRIX_BYTES: usize = 1_600_000_000;

/// The energy V-statistic `2 E|A-B| - E|A-A'| - E|B-B'|` over all pairs,
/// exact in f64 and without the permutation machinery (no distance matrix,
/// so arbitrarily large samples are fine).
pub fn energy_statistic(sample_a: &[Vec<f64>], sample_b: &[Vec<f64>]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::usage("both samples must be nonempty"));
    }
    let dim = sample_a[0].len();
    if sample_a.iter().chain(sample_b).any(|p| p.len() != dim) {
        return Err(Error::usage("all points must share one dimension"));
    }
    let mean = |xs: &[Vec<f64>], ys: &[Vec<f64>]| -> f64 {
        let total: f64 = xs
            .iter()
            .map(|x| ys.iter().map(|y| crate::linalg::dist(x, y)).sum::<f64>())
            .sum();
        total / (xs.len() as f64 * ys.len() as f64)
    };
    Ok(2.0 * mean(sample_a, sample_b) - mean(sample_a, sample_a) - mean(sample_b, sample_b))
}

/// [OP] compare_exit_distributions: energy distance between two point
/// samples plus a label-permutation p-value. The statistic uses the
/// all-pairs (V-statistic) convention, so it is symmetric, non-negative,
/// and exactly zero on identical samples.
pub fn compare_exit_distributions(
    sample_a: &[Vec<f64>],
    sample_b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<DiscrepancyReport> {
    let (n, m) = (sample_a.len(), sample_b.len());
    if n == 0 || m == 0 {
        return Err(Error::usage("both samples must be nonempty"));
    }
    let dim = sample_a[0].len();
    if sample_a.iter().chain(sample_b).any(|p| p.len() != dim) {
        return Err(Error::usage("all points must share one dimension"));
    }
    let pool = n + m;
    if pool * pool * 4 > MAX_MATRIX_BYTES {
        return Err(Error::usage(format!(
            "pooled sample too large for the permutation test ({pool} points)"
        )));
    }

    // flattened pooled points
    let mut points = Vec::with_capacity(pool * dim);
    for p in sample_a.iter().chain(sample_b) {
        points.extend_from_slice(p);
    }
    let at = |i: usize| &points[i * dim..(i + 1) * dim];

    // exact observed statistic in f64
    let statistic = {
        let mean = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
            let mut s = 0.0f64;
            for i in rows.clone() {
                for j in cols.clone() {
                    s += crate::linalg::dist(at(i), at(j));
                }
            }
            s / (rows.len() as f64 * cols.len() as f64)
        };
        2.0 * mean(0..n, n..pool) - mean(0..n, 0..n) - mean(n..pool, n..pool)
    };

    // pooled distance matrix in f32 (sums accumulated in f64)
    let mut dist = vec![0.0f32; pool * pool];
    for i in 0..pool {
        for j in (i + 1)..pool {
            let d = crate::linalg::dist(at(i), at(j)) as f32;
            dist[i * pool + j] = d;
            dist[j * pool + i] = d;
        }
    }
    let row_sums: Vec<f64> = (0..pool)
        .map(|i| dist[i * pool..(i + 1) * pool].iter().map(|&d| d as f64).sum())
        .collect();

    // branchless masked row sums in eight f32 lanes (memory-bound pass per
    // permutation; lane rounding is far below any statistic of interest)
    let stat_for_mask = |mask: &[f32]| -> f64 {
        let mut s_aa = 0.0f64;
        let mut s_ab = 0.0f64;
        let mut s_bb = 0.0f64;
        for i in 0..pool {
            let row = &dist[i * pool..(i + 1) * pool];
            let mut lanes = [0.0f32; 8];
            let mut chunks = row.chunks_exact(8).zip(mask.chunks_exact(8));
            for (dc, mc) in &mut chunks {
                for l in 0..8 {
                    lanes[l] += dc[l] * mc[l];
                }
            }
            let mut u: f64 = lanes.iter().map(|&l| l as f64).sum();
            let rem = row.len() - row.len() % 8;
            for j in rem..row.len() {
                u += (row[j] * mask[j]) as f64;
            }
            if mask[i] > 0.5 {
                s_aa += u;
                s_ab += row_sums[i] - u;
            } else {
                s_bb += row_sums[i] - u;
            }
        }
        let (nf, mf) = (n as f64, m as f64);
        2.0 * s_ab / (nf * mf) - s_aa / (nf * nf) - s_bb / (mf * mf)
    };

    let observed = {
        let mut mask = vec![0.0f32; pool];
        mask[..n].fill(1.0);
        stat_for_mask(&mask)
    };
    // tolerance absorbs f32 storage quantization in near-tie comparisons
    let scale: f64 = row_sums.iter().sum::<f64>() / (pool * pool) as f64;
    let tol = 1e-12 + 1e-9 * scale;

    let perm_stats = parallel_paths(permutations, |p| {
        let mut rng = CounterRng::new(derive(seed, &[tag::PERMUTATION, p as u64]));
        let mut idx: Vec<usize> = (0..pool).collect();
        // Fisher-Yates; only the first n slots matter
        for i in (1..pool).rev() {
            let j = (rng.next() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        let mut mask = vec![0.0f32; pool];
        for &i in &idx[..n] {
            mask[i] = 1.0;
        }
        Ok(stat_for_mask(&mask))
    })?;
    let exceed = perm_stats.iter().filter(|&&s| s >= observed - tol).count();
    Ok(DiscrepancyReport {
        statistic,
        p_value: (1 + exceed) as f64 / (permutations + 1) as f64,
        permutations,
        n_a: n,
        n_b: m,
    })
}
