use super::occupation::OccupationAccumulator;
use super::simulate::{simulate_exit, ExitRecord, PathConfig};
use super::region::Region;
use crate::env::{EnvironmentRealization, EnvironmentSpec};
use crate::error::Result;
use crate::rng::{derive, tag};
use rayon::prelude::*;

/// Paths per parallel work unit. Fixed (never derived from the worker
/// count), so chunk boundaries — and therefore all merged floating-point
/// sums — are identical for any thread pool size.
const CHUNK: usize = 64;

/// Run `f(path_index)` for `0..n` in parallel with deterministic output
/// order. The result is a pure function of `f`, independent of scheduling.
pub fn parallel_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            (lo..hi).map(&f).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Where batch paths get their environment: a fresh draw per path
/// (annealed law) or one shared realization (quenched law).
#[derive(Clone, Copy)]
pub enum EnvSource<'a> {
    Fresh(&'a EnvironmentSpec),
    Fixed(&'a EnvironmentRealization),
}

enum PathEnv<'a> {
    Owned(EnvironmentRealization),
    Shared(&'a EnvironmentRealization),
}

impl<'a> std::ops::Deref for PathEnv<'a> {
    type Target = EnvironmentRealization;
    fn deref(&self) -> &EnvironmentRealization {
        match self {
            PathEnv::Owned(e) => e,
            PathEnv::Shared(e) => e,
        }
    }
}

impl<'a> EnvSource<'a> {
    pub fn dim(&self) -> usize {
        match self {
            EnvSource::Fresh(spec) => spec.dim,
            EnvSource::Fixed(env) => env.spec().dim,
        }
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        match self {
            EnvSource::Fresh(spec) => spec,
            EnvSource::Fixed(env) => env.spec(),
        }
    }

    fn for_path(&self, master_seed: u64, k: usize) -> Result<(PathEnv<'a>, u64)> {
        match self {
            EnvSource::Fresh(spec) => {
                let env_seed = derive(master_seed, &[tag::ENV, k as u64]);
                Ok((PathEnv::Owned(EnvironmentRealization::new(spec, env_seed)?), env_seed))
            }
            EnvSource::Fixed(env) => Ok((PathEnv::Shared(env), env.seed())),
        }
    }
}

/// Records (and optional occupation statistics) of one batch.
pub struct BatchOutput {
    pub records: Vec<ExitRecord>,
    pub occupation: Option<OccupationAccumulator>,
}

/// [OP] annealed_batch: n exit records under the annealed law — each path
/// draws a fresh environment, then runs from the origin.
pub fn annealed_batch(
    spec: &EnvironmentSpec,
    region: &Region,
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<BatchOutput> {
    run_batch(EnvSource::Fresh(spec), region, n, cfg, master_seed)
}

/// [OP] quenched_batch: n exit records in one fixed environment.
pub fn quenched_batch(
    env: &EnvironmentRealization,
    region: &Region,
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<BatchOutput> {
    run_batch(EnvSource::Fixed(env), region, n, cfg, master_seed)
}

pub fn run_batch(
    source: EnvSource<'_>,
    region: &Region,
    n: usize,
    cfg: &PathConfig,
    master_seed: u64,
) -> Result<BatchOutput> {
    cfg.validate()?;
    let x0 = vec![0.0; source.dim()];
    // occupation runs carry a grid-sized accumulator per chunk: cap the
    // number of chunks so peak memory stays bounded. The size depends only
    // on (n, grid), never on the worker count.
    let chunk = match &cfg.occupation {
        Some(_) => n.div_ceil(32).max(CHUNK),
        None => CHUNK,
    };
    let n_chunks = n.div_ceil(chunk);
    let chunks: Vec<(Vec<ExitRecord>, Option<OccupationAccumulator>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(n);
            let mut records = Vec::with_capacity(hi - lo);
            let mut acc = cfg.occupation.clone().map(OccupationAccumulator::new);
            for k in lo..hi {
                let (env, env_seed) = source.for_path(master_seed, k)?;
                let path_seed = derive(master_seed, &[tag::PATH, k as u64]);
                let rec = simulate_exit(
                    &*env,
                    &x0,
                    region,
                    cfg,
                    env_seed,
                    path_seed,
                    acc.as_mut(),
                )?;
                if let Some(acc) = acc.as_mut() {
                    acc.paths += 1;
                }
                records.push(rec);
            }
            Ok((records, acc))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(n);
    let mut occupation: Option<OccupationAccumulator> = None;
    for (recs, acc) in chunks {
        records.extend(recs);
        match (&mut occupation, acc) {
            (slot @ None, Some(a)) => *slot = Some(a),
            (Some(total), Some(a)) => total.merge(&a)?,
            _ => {}
        }
    }
    Ok(BatchOutput { records, occupation })
}
