//! Quenched diffusion simulation: Euler–Maruyama stepping, first-exit
//! detection from slab/box/ball regions with optional Brownian-bridge
//! crossing correction, occupation-time accumulation, and annealed/quenched
//! batch drivers that are bit-reproducible for any worker count.

mod batch;
mod occupation;
mod region;
mod simulate;

pub use batch::{annealed_batch, parallel_paths, quenched_batch, run_batch, BatchOutput, EnvSource};
pub use occupation::{GridSpec, OccupationAccumulator};
pub use region::{ExitFace, Region, SlabRegion};
pub use simulate::{simulate_exit, sqrt_spd, step, ExitMode, ExitRecord, PathConfig, Stepper};
