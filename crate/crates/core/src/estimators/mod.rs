//! Statistics on top of path batches: exit-probability decay scans,
//! velocity and covariance snapshots, occupation/Green densities, auxiliary
//! coefficient fields with their exit-law comparison, drift-margin checks,
//! supermartingale verification, and displacement tail scans.
//!
//! Every estimator is a pure function of `(inputs, master seed)`.

mod aux;
mod decay;
mod energy;
mod green;
mod supermartingale;
mod tails;
mod velocity;
mod wilson;

pub use aux::{
    condition_k_check, estimate_aux_coefficients, simulate_aux_exit, AuxCell, AuxDynamics,
    AuxFieldEstimate, FallbackStats, KConditionReport,
};
pub use decay::{
    condition_t_scan, fit_log_decay, neighborhood_directions, ConditionTScan, DecayRow, DecayScan,
    DirectionScan, LateralRule, SlopeFit,
};
pub use energy::{compare_exit_distributions, energy_statistic, DiscrepancyReport};
pub use green::{
    density_from_batch, green_shape, green_shell_ratio, occupation_density, GreenDensity,
    ShellRatios, ShellRow,
};
pub use supermartingale::{supermartingale_check, BucketStat, LambdaChoice, SupermartingaleReport};
pub use tails::{
    bernstein_tail_scan, exit_time_tail_scan, heat_kernel_displacement_check, BernsteinReport,
    ExitTimeTailReport, HeatKernelReport, HeatKernelRow,
};
pub use velocity::{
    clt_snapshot, covariance_snapshots, velocity_estimate, CltSnapshot, VelocityEstimate,
};
pub use wilson::{exit_prob_backward, wilson_interval, ExitProbEstimate, Z95};
