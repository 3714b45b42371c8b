//! Experiment dispatch: builds the requested estimator run from a parsed
//! config, writes `manifest.json`, `report.json`, and kind-specific CSVs
//! into the output directory, and reports a verdict for CI-style use.
//!
//! Everything numeric inside `report.json` and the CSVs is a pure function
//! of `(config, master seed)`; wall-clock timing lives only in the
//! manifest.

use crate::config::{ExperimentConfig, Kind, RegionConfig};
use anyhow::{anyhow, Context};
use ballistic_core::analysis::{alpha_coefficients, exit_prob_1d_oracle, scale_function, TestFunctionU};
use ballistic_core::env::{EnvironmentRealization, FnField};
use ballistic_core::estimators::*;
use ballistic_core::linalg::Matrix;
use ballistic_core::report as core_report;
use ballistic_core::rng::{derive, tag};
use ballistic_core::sde::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunOutcome {
    /// None: no verdict-bearing check; Some(false) maps to exit status 2.
    pub verdict: Option<bool>,
    pub report_path: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    master_seed: u64,
    tool_version: &'a str,
    wall_clock_seconds: f64,
    seed_derivation: &'a str,
}

pub struct Runner<'a> {
    config: &'a ExperimentConfig,
    master_seed: u64,
    out_dir: PathBuf,
    write_csv: bool,
    csv_files: Vec<String>,
}

impl<'a> Runner<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        master_seed: u64,
        out_dir: PathBuf,
        write_csv: bool,
    ) -> Self {
        Runner { config, master_seed, out_dir, write_csv, csv_files: Vec::new() }
    }

    fn csv<F>(&mut self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<fs::File>) -> ballistic_core::Result<()>,
    {
        if !self.write_csv {
            return Ok(());
        }
        let path = self.out_dir.join(name);
        let file = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut writer = std::io::BufWriter::new(file);
        write(&mut writer)?;
        self.csv_files.push(name.to_string());
        Ok(())
    }

    fn environment(&self) -> anyhow::Result<EnvironmentRealization> {
        let spec = self.config.environment()?;
        Ok(EnvironmentRealization::new(spec, self.master_seed)?)
    }

    fn region(&self, region: &RegionConfig) -> anyhow::Result<(RegionConfig, Region)> {
        let dim = self.config.environment()?.dim;
        let resolved = region.resolved(dim);
        let built = resolved.build()?;
        Ok((resolved, built))
    }

    /// Execute the configured experiment; returns (verdict, result payload).
    pub fn execute(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        match self.config.kind()? {
            Kind::ExitScan => self.run_exit_scan(),
            Kind::Velocity => self.run_velocity(),
            Kind::Clt => self.run_clt(),
            Kind::Occupation => self.run_occupation(),
            Kind::Aux => self.run_aux(),
            Kind::CompareExit => self.run_compare_exit(),
            Kind::CheckK => self.run_check_k(),
            Kind::Supermartingale => self.run_supermartingale(),
            Kind::Bernstein => self.run_bernstein(),
            Kind::ExitTimeTail => self.run_exit_time_tail(),
            Kind::GreenShell => self.run_green_shell(),
            Kind::HeatKernel => self.run_heat_kernel(),
            Kind::Oracle1d => self.run_oracle_1d(),
            Kind::Regularity => self.run_regularity(),
        }
    }

    fn run_exit_scan(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.exit_scan.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let cfg = PathConfig::new(p.dt, p.t_max, p.mode);
        let scan = condition_t_scan(
            spec,
            p.b,
            &p.lengths,
            &p.scan_directions(),
            p.n,
            p.lateral_rule()?,
            &cfg,
            self.master_seed,
        )?;
        for (i, dir) in scan.directions.iter().enumerate() {
            self.csv(&format!("scan_{i}.csv"), |w| {
                core_report::write_decay_scan_csv(w, &dir.scan)
            })?;
        }
        let verdict = scan.consistent;
        Ok((Some(verdict), serde_json::to_value(&scan)?))
    }

    fn run_velocity(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.velocity.clone().expect("kind checked");
        let est = velocity_estimate(self.config.environment()?, p.t, p.n, p.dt, self.master_seed)?;
        Ok((None, serde_json::to_value(&est)?))
    }

    fn run_clt(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.clt.clone().expect("kind checked");
        let snaps = clt_snapshot(self.config.environment()?, &p.s, p.n, p.dt, self.master_seed)?;
        Ok((None, serde_json::to_value(&snaps)?))
    }

    fn run_occupation(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.occupation.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let (region_cfg, region) = self.region(&p.region)?;
        let mut cfg = PathConfig::new(p.dt, p.t_max, p.mode);
        let (lo, hi) = region.bounding_box();
        cfg.occupation = Some(GridSpec::covering(&lo, &hi, p.cell)?);
        let batch = run_batch(EnvSource::Fresh(spec), &region, p.n, &cfg, self.master_seed)?;
        let acc = batch.occupation.as_ref().expect("occupation configured");
        let density = density_from_batch(acc, &batch.records);
        self.csv("grid.csv", |w| {
            core_report::write_grid_csv(w, &density.grid, &density.values)
        })?;
        if p.records {
            let dim = spec.dim;
            self.csv("records.csv", |w| {
                core_report::write_exit_records_csv(w, &batch.records, dim)
            })?;
        }
        let summary = core_report::BatchSummary::new(&batch.records, spec, self.master_seed);
        Ok((
            None,
            json!({
                "region": region_cfg,
                "summary": summary,
                "density": density,
            }),
        ))
    }

    fn run_aux(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.aux.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let (region_cfg, region) = self.region(&p.region)?;
        let cfg = PathConfig::new(p.dt, p.t_max, ExitMode::Naive);
        let est = estimate_aux_coefficients(
            spec,
            &region,
            p.cell,
            p.n,
            &cfg,
            p.mass_floor,
            self.master_seed,
        )?;
        let dim = spec.dim;
        self.csv("aux.csv", |w| write_aux_csv(w, &est, dim))?;
        Ok((
            None,
            json!({
                "region": region_cfg,
                "grid": est.grid,
                "cells": est.grid.n_cells(),
                "empty_cells": est.empty_cells,
                "origin_cell": est.origin_cell,
                "n_pairs": est.n_pairs,
            }),
        ))
    }

    fn run_compare_exit(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.compare_exit.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let (region_cfg, region) = self.region(&p.region)?;
        let cfg = PathConfig::new(p.dt, p.t_max, ExitMode::Naive);
        let est = estimate_aux_coefficients(
            spec,
            &region,
            p.cell,
            p.n_fit,
            &cfg,
            p.mass_floor,
            derive(self.master_seed, &[tag::FIT]),
        )?;
        let dynamics = AuxDynamics::new(&est)?;
        let annealed = annealed_batch(
            spec,
            &region,
            p.n,
            &cfg,
            derive(self.master_seed, &[tag::COMPARE, 1]),
        )?;
        let sample_a: Vec<Vec<f64>> =
            annealed.records.iter().map(|r| r.position.clone()).collect();
        let x0 = vec![0.0; spec.dim];
        let sample_b: Vec<Vec<f64>> = parallel_paths(p.n, |k| {
            simulate_aux_exit(
                &dynamics,
                &x0,
                &cfg,
                derive(self.master_seed, &[tag::COMPARE, 2, k as u64]),
            )
            .map(|r| r.position)
        })?;
        let report = compare_exit_distributions(
            &sample_a,
            &sample_b,
            p.permutations,
            derive(self.master_seed, &[tag::PERMUTATION]),
        )?;
        let fallback = dynamics.stats();
        let fallback_ok = fallback.rate() < 0.01;
        let verdict = report.p_value > p.p_threshold && fallback_ok;
        Ok((
            Some(verdict),
            json!({
                "region": region_cfg,
                "comparison": report,
                "fallback": fallback,
                "fallback_ok": fallback_ok,
                "empty_cells": est.empty_cells,
            }),
        ))
    }

    fn run_check_k(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.check_k.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let (region_cfg, region) = self.region(&p.region)?;
        let cfg = PathConfig::new(p.dt, p.t_max, ExitMode::Naive);
        let est = estimate_aux_coefficients(
            spec,
            &region,
            p.cell,
            p.n_fit,
            &cfg,
            p.mass_floor,
            self.master_seed,
        )?;
        let report = condition_k_check(&est, &p.ell, p.epsilon, spec.range);
        let verdict = report.pass;
        Ok((
            Some(verdict),
            json!({
                "region": region_cfg,
                "report": report,
            }),
        ))
    }

    fn run_supermartingale(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.supermartingale.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let env = self.environment()?;
        let cert = spec.certified()?;
        let alpha = alpha_coefficients(cert.nu, cert.beta, p.epsilon, cert.range)?;
        let u = TestFunctionU::new(alpha, p.b, p.slab_length)?;
        let lateral = if spec.dim >= 2 {
            Some(p.slab_length * p.slab_length)
        } else {
            None
        };
        let slab = SlabRegion::new(p.ell.clone(), p.b * p.slab_length, p.slab_length, lateral)?;
        let cfg = PathConfig::new(p.dt, p.t_max, ExitMode::Bridge);
        let report = supermartingale_check(
            &env,
            &slab,
            &u,
            p.lambda.choice()?,
            &p.bucket_times(),
            p.n,
            &cfg,
            self.master_seed,
        )?;
        // test-function table for plotting
        let back = -p.b * p.slab_length;
        let step = (p.slab_length - back) / 400.0;
        self.csv("u.csv", |w| {
            core_report::write_table_csv(
                w,
                ("r", "u"),
                (0..=400).map(|k| {
                    let r = back + step * k as f64;
                    (r, u.eval(r))
                }),
            )
        })?;
        let verdict = report.pass;
        Ok((Some(verdict), serde_json::to_value(&report)?))
    }

    fn run_bernstein(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.bernstein.clone().expect("kind checked");
        let env = self.environment()?;
        let mut cfg = PathConfig::new(p.dt, f64::MAX, ExitMode::Naive);
        cfg.zero_noise = p.zero_noise;
        let report = bernstein_tail_scan(&env, p.gamma, &p.lengths, p.n, &cfg, self.master_seed)?;
        for (name, scan) in [
            ("bernstein_linear.csv", &report.linear),
            ("bernstein_square.csv", &report.square),
            ("bernstein_cubic.csv", &report.cubic),
        ] {
            self.csv(name, |w| core_report::write_decay_scan_csv(w, scan))?;
        }
        let verdict = report.all_decay();
        Ok((Some(verdict), serde_json::to_value(&report)?))
    }

    fn run_exit_time_tail(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.exit_time_tail.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let cfg = PathConfig::new(p.dt, p.horizon(), ExitMode::Bridge);
        let report = exit_time_tail_scan(
            spec,
            p.delta,
            p.b,
            &p.lengths,
            &p.mu,
            p.n,
            &cfg,
            self.master_seed,
        )?;
        for (mu, scan) in &report.scans {
            self.csv(&format!("tail_mu_{mu}.csv"), |w| {
                core_report::write_decay_scan_csv(w, scan)
            })?;
        }
        let verdict = report.some_multiplier_decays;
        Ok((Some(verdict), serde_json::to_value(&report)?))
    }

    fn run_green_shell(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.green_shell.clone().expect("kind checked");
        let spec = self.config.environment()?;
        let (region_cfg, region) = self.region(&p.region)?;
        let cfg = PathConfig::new(p.dt, p.t_max, ExitMode::Naive);
        let density = occupation_density(
            EnvSource::Fresh(spec),
            &region,
            p.cell,
            p.n,
            &cfg,
            self.master_seed,
        )?;
        let inradius = region.boundary_distance(&vec![0.0; spec.dim]);
        let r_max = p.r_max.unwrap_or(0.2 * inradius);
        let diameter = p.diameter.unwrap_or(2.0 * inradius);
        let shells = green_shell_ratio(&density, diameter, r_max);
        self.csv("grid.csv", |w| {
            core_report::write_grid_csv(w, &density.grid, &density.values)
        })?;
        let verdict = shells.bounded;
        Ok((
            Some(verdict),
            json!({
                "region": region_cfg,
                "r_max": r_max,
                "diameter": diameter,
                "shells": shells,
                "mean_exit_time": density.mean_exit_time,
                "integral": density.integral,
            }),
        ))
    }

    fn run_heat_kernel(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.heat_kernel.clone().expect("kind checked");
        let report = heat_kernel_displacement_check(
            self.config.environment()?,
            &p.t,
            &p.r,
            p.n,
            p.dt,
            self.master_seed,
        )?;
        for row in &report.rows {
            self.csv(&format!("heat_kernel_t_{}.csv", row.t), |w| {
                core_report::write_decay_scan_csv(w, &row.tail)
            })?;
        }
        let verdict = report.all_decay;
        Ok((Some(verdict), serde_json::to_value(&report)?))
    }

    fn run_oracle_1d(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.oracle_1d.clone().expect("kind checked");
        let [left, right] = p.interval;
        let a_value = p.a;
        if !(a_value > 0.0) {
            return Err(anyhow!("oracle-1d: a must be positive"));
        }
        let drift = p.b.clone();
        let oracle = exit_prob_1d_oracle(
            |_| a_value,
            |x| drift.eval(x),
            (left, right),
            p.x0,
            p.grid,
        )?;

        // Monte Carlo on the same dynamics
        let drift_mc = p.b.clone();
        let field = FnField::new(1, move |x: &[f64], a: &mut Matrix, b: &mut [f64]| {
            a.set(0, 0, a_value);
            b[0] = drift_mc.eval(x[0]);
        });
        // the interval as a slab around 0 shifted to (left, right)
        let slab = SlabRegion::new(vec![1.0], -left, right, None)?;
        let region = Region::Slab(slab);
        let cfg = PathConfig::new(p.dt, p.t_max, p.mode);
        let x0 = [p.x0];
        let records = parallel_paths(p.n, |k| {
            simulate_exit(
                &field,
                &x0,
                &region,
                &cfg,
                0,
                derive(self.master_seed, &[tag::PATH, k as u64]),
                None,
            )
        })?;
        let front = records.iter().filter(|r| r.face == ExitFace::Front).count();
        let p_hat = front as f64 / p.n as f64;
        let se = (oracle * (1.0 - oracle) / p.n as f64).sqrt();
        let within = (p_hat - oracle).abs() <= 3.0 * se;

        let scale = scale_function(|_| a_value, |x| p.b.eval(x), (left, right), p.grid)?;
        self.csv("scale.csv", |w| core_report::write_table_csv(w, ("r", "s"), scale.table()))?;
        if p.records {
            self.csv("records.csv", |w| {
                core_report::write_exit_records_csv(w, &records, 1)
            })?;
        }
        let timeouts = records.iter().filter(|r| r.face == ExitFace::Timeout).count();
        Ok((
            Some(within),
            json!({
                "oracle": oracle,
                "mc_estimate": p_hat,
                "se": se,
                "within_3se": within,
                "n": p.n,
                "timeouts": timeouts,
                "quadrature_error_estimate": scale.error_estimate,
            }),
        ))
    }

    fn run_regularity(&mut self) -> anyhow::Result<(Option<bool>, Value)> {
        let p = self.config.regularity.clone().unwrap_or_default();
        let report = describe_environment(self.config, self.master_seed, &p)?;
        let verdict = report.range_test_pass && report.within_certified();
        Ok((Some(verdict), serde_json::to_value(&report)?))
    }
}

/// Regularity report used by both the `regularity` kind and `describe-env`.
pub fn describe_environment(
    config: &ExperimentConfig,
    master_seed: u64,
    params: &crate::config::RegularityParams,
) -> anyhow::Result<ballistic_core::env::RegularityReport> {
    let spec = config.environment()?;
    let env = EnvironmentRealization::new(spec, master_seed)?;
    let reach = 3.0 * spec.range;
    let lo = params.lo.clone().unwrap_or_else(|| vec![-reach; spec.dim]);
    let hi = params.hi.clone().unwrap_or_else(|| vec![reach; spec.dim]);
    let step = params.grid_step.unwrap_or(spec.range / 4.0);
    Ok(ballistic_core::env::verify_regularity(
        &env,
        &lo,
        &hi,
        step,
        params.pairs,
    )?)
}

fn write_aux_csv<W: std::io::Write>(
    w: &mut W,
    est: &AuxFieldEstimate,
    dim: usize,
) -> ballistic_core::Result<()> {
    write!(w, "cell_index")?;
    for i in 1..=dim {
        write!(w, ",c_{i}")?;
    }
    write!(w, ",mass")?;
    for i in 1..=dim {
        for j in i..=dim {
            write!(w, ",a_{i}{j}")?;
        }
    }
    for i in 1..=dim {
        write!(w, ",b_{i}")?;
    }
    writeln!(w)?;
    for (flat, cell) in est.cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        write!(w, "{flat}")?;
        for c in est.grid.center_of(flat) {
            write!(w, ",{c}")?;
        }
        write!(w, ",{}", cell.mass)?;
        for i in 0..dim {
            for j in i..dim {
                write!(w, ",{}", cell.a.get(i, j))?;
            }
        }
        for b in &cell.b {
            write!(w, ",{b}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Run the experiment and persist manifest, report, and CSVs.
pub fn run(
    config: &ExperimentConfig,
    master_seed: u64,
    out_dir: &Path,
    write_csv: bool,
) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let started = Instant::now();

    let mut runner = Runner::new(config, master_seed, out_dir.to_path_buf(), write_csv);
    let kind = config.kind()?;
    let (verdict, result) = runner.execute()?;
    let csv_files = runner.csv_files.clone();

    let mut seeds = json!({
        "master": master_seed,
        "derivation": "splitmix64/v1",
    });
    if let Some(env) = &config.environment {
        seeds["spec_hash"] = Value::String(core_report::spec_hash(env));
    }
    let report = json!({
        "kind": kind.name(),
        "config": config,
        "seeds": seeds,
        "verdict": verdict,
        "csv_files": csv_files,
        "result": result,
    });
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    let manifest = Manifest {
        config_hash: core_report::config_hash(config),
        master_seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        seed_derivation: "splitmix64/v1",
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    Ok(RunOutcome { verdict, report_path })
}
