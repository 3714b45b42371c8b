//! Declarative experiment configuration, accepted as TOML or JSON.
//!
//! A config carries the environment section, exactly one experiment-kind
//! section, and run-level settings (seed, workers, output directory).
//! Unknown keys are rejected with the offending name; defaults are resolved
//! at parse time so reports can echo the full effective configuration.

use anyhow::{anyhow, bail, Context};
use ballistic_core::env::EnvironmentSpec;
use ballistic_core::sde::{ExitMode, Region, SlabRegion};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub environment: Option<EnvironmentSpec>,

    #[serde(default, rename = "exit-scan", skip_serializing_if = "Option::is_none")]
    pub exit_scan: Option<ExitScanParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<AuxParams>,
    #[serde(default, rename = "compare-exit", skip_serializing_if = "Option::is_none")]
    pub compare_exit: Option<CompareExitParams>,
    #[serde(default, rename = "check-K", skip_serializing_if = "Option::is_none")]
    pub check_k: Option<CheckKParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supermartingale: Option<SupermartingaleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernstein: Option<BernsteinParams>,
    #[serde(default, rename = "exit-time-tail", skip_serializing_if = "Option::is_none")]
    pub exit_time_tail: Option<ExitTimeTailParams>,
    #[serde(default, rename = "green-shell", skip_serializing_if = "Option::is_none")]
    pub green_shell: Option<GreenShellParams>,
    #[serde(default, rename = "heat-kernel", skip_serializing_if = "Option::is_none")]
    pub heat_kernel: Option<HeatKernelParams>,
    #[serde(default, rename = "oracle-1d", skip_serializing_if = "Option::is_none")]
    pub oracle_1d: Option<Oracle1dParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    ExitScan,
    Velocity,
    Clt,
    Occupation,
    Aux,
    CompareExit,
    CheckK,
    Supermartingale,
    Bernstein,
    ExitTimeTail,
    GreenShell,
    HeatKernel,
    Oracle1d,
    Regularity,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::ExitScan => "exit-scan",
            Kind::Velocity => "velocity",
            Kind::Clt => "clt",
            Kind::Occupation => "occupation",
            Kind::Aux => "aux",
            Kind::CompareExit => "compare-exit",
            Kind::CheckK => "check-K",
            Kind::Supermartingale => "supermartingale",
            Kind::Bernstein => "bernstein",
            Kind::ExitTimeTail => "exit-time-tail",
            Kind::GreenShell => "green-shell",
            Kind::HeatKernel => "heat-kernel",
            Kind::Oracle1d => "oracle-1d",
            Kind::Regularity => "regularity",
        }
    }
}

impl ExperimentConfig {
    /// Parse from a file path; the format is chosen by extension
    /// (`.json` → JSON, anything else → TOML).
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        config.validate()?;
        Ok(config)
    }

    #[cfg(test)]
    pub fn from_toml_text(text: &str) -> anyhow::Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    fn present_kinds(&self) -> Vec<Kind> {
        let mut kinds = Vec::new();
        if self.exit_scan.is_some() {
            kinds.push(Kind::ExitScan);
        }
        if self.velocity.is_some() {
            kinds.push(Kind::Velocity);
        }
        if self.clt.is_some() {
            kinds.push(Kind::Clt);
        }
        if self.occupation.is_some() {
            kinds.push(Kind::Occupation);
        }
        if self.aux.is_some() {
            kinds.push(Kind::Aux);
        }
        if self.compare_exit.is_some() {
            kinds.push(Kind::CompareExit);
        }
        if self.check_k.is_some() {
            kinds.push(Kind::CheckK);
        }
        if self.supermartingale.is_some() {
            kinds.push(Kind::Supermartingale);
        }
        if self.bernstein.is_some() {
            kinds.push(Kind::Bernstein);
        }
        if self.exit_time_tail.is_some() {
            kinds.push(Kind::ExitTimeTail);
        }
        if self.green_shell.is_some() {
            kinds.push(Kind::GreenShell);
        }
        if self.heat_kernel.is_some() {
            kinds.push(Kind::HeatKernel);
        }
        if self.oracle_1d.is_some() {
            kinds.push(Kind::Oracle1d);
        }
        if self.regularity.is_some() {
            kinds.push(Kind::Regularity);
        }
        kinds
    }

    /// The unique experiment kind of this config.
    pub fn kind(&self) -> anyhow::Result<Kind> {
        let kinds = self.present_kinds();
        match kinds.as_slice() {
            [one] => Ok(*one),
            [] => bail!("config contains no experiment section (expected exactly one kind)"),
            many => bail!(
                "config contains {} experiment sections ({}); exactly one kind is allowed",
                many.len(),
                many.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
            ),
        }
    }

    pub fn environment(&self) -> anyhow::Result<&EnvironmentSpec> {
        self.environment
            .as_ref()
            .ok_or_else(|| anyhow!("this experiment kind requires an [environment] section"))
    }

    /// Master seed resolution order: CLI flag (handled by the caller),
    /// top-level `seed`, environment `seed`, then 0.
    pub fn master_seed(&self) -> u64 {
        self.seed
            .or_else(|| self.environment.as_ref().and_then(|e| e.seed))
            .unwrap_or(0)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let kind = self.kind()?;
        if let Some(env) = &self.environment {
            env.validate()?;
        }
        match kind {
            Kind::ExitScan => {
                let p = self.exit_scan.as_ref().expect("kind checked");
                self.environment()?;
                if !ballistic_core::linalg::is_unit(&p.ell, 1e-12) {
                    bail!("exit-scan: ell must be a unit vector (|ell| = 1 within 1e-12)");
                }
                if p.lengths.len() < 3 {
                    bail!("exit-scan: L must list at least 3 increasing slab lengths");
                }
                p.lateral_rule()?;
            }
            Kind::Velocity | Kind::Clt | Kind::Bernstein | Kind::HeatKernel => {
                self.environment()?;
            }
            Kind::Occupation | Kind::Aux | Kind::CheckK | Kind::CompareExit | Kind::GreenShell => {
                let dim = self.environment()?.dim;
                let region = match kind {
                    Kind::Occupation => &self.occupation.as_ref().unwrap().region,
                    Kind::Aux => &self.aux.as_ref().unwrap().region,
                    Kind::CheckK => &self.check_k.as_ref().unwrap().region,
                    Kind::CompareExit => &self.compare_exit.as_ref().unwrap().region,
                    Kind::GreenShell => &self.green_shell.as_ref().unwrap().region,
                    _ => unreachable!(),
                };
                region.resolved(dim).build()?;
            }
            Kind::Supermartingale => {
                self.environment()?;
                let p = self.supermartingale.as_ref().unwrap();
                if !(p.epsilon > 0.0) {
                    bail!("supermartingale: epsilon must be positive");
                }
            }
            Kind::ExitTimeTail => {
                self.environment()?;
            }
            Kind::Oracle1d => {}
            Kind::Regularity => {
                self.environment()?;
            }
        }
        Ok(())
    }
}

fn one() -> f64 {
    1.0
}

fn default_mode() -> ExitMode {
    ExitMode::Bridge
}

fn default_perturbation() -> f64 {
    0.1
}

fn dt_scan() -> f64 {
    0.01
}

fn dt_fine() -> f64 {
    1e-3
}

fn t_max_default() -> f64 {
    500.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitScanParams {
    pub ell: Vec<f64>,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(rename = "L")]
    pub lengths: Vec<f64>,
    pub n: usize,
    /// Explicit scan directions; derived from `ell` and `perturbation`
    /// when omitted.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// "square" (|Π| < L²), "delta" (|Π| < L/√delta), or "none".
    #[serde(default = "default_lateral")]
    pub lateral: String,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "dt_scan")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default = "default_mode")]
    pub mode: ExitMode,
}

fn default_lateral() -> String {
    "square".into()
}

impl ExitScanParams {
    pub fn lateral_rule(&self) -> anyhow::Result<ballistic_core::estimators::LateralRule> {
        use ballistic_core::estimators::LateralRule;
        match self.lateral.as_str() {
            "square" => Ok(LateralRule::SquareOfLength),
            "none" => Ok(LateralRule::None),
            "delta" => {
                let delta = self
                    .delta
                    .ok_or_else(|| anyhow!("exit-scan: lateral = \"delta\" requires the delta key"))?;
                Ok(LateralRule::OverSqrtDelta(delta))
            }
            other => bail!("exit-scan: unknown lateral rule {other:?} (square | delta | none)"),
        }
    }

    pub fn scan_directions(&self) -> Vec<Vec<f64>> {
        match &self.directions {
            Some(dirs) => dirs.clone(),
            None => ballistic_core::estimators::neighborhood_directions(&self.ell, self.perturbation),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityParams {
    pub t: f64,
    pub n: usize,
    #[serde(default = "dt_scan")]
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltParams {
    pub s: Vec<f64>,
    pub n: usize,
    #[serde(default = "dt_scan")]
    pub dt: f64,
}

/// Stopping geometry section shared by the grid-based kinds.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "shape", rename_all = "kebab-case")]
pub enum RegionConfig {
    Ball {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Slab {
        ell: Vec<f64>,
        front: f64,
        back_depth: f64,
        #[serde(default)]
        lateral: Option<f64>,
    },
}

impl RegionConfig {
    pub fn build(&self) -> anyhow::Result<Region> {
        match self {
            RegionConfig::Ball { radius, center } => {
                let center = center.clone().ok_or_else(|| {
                    anyhow!("region: ball center must be resolved before building")
                })?;
                Ok(Region::ball(center, *radius)?)
            }
            RegionConfig::Box { lo, hi } => Ok(Region::axis_box(lo.clone(), hi.clone())?),
            RegionConfig::Slab { ell, front, back_depth, lateral } => Ok(Region::Slab(
                SlabRegion::new(ell.clone(), *back_depth, *front, *lateral)?,
            )),
        }
    }

    /// Fill the ball center with the origin of the environment's dimension.
    pub fn resolved(&self, dim: usize) -> RegionConfig {
        match self {
            RegionConfig::Ball { radius, center: None } => RegionConfig::Ball {
                radius: *radius,
                center: Some(vec![0.0; dim]),
            },
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationParams {
    pub region: RegionConfig,
    pub cell: f64,
    pub n: usize,
    #[serde(default = "dt_fine")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default = "default_mode")]
    pub mode: ExitMode,
    /// Also stream the exit records to records.csv.
    #[serde(default)]
    pub records: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxParams {
    pub region: RegionConfig,
    pub cell: f64,
    pub n: usize,
    #[serde(default = "dt_fine")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default)]
    pub mass_floor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareExitParams {
    pub region: RegionConfig,
    #[serde(default = "default_compare_cell")]
    pub cell: f64,
    #[serde(default = "default_compare_fit")]
    pub n_fit: usize,
    #[serde(default = "default_compare_n")]
    pub n: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default = "default_compare_dt")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default)]
    pub mass_floor: f64,
    /// Verdict threshold on the permutation p-value.
    #[serde(default = "default_p_threshold")]
    pub p_threshold: f64,
}

fn default_compare_cell() -> f64 {
    0.05
}
fn default_compare_fit() -> usize {
    50_000
}
fn default_compare_n() -> usize {
    5000
}
fn default_permutations() -> usize {
    99
}
fn default_compare_dt() -> f64 {
    5e-4
}
fn default_p_threshold() -> f64 {
    0.01
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckKParams {
    pub region: RegionConfig,
    pub cell: f64,
    pub n_fit: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub ell: Vec<f64>,
    #[serde(default = "dt_fine")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default)]
    pub mass_floor: f64,
}

fn default_epsilon() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaParam {
    Fixed(f64),
    Mode(String),
}

impl LambdaParam {
    pub fn choice(&self) -> anyhow::Result<ballistic_core::estimators::LambdaChoice> {
        use ballistic_core::estimators::LambdaChoice;
        match self {
            LambdaParam::Fixed(v) => Ok(LambdaChoice::Fixed(*v)),
            LambdaParam::Mode(s) if s == "search" => Ok(LambdaChoice::Search),
            LambdaParam::Mode(s) => bail!("supermartingale: lambda must be a number or \"search\", got {s:?}"),
        }
    }
}

fn default_lambda() -> LambdaParam {
    LambdaParam::Mode("search".into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupermartingaleParams {
    pub epsilon: f64,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaParam,
    #[serde(rename = "L")]
    pub slab_length: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub ell: Vec<f64>,
    #[serde(default)]
    pub buckets: Option<Vec<f64>>,
    #[serde(default = "default_smg_n")]
    pub n: usize,
    #[serde(default = "default_smg_dt")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
}

fn default_smg_n() -> usize {
    20_000
}
fn default_smg_dt() -> f64 {
    5e-3
}

impl SupermartingaleParams {
    pub fn bucket_times(&self) -> Vec<f64> {
        self.buckets
            .clone()
            .unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinParams {
    pub gamma: f64,
    #[serde(rename = "L")]
    pub lengths: Vec<f64>,
    pub n: usize,
    #[serde(default = "dt_fine")]
    pub dt: f64,
    #[serde(default)]
    pub zero_noise: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitTimeTailParams {
    pub delta: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(rename = "L")]
    pub lengths: Vec<f64>,
    pub mu: Vec<f64>,
    pub n: usize,
    #[serde(default = "dt_scan")]
    pub dt: f64,
    #[serde(default)]
    pub t_max: Option<f64>,
}

impl ExitTimeTailParams {
    pub fn horizon(&self) -> f64 {
        self.t_max.unwrap_or_else(|| {
            let max_mu = self.mu.iter().cloned().fold(0.0f64, f64::max);
            let max_l = self.lengths.iter().cloned().fold(0.0f64, f64::max);
            2.0 * max_mu * max_l
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenShellParams {
    pub region: RegionConfig,
    pub cell: f64,
    pub n: usize,
    #[serde(default = "dt_fine")]
    pub dt: f64,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub diameter: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatKernelParams {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub n: usize,
    #[serde(default = "dt_scan")]
    pub dt: f64,
}

/// Piecewise-constant drift: a number, or rows `[x_lo, x_hi, value]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Constant(f64),
    Piecewise(Vec<[f64; 3]>),
}

impl DriftSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftSpec::Constant(v) => *v,
            DriftSpec::Piecewise(rows) => rows
                .iter()
                .find(|row| x >= row[0] && x < row[1])
                .map(|row| row[2])
                .unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle1dParams {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "default_oracle_drift")]
    pub b: DriftSpec,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_oracle_grid")]
    pub grid: usize,
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_oracle_dt")]
    pub dt: f64,
    #[serde(default = "default_mode")]
    pub mode: ExitMode,
    #[serde(default = "t_max_default")]
    pub t_max: f64,
    /// Also stream the Monte Carlo exit records to records.csv.
    #[serde(default)]
    pub records: bool,
}

fn default_oracle_drift() -> DriftSpec {
    DriftSpec::Constant(0.5)
}
fn default_interval() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_oracle_grid() -> usize {
    100_000
}
fn default_oracle_n() -> usize {
    200_000
}
fn default_oracle_dt() -> f64 {
    1e-4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityParams {
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_pairs() -> usize {
    200
}

impl Default for RegularityParams {
    fn default() -> Self {
        RegularityParams { lo: None, hi: None, grid_step: None, pairs: default_pairs() }
    }
}
