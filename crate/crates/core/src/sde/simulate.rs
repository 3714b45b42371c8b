use super::occupation::{GridSpec, OccupationAccumulator};
use super::region::{ExitFace, Region};
use crate::env::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};

/// How exits are detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitMode {
    /// Exit at the first iterate outside the region.
    Naive,
    /// Additionally test each planar face for an intra-step Brownian-bridge
    /// crossing; removes the O(√dt) exit-probability bias.
    Bridge,
}

/// Time-stepping configuration for one path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub t_max: f64,
    pub mode: ExitMode,
    /// Record per-cell residence and time-weighted coefficients on this grid.
    #[serde(default)]
    pub occupation: Option<GridSpec>,
    /// Integrate the drift flow only (noise forced to zero).
    #[serde(default)]
    pub zero_noise: bool,
}

impl PathConfig {
    pub fn new(dt: f64, t_max: f64, mode: ExitMode) -> Self {
        PathConfig { dt, t_max, mode, occupation: None, zero_noise: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("t_max must be positive"));
        }
        Ok(())
    }
}

/// One path's exit datum with its seed provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitRecord {
    pub position: Vec<f64>,
    pub time: f64,
    pub face: ExitFace,
    pub env_seed: u64,
    pub path_seed: u64,
}

/// [OP] sqrt_spd: lower-triangular σ with σσᵗ = a (Cholesky order).
pub fn sqrt_spd(a: &Matrix) -> Result<Matrix> {
    if a.max_symmetry_defect() > 1e-12 {
        return Err(Error::numeric("sqrt_spd requires a symmetric matrix"));
    }
    a.cholesky()
}

/// [OP] step: one Euler–Maruyama update `x + b dt + σ √dt ξ` with
/// `(a, b)` evaluated at `x` and `σσᵗ = a`.
pub fn step<F: CoefficientField>(field: &F, x: &[f64], dt: f64, xi: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::usage("dt must be positive"));
    }
    let d = field.dim();
    let mut a = Matrix::zeros(d);
    let mut b = vec![0.0; d];
    field.eval_into(x, &mut a, &mut b);
    let sigma = sqrt_spd(&a)?;
    let mut out = x.to_vec();
    linalg::add_scaled(&mut out, &b, dt);
    let mut noise = vec![0.0; d];
    sigma.matvec_into(xi, &mut noise);
    linalg::add_scaled(&mut out, &noise, dt.sqrt());
    Ok(out)
}

/// Explicit Euler–Maruyama stepper holding per-path scratch state, so
/// single-path drivers and custom estimators share one hot loop.
pub struct Stepper<'a, F: CoefficientField> {
    field: &'a F,
    pub rng: CounterRng,
    dt: f64,
    sqrt_dt: f64,
    zero_noise: bool,
    steps: u64,
    x: Vec<f64>,
    x_prev: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
    sigma: Matrix,
    xi: Vec<f64>,
    noise: Vec<f64>,
}

impl<'a, F: CoefficientField> Stepper<'a, F> {
    pub fn new(field: &'a F, x0: &[f64], dt: f64, zero_noise: bool, path_seed: u64) -> Self {
        let d = field.dim();
        debug_assert_eq!(x0.len(), d);
        Stepper {
            field,
            rng: CounterRng::new(path_seed),
            dt,
            sqrt_dt: dt.sqrt(),
            zero_noise,
            steps: 0,
            x: x0.to_vec(),
            x_prev: x0.to_vec(),
            a: Matrix::zeros(d),
            b: vec![0.0; d],
            sigma: Matrix::zeros(d),
            xi: vec![0.0; d],
            noise: vec![0.0; d],
        }
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn x_prev(&self) -> &[f64] {
        &self.x_prev
    }

    /// Coefficients evaluated at the pre-step point of the last `advance`.
    #[inline]
    pub fn coefficients(&self) -> (&Matrix, &[f64]) {
        (&self.a, &self.b)
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Brownian-bridge exit test for the last step (both endpoints inside).
    pub fn bridge_exit(&mut self, region: &Region) -> Option<(ExitFace, Vec<f64>)> {
        region.bridge_exit(&self.x_prev, &self.x, &self.a, self.dt, &mut self.rng)
    }

    /// One EM step from the current state.
    pub fn advance(&mut self) -> Result<()> {
        self.field.eval_into(&self.x, &mut self.a, &mut self.b);
        std::mem::swap(&mut self.x, &mut self.x_prev);
        self.x.copy_from_slice(&self.x_prev);
        linalg::add_scaled(&mut self.x, &self.b, self.dt);
        if !self.zero_noise {
            for xi in self.xi.iter_mut() {
                *xi = self.rng.normal();
            }
            self.a.cholesky_into(&mut self.sigma)?;
            self.sigma.matvec_into(&self.xi, &mut self.noise);
            linalg::add_scaled(&mut self.x, &self.noise, self.sqrt_dt);
        }
        self.steps += 1;
        Ok(())
    }
}

/// [OP] simulate_exit: run one path until it leaves `region` or `t_max`
/// elapses, optionally accumulating occupation statistics at pre-step
/// points.
pub fn simulate_exit<F: CoefficientField>(
    field: &F,
    x0: &[f64],
    region: &Region,
    cfg: &PathConfig,
    env_seed: u64,
    path_seed: u64,
    mut occupation: Option<&mut OccupationAccumulator>,
) -> Result<ExitRecord> {
    cfg.validate()?;
    if !region.contains(x0) {
        return Err(Error::usage("x0 must lie strictly inside the region"));
    }
    if field.dim() != region.dim() {
        return Err(Error::usage("field and region dimensions differ"));
    }
    let mut stepper = Stepper::new(field, x0, cfg.dt, cfg.zero_noise, path_seed);
    let record = |face: ExitFace, position: Vec<f64>, time: f64| ExitRecord {
        position,
        time,
        face,
        env_seed,
        path_seed,
    };
    loop {
        stepper.advance()?;
        if let Some(acc) = occupation.as_deref_mut() {
            let (a, b) = (&stepper.a, &stepper.b);
            acc.deposit(&stepper.x_prev, cfg.dt, a, b);
        }
        if !region.contains(&stepper.x) {
            let (face, position) = region.place_on_boundary(&stepper.x);
            return Ok(record(face, position, stepper.time()));
        }
        if cfg.mode == ExitMode::Bridge && !cfg.zero_noise {
            if let Some((face, position)) = stepper.bridge_exit(region) {
                return Ok(record(face, position, stepper.time()));
            }
        }
        if stepper.time() >= cfg.t_max {
            return Ok(record(ExitFace::Timeout, stepper.x.clone(), cfg.t_max));
        }
    }
}
