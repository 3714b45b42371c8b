use crate::error::{Error, Result};

/// Tabulated scale function of a one-dimensional diffusion with generator
/// `(a/2) u'' + b u'` on an interval `(left, right)`:
///
/// ```text
/// s(x) = ∫_left^x exp{ -2 ∫_left^y b(z)/a(z) dz } dy
/// ```
///
/// computed by nested trapezoid quadrature on a uniform grid. `s` is
/// strictly increasing with `s(left) = 0`, and exit probabilities are scale
/// ratios.
pub struct ScaleFunction1D {
    left: f64,
    right: f64,
    h: f64,
    values: Vec<f64>,
    /// Richardson estimate of the quadrature error at the right endpoint.
    pub error_estimate: f64,
}

/// [OP] scale_function.
pub fn scale_function(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    interval: (f64, f64),
    grid: usize,
) -> Result<ScaleFunction1D> {
    let (left, right) = interval;
    if !(left < right) {
        return Err(Error::config("scale function needs left < right"));
    }
    if grid < 100 {
        return Err(Error::config("scale function grid must be at least 100"));
    }
    let h = (right - left) / grid as f64;
    // inner cumulative integral of b/a, then outer cumulative of exp(-2 I)
    let mut values = vec![0.0; grid + 1];
    let mut coarse_end = 0.0;
    let mut inner = 0.0;
    let mut f_prev = b(left) / a(left);
    let mut g_prev = 1.0f64; // exp(-2 * 0)
    for j in 1..=grid {
        let y = left + h * j as f64;
        let f = b(y) / a(y);
        inner += 0.5 * h * (f_prev + f);
        let g = (-2.0 * inner).exp();
        values[j] = values[j - 1] + 0.5 * h * (g_prev + g);
        f_prev = f;
        g_prev = g;
    }
    // half-resolution pass for a Richardson error estimate at the endpoint
    if grid % 2 == 0 {
        let h2 = 2.0 * h;
        let mut inner = 0.0;
        let mut f_prev = b(left) / a(left);
        let mut g_prev = 1.0f64;
        let mut acc = 0.0;
        for j in 1..=(grid / 2) {
            let y = left + h2 * j as f64;
            let f = b(y) / a(y);
            inner += 0.5 * h2 * (f_prev + f);
            let g = (-2.0 * inner).exp();
            acc += 0.5 * h2 * (g_prev + g);
            f_prev = f;
            g_prev = g;
        }
        coarse_end = acc;
    }
    let fine_end = values[grid];
    Ok(ScaleFunction1D {
        left,
        right,
        h,
        error_estimate: if coarse_end > 0.0 {
            (fine_end - coarse_end).abs() / 3.0
        } else {
            f64::NAN
        },
        values,
    })
}

impl ScaleFunction1D {
    pub fn interval(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// Linear interpolation of the tabulated values.
    pub fn eval(&self, x: f64) -> f64 {
        let u = ((x - self.left) / self.h).clamp(0.0, (self.values.len() - 1) as f64);
        let k = (u as usize).min(self.values.len() - 2);
        let frac = u - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn end_value(&self) -> f64 {
        *self.values.last().expect("non-empty table")
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// Tabulated `(r, s(r))` pairs.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| (self.left + self.h * j as f64, *v))
    }
}

/// [OP] exit_prob_1d_oracle: probability that the diffusion started at `x0`
/// exits the interval at the right end, `s(x0)/s(right)`.
pub fn exit_prob_1d_oracle(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    interval: (f64, f64),
    x0: f64,
    grid: usize,
) -> Result<f64> {
    if !(interval.0 < x0 && x0 < interval.1) {
        return Err(Error::usage("x0 must lie in the open interval"));
    }
    let s = scale_function(a, b, interval, grid)?;
    Ok(s.eval(x0) / s.end_value())
}
