use crate::error::{Error, Result};
use serde::Serialize;

/// The five positive constants behind the piecewise test function, chosen
/// independent of the slab length:
///
/// ```text
/// α₅ = 1 + e^{20νβR}            α₄ = e^{-20νβR}
/// α₂ = min(1, (4ν²β/ε) e^{-20νβR})
/// α₁ = ε α₂ / (4ν²β)            α₃ = 1 + 4ν²β/(ε α₂)
/// ```
///
/// They satisfy `α₁(α₃ - 1) = 1` and `α₄(α₅ - 1) = 1` exactly, which forces
/// continuity of the test function at its branch junctions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub nu: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub range: f64,
}

/// [OP] alpha_coefficients. Inputs with `20νβR > 300` are rejected (the
/// exponentials would leave the f64 range).
pub fn alpha_coefficients(nu: f64, beta: f64, epsilon: f64, range: f64) -> Result<AlphaCoefficients> {
    if !(nu >= 1.0) {
        return Err(Error::config("alpha coefficients require nu >= 1"));
    }
    for (name, v) in [("beta", beta), ("epsilon", epsilon), ("range", range)] {
        if !(v > 0.0) {
            return Err(Error::config(format!("alpha coefficients require {name} > 0")));
        }
    }
    let exponent = 20.0 * nu * beta * range;
    if exponent > 300.0 {
        return Err(Error::numeric(format!(
            "20 nu beta R = {exponent:.3} exceeds the supported exponent range (300)"
        )));
    }
    let e = exponent.exp();
    let ratio = 4.0 * nu * nu * beta / epsilon;
    let alpha2 = (ratio / e).min(1.0);
    Ok(AlphaCoefficients {
        alpha1: alpha2 / ratio,
        alpha2,
        alpha3: 1.0 + ratio / alpha2,
        alpha4: 1.0 / e,
        alpha5: 1.0 + e,
        nu,
        beta,
        epsilon,
        range,
    })
}

impl AlphaCoefficients {
    /// Largest defect in the two algebraic identities (should be ~1e-16).
    pub fn identity_defect(&self) -> f64 {
        let d1 = (self.alpha1 * (self.alpha3 - 1.0) - 1.0).abs();
        let d2 = (self.alpha4 * (self.alpha5 - 1.0) - 1.0).abs();
        d1.max(d2)
    }
}
