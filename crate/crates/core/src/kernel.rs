//! The compactly supported C² bump kernel `ψ(y) = (1 - |y|²)³` on the unit
//! ball, together with its analytic gradient and certified derivative bounds.
//!
//! The kernel value, first and second derivatives all vanish on `|y| = 1`,
//! so superpositions of scaled copies are globally C² with Lipschitz second
//! derivative.

/// `ψ` as a function of the squared radius `r² = |y|²`.
#[inline]
pub fn psi_of_r2(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r2;
        t * t * t
    }
}

/// One-dimensional profile `ψ(r) = (1 - r²)³` for `|r| < 1`.
#[inline]
pub fn psi_profile(r: f64) -> f64 {
    psi_of_r2(r * r)
}

/// Value and gradient of `ψ` at `y`; the gradient is `-6 (1 - |y|²)² y`.
/// Returns the value; the gradient is written into `grad`.
#[inline]
pub fn psi_value_and_grad(y: &[f64], grad: &mut [f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        grad.fill(0.0);
        return 0.0;
    }
    let t = 1.0 - r2;
    let t2 = t * t;
    let g = -6.0 * t2;
    for (o, v) in grad.iter_mut().zip(y) {
        *o = g * v;
    }
    t2 * t
}

/// Supremum of `|∇ψ|` over the unit ball: `96 / (25 √5)`, attained at
/// `|y| = 1/√5`.
pub fn grad_bound() -> f64 {
    96.0 / (25.0 * 5.0_f64.sqrt())
}

/// Supremum of the operator norm of the Hessian of `ψ` over the unit ball.
/// `∇²ψ = -6(1-s)² I + 24(1-s) y yᵗ` with `s = |y|²`; the norm is bounded by
/// `6(1-s)² + 24 s (1-s) ≤ 8`, attained at `s = 1/3`.
pub const HESSIAN_BOUND: f64 = 8.0;
