//! Shared test oracles, independent of the library's estimation paths.

#![allow(dead_code)]

/// Hitting probability of the right endpoint for the 1-d diffusion with
/// generator `(a/2) u'' + b u'` on `(left, right)`, via a central
/// finite-difference boundary-value solve (Thomas algorithm). Independent
/// route from the scale-function quadrature the library uses.
pub fn tridiagonal_exit_probability(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    interval: (f64, f64),
    x0: f64,
    nodes: usize,
) -> f64 {
    let (left, right) = interval;
    assert!(left < x0 && x0 < right);
    assert!(nodes >= 11);
    let n = nodes - 1; // intervals
    let h = (right - left) / n as f64;
    // interior unknowns u_1..u_{n-1}; u_0 = 0, u_n = 1
    let m = n - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        let x = left + h * (i + 1) as f64;
        let ai = a(x);
        let bi = b(x);
        lower[i] = ai / (2.0 * h * h) - bi / (2.0 * h);
        diag[i] = -ai / (h * h);
        upper[i] = ai / (2.0 * h * h) + bi / (2.0 * h);
    }
    // boundary contributions: u_0 = 0 adds nothing; u_n = 1 moves to the rhs
    rhs[m - 1] = -upper[m - 1];
    // Thomas elimination
    for i in 1..m {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut u = vec![0.0; m];
    u[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
    }
    // linear interpolation including the boundary values
    let pos = (x0 - left) / h;
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    let at = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if j >= n {
            1.0
        } else {
            u[j - 1]
        }
    };
    at(k) * (1.0 - frac) + at(k + 1) * frac
}

/// Closed-form probability that Brownian motion with drift `mu` (unit
/// diffusion) started at 0 exits `(-back, front)` through the front.
pub fn drifted_front_probability(mu: f64, back: f64, front: f64) -> f64 {
    if mu == 0.0 {
        return back / (back + front);
    }
    // s(x) = (1 - e^{-2 mu (x + back)}) / (2 mu)
    let s = |x: f64| (1.0 - (-2.0 * mu * (x + back)).exp()) / (2.0 * mu);
    s(0.0) / s(front)
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn tridiagonal_matches_closed_form_constant_drift() {
        let p = tridiagonal_exit_probability(|_| 1.0, |_| 0.5, (-1.0, 1.0), 0.0, 4001);
        assert!((p - 0.7310585786300049).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn drifted_probability_limits() {
        assert!((drifted_front_probability(0.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((drifted_front_probability(0.5, 1.0, 1.0) - 0.7310585786300049).abs() < 1e-12);
    }
}
