use super::alpha::AlphaCoefficients;
use crate::error::{Error, Result};
use serde::Serialize;

/// The continuous, positive, strictly decreasing piecewise test function on
/// the slab coordinate `r ∈ [-bL, L]`:
///
/// ```text
/// r ∈ [-bL, -bL+5R]:  α₁ e^{α₂(ε/ν)(bL-5R)} (α₃ - e^{4νβ(r+bL-5R)})
/// r ∈ (-bL+5R, L-5R): e^{-α₂(ε/ν) r}
/// r ∈ [L-5R, L]:      α₄ e^{-α₂(ε/ν)(L-5R)} (α₅ - e^{4νβ(r-L+5R)})
/// ```
///
/// The α identities make it continuous with derivative jump zero at the
/// left junction and non-positive jump at the right junction. Outside
/// `[-bL, L]` it is extended by the constant boundary values (paths are
/// stopped at the slab boundary, so the extension is never exercised).
#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionU {
    pub alpha: AlphaCoefficients,
    /// Back-depth ratio: the slab is `(-bL, L)`.
    pub b: f64,
    pub slab_length: f64,
    left_junction: f64,
    right_junction: f64,
}

impl TestFunctionU {
    /// Requires `bL > 5R` and `L > 5R` so the middle branch contains 0;
    /// smaller slabs degenerate the branch layout and are rejected.
    pub fn new(alpha: AlphaCoefficients, b: f64, slab_length: f64) -> Result<Self> {
        if !(b > 0.0) || !(slab_length > 0.0) {
            return Err(Error::config("slab parameters must be positive"));
        }
        let five_r = 5.0 * alpha.range;
        if b * slab_length <= five_r || slab_length <= five_r {
            return Err(Error::config(format!(
                "test function requires bL > 5R and L > 5R (got bL = {}, L = {}, 5R = {})",
                b * slab_length,
                slab_length,
                five_r
            )));
        }
        let rate = alpha.alpha2 * alpha.epsilon / alpha.nu;
        if rate * (b * slab_length).max(slab_length) > 300.0 {
            return Err(Error::numeric(
                "slab too long: the middle-branch exponential leaves the f64 range",
            ));
        }
        Ok(TestFunctionU {
            b,
            slab_length,
            left_junction: -b * slab_length + five_r,
            right_junction: slab_length - five_r,
            alpha,
        })
    }

    #[inline]
    fn middle_rate(&self) -> f64 {
        self.alpha.alpha2 * self.alpha.epsilon / self.alpha.nu
    }

    #[inline]
    fn boundary_rate(&self) -> f64 {
        4.0 * self.alpha.nu * self.alpha.beta
    }

    pub fn left_junction(&self) -> f64 {
        self.left_junction
    }

    pub fn right_junction(&self) -> f64 {
        self.right_junction
    }

    /// [OP] eval_u.
    pub fn eval(&self, r: f64) -> f64 {
        let back = -self.b * self.slab_length;
        let front = self.slab_length;
        // constant extension outside the slab
        let r = r.clamp(back, front);
        let a = &self.alpha;
        if r <= self.left_junction {
            a.alpha1
                * (self.middle_rate() * (self.b * self.slab_length - 5.0 * a.range)).exp()
                * (a.alpha3 - (self.boundary_rate() * (r - self.left_junction)).exp())
        } else if r < self.right_junction {
            (-self.middle_rate() * r).exp()
        } else {
            a.alpha4
                * (-self.middle_rate() * self.right_junction).exp()
                * (a.alpha5 - (self.boundary_rate() * (r - self.right_junction)).exp())
        }
    }

    /// One-sided derivative from the branch formulas; `side > 0` for the
    /// right-hand derivative.
    fn one_sided_derivative(&self, r: f64, side: f64) -> f64 {
        let back = -self.b * self.slab_length;
        let front = self.slab_length;
        if r < back || (r == back && side < 0.0) || r > front || (r == front && side > 0.0) {
            return 0.0; // constant extension
        }
        let a = &self.alpha;
        let left_branch = r < self.left_junction || (r == self.left_junction && side < 0.0);
        let right_branch = r > self.right_junction || (r == self.right_junction && side > 0.0);
        if left_branch {
            -a.alpha1
                * (self.middle_rate() * (self.b * self.slab_length - 5.0 * a.range)).exp()
                * self.boundary_rate()
                * (self.boundary_rate() * (r - self.left_junction)).exp()
        } else if right_branch {
            -a.alpha4
                * (-self.middle_rate() * self.right_junction).exp()
                * self.boundary_rate()
                * (self.boundary_rate() * (r - self.right_junction)).exp()
        } else {
            -self.middle_rate() * (-self.middle_rate() * r).exp()
        }
    }

    /// [OP] eval_jump: `j(r) = u'(r₊) - u'(r₋)`.
    pub fn jump(&self, r: f64) -> f64 {
        self.one_sided_derivative(r, 1.0) - self.one_sided_derivative(r, -1.0)
    }
}

/// [OP] v_lambda: `v_λ(t, r) = e^{λt} u(r)`.
pub fn v_lambda(lambda: f64, t: f64, r: f64, u: &TestFunctionU) -> f64 {
    (lambda * t).exp() * u.eval(r)
}
