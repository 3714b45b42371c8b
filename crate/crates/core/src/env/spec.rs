use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::{self, Matrix};
use serde::{Deserialize, Serialize};

/// Environment family selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "generic-bump")]
    GenericBump,
    #[serde(rename = "divergence-free")]
    DivergenceFree,
    #[serde(rename = "gradient")]
    Gradient,
    #[serde(rename = "deterministic")]
    Deterministic,
}

/// Declarative description of an environment law.
///
/// Field names are the config-file surface; every family reads `dim` and
/// `range` and a family-specific subset of the rest. `validate` rejects
/// inconsistent combinations with an error naming the offending key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub family: Family,
    pub dim: usize,
    /// Dependence range R: lattice cell side; bump support radius is R/4.
    pub range: f64,
    /// Target ellipticity bound: spectrum of `a` certified inside [1/nu, nu].
    #[serde(default = "one")]
    pub nu: f64,
    /// Certified drift bound; defaults to the construction bound.
    #[serde(default)]
    pub beta_cap: Option<f64>,
    /// Sup-norm bound for the stream matrix / potential.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Drift strength along `ell` (gradient family).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Unit direction (gradient family).
    #[serde(default)]
    pub ell: Option<Vec<f64>>,
    /// Mean drift vector (generic-bump, divergence-free, deterministic).
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    /// Cap on the Frobenius norm of symmetric matrix marks.
    #[serde(default)]
    pub amp_matrix: f64,
    /// Cap on the Euclidean norm of drift vector marks.
    #[serde(default)]
    pub amp_drift: f64,
    /// Cap on the Frobenius norm of skew-symmetric stream marks.
    #[serde(default)]
    pub amp_stream: f64,
    /// Cap on the absolute value of scalar potential marks.
    #[serde(default)]
    pub amp_potential: f64,
    /// Default master seed when the spec is used from a config file.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

/// Bounds the construction guarantees pointwise, for every seed.
#[derive(Clone, Debug, Serialize)]
pub struct CertifiedBounds {
    /// Spectrum of `a` lies in `[1/nu, nu]`.
    pub nu: f64,
    /// `|b| <= beta` everywhere.
    pub beta: f64,
    /// `|a(x)-a(y)|_F + |b(x)-b(y)| <= lipschitz |x-y|`.
    pub lipschitz: f64,
    /// Dependence range.
    pub range: f64,
    /// Number of lattice cells whose influence ball can cover one point.
    pub overlap: usize,
}

/// Effective (clamped) mark amplitudes used by the construction.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EffectiveAmps {
    pub matrix: f64,
    pub drift: f64,
    pub stream: f64,
    pub potential: f64,
}

impl EnvironmentSpec {
    /// Convenience constructor for the deterministic family.
    pub fn deterministic(dim: usize, range: f64, v: Vec<f64>) -> Self {
        EnvironmentSpec {
            family: Family::Deterministic,
            dim,
            range,
            nu: 1.0,
            beta_cap: None,
            eta: None,
            lambda: None,
            ell: None,
            v: Some(v),
            amp_matrix: 0.0,
            amp_drift: 0.0,
            amp_stream: 0.0,
            amp_potential: 0.0,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim must be a positive integer"));
        }
        if !(self.range > 0.0) {
            return Err(Error::config("range must be positive"));
        }
        if !(self.nu >= 1.0) {
            return Err(Error::config("nu must satisfy nu >= 1"));
        }
        for (name, amp) in [
            ("amp_matrix", self.amp_matrix),
            ("amp_drift", self.amp_drift),
            ("amp_stream", self.amp_stream),
            ("amp_potential", self.amp_potential),
        ] {
            if !(amp >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if let Some(v) = &self.v {
            if v.len() != self.dim {
                return Err(Error::config("v must have length dim"));
            }
        }
        match self.family {
            Family::GenericBump | Family::Deterministic => {
                if self.amp_matrix > 0.0 && self.nu <= 1.0 {
                    return Err(Error::config(
                        "amp_matrix > 0 requires nu > 1 (the ellipticity cap (1 - 1/nu) would clamp all matrix marks to zero)",
                    ));
                }
                if self.amp_stream > 0.0 || self.amp_potential > 0.0 {
                    return Err(Error::config(
                        "amp_stream/amp_potential only apply to the divergence-free/gradient families",
                    ));
                }
                if self.lambda.is_some() {
                    return Err(Error::config("lambda only applies to the gradient family"));
                }
            }
            Family::DivergenceFree => {
                if self.amp_matrix > 0.0 || self.amp_drift > 0.0 || self.amp_potential > 0.0 {
                    return Err(Error::config(
                        "the divergence-free family takes amp_stream only",
                    ));
                }
                if self.lambda.is_some() {
                    return Err(Error::config("lambda only applies to the gradient family"));
                }
            }
            Family::Gradient => {
                if self.amp_matrix > 0.0 || self.amp_drift > 0.0 || self.amp_stream > 0.0 {
                    return Err(Error::config("the gradient family takes amp_potential only"));
                }
                let lambda = self
                    .lambda
                    .ok_or_else(|| Error::config("gradient family requires lambda"))?;
                if !(lambda > 0.0) {
                    return Err(Error::config("lambda must be positive"));
                }
                let ell = self
                    .ell
                    .as_ref()
                    .ok_or_else(|| Error::config("gradient family requires ell"))?;
                if ell.len() != self.dim {
                    return Err(Error::config("ell must have length dim"));
                }
                if !linalg::is_unit(ell, 1e-12) {
                    return Err(Error::config("ell must be a unit vector (|ell| = 1 within 1e-12)"));
                }
                if self.v.is_some() {
                    return Err(Error::config(
                        "the gradient family has drift lambda * ell; v does not apply",
                    ));
                }
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::config("eta must be positive"));
            }
        }
        if let Some(beta) = self.beta_cap {
            let required = self.construction_drift_bound();
            if beta < required {
                return Err(Error::config(format!(
                    "beta_cap = {beta} is below the construction drift bound {required:.6}; raise beta_cap or lower the amplitudes"
                )));
            }
        }
        Ok(())
    }

    /// Bump support radius `r0 = R/4`.
    pub fn support_radius(&self) -> f64 {
        self.range / 4.0
    }

    /// Jitter radius for bump points, `R/4`.
    pub fn jitter_radius(&self) -> f64 {
        self.range / 4.0
    }

    /// Number of lattice cells whose influence ball can cover one point,
    /// computed from the geometry: cell `k` influences only points within
    /// `jitter + support` of its center, so cells at lattice distance
    /// `R |k - k'|` both reach a point only if `R |k - k'| < 2 (jitter + support)`.
    pub fn overlap_count(&self) -> usize {
        let reach = self.jitter_radius() + self.support_radius();
        let max_offset = (2.0 * reach / self.range).ceil() as i64;
        let mut count = 0usize;
        // count lattice vectors k with R|k| < 2*reach; the geometry gives 1
        let mut stack = vec![Vec::<i64>::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == self.dim {
                let norm2: i64 = prefix.iter().map(|k| k * k).sum();
                if (self.range * (norm2 as f64).sqrt()) < 2.0 * reach {
                    count += 1;
                }
                continue;
            }
            for k in -max_offset..=max_offset {
                let mut next = prefix.clone();
                next.push(k);
                stack.push(next);
            }
        }
        count
    }

    pub(crate) fn effective_amps(&self) -> EffectiveAmps {
        let m = self.overlap_count() as f64;
        let eta = self.eta.unwrap_or(f64::INFINITY);
        EffectiveAmps {
            matrix: (self.amp_matrix).min((1.0 - 1.0 / self.nu) / m),
            drift: self.amp_drift,
            stream: self.amp_stream.min(eta / m),
            potential: self.amp_potential.min(eta / m),
        }
    }

    fn mean_drift_norm(&self) -> f64 {
        match self.family {
            Family::Gradient => self.lambda.unwrap_or(0.0),
            _ => self.v.as_ref().map(|v| linalg::norm(v)).unwrap_or(0.0),
        }
    }

    /// Drift bound the construction guarantees (before any user beta_cap).
    fn construction_drift_bound(&self) -> f64 {
        let eff = self.effective_amps();
        let m = self.overlap_count() as f64;
        let r0 = self.support_radius();
        let grad = kernel::grad_bound() / r0;
        let fluctuation = match self.family {
            Family::GenericBump | Family::Deterministic => m * eff.drift,
            Family::DivergenceFree => m * eff.stream * grad,
            Family::Gradient => m * eff.potential * grad,
        };
        self.mean_drift_norm() + fluctuation
    }

    /// Bounds certified by the construction (validated spec assumed).
    pub fn certified(&self) -> Result<CertifiedBounds> {
        self.validate()?;
        let eff = self.effective_amps();
        let m = self.overlap_count();
        let r0 = self.support_radius();
        let grad = kernel::grad_bound() / r0;
        let hess = kernel::HESSIAN_BOUND / (r0 * r0);
        let mf = m as f64;
        let (lip_a, lip_b) = match self.family {
            Family::GenericBump | Family::Deterministic => {
                (mf * eff.matrix * grad, mf * eff.drift * grad)
            }
            Family::DivergenceFree => (0.0, mf * eff.stream * hess),
            Family::Gradient => (0.0, mf * eff.potential * hess),
        };
        Ok(CertifiedBounds {
            nu: self.nu,
            beta: self.beta_cap.unwrap_or_else(|| self.construction_drift_bound()),
            lipschitz: lip_a + lip_b,
            range: self.range,
            overlap: m,
        })
    }
}

/// One evaluation of the coefficient field.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientSample {
    /// Symmetric diffusion matrix with spectrum in `[1/nu, nu]`.
    pub a: Matrix,
    /// Drift vector with `|b| <= beta`.
    pub b: Vec<f64>,
}

impl CoefficientSample {
    pub fn identity(dim: usize) -> Self {
        CoefficientSample {
            a: Matrix::identity(dim),
            b: vec![0.0; dim],
        }
    }
}
