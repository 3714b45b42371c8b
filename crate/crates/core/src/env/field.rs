use crate::linalg::Matrix;

/// A coefficient field `(a(x), b(x))` the simulator can drive a diffusion
/// against: environments, estimated auxiliary fields, or test closures.
///
/// Implementations must be pure (same `x`, same output) and cheap enough to
/// call once per time step; `eval_into` writes into caller scratch to keep
/// the hot loop allocation-free.
pub trait CoefficientField: Sync {
    fn dim(&self) -> usize;

    /// Write `a(x)` into `a` and `b(x)` into `b`.
    fn eval_into(&self, x: &[f64], a: &mut Matrix, b: &mut [f64]);
}

/// Constant coefficients; handy for oracles and closed-form tests.
#[derive(Clone, Debug)]
pub struct ConstantField {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl ConstantField {
    pub fn new(a: Matrix, b: Vec<f64>) -> Self {
        assert_eq!(a.dim(), b.len());
        ConstantField { a, b }
    }

    /// `a = Id`, `b` constant.
    pub fn unit_diffusion(b: Vec<f64>) -> Self {
        let a = Matrix::identity(b.len());
        ConstantField { a, b }
    }
}

impl CoefficientField for ConstantField {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval_into(&self, _x: &[f64], a: &mut Matrix, b: &mut [f64]) {
        a.copy_from(&self.a);
        b.copy_from_slice(&self.b);
    }
}

/// Coefficients given by a closure `(x, &mut a, &mut b)`.
pub struct FnField<F: Fn(&[f64], &mut Matrix, &mut [f64]) + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut Matrix, &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut Matrix, &mut [f64]) + Sync> CoefficientField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], a: &mut Matrix, b: &mut [f64]) {
        (self.f)(x, a, b);
    }
}
