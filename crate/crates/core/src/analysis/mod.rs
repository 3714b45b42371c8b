//! Closed-form companions to the Monte Carlo machinery, used as oracles and
//! verifiers: the alpha coefficients and the piecewise test function whose
//! supermartingale property drives drift-margin arguments, and the
//! one-dimensional scale function with its exit-probability oracle.

mod alpha;
mod scale;
mod test_function;

pub use alpha::{alpha_coefficients, AlphaCoefficients};
pub use scale::{exit_prob_1d_oracle, scale_function, ScaleFunction1D};
pub use test_function::{v_lambda, TestFunctionU};
