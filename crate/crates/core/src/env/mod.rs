//! Stationary, finite-range-dependent random coefficient fields.
//!
//! A field is a superposition of compactly supported bumps on a jittered
//! lattice: space is tiled by cells of side `R`, each cell holds one bump
//! point placed uniformly in the ball of radius `R/4` around the cell
//! center, and each bump has support radius `R/4`. A bump can therefore
//! influence only points within `R/2` of its cell center, influence balls of
//! distinct cells are disjoint, and marks of cells at distance greater than
//! `R` enter through disjoint coefficient restrictions — an exactly testable
//! finite-range property. A uniform random global lattice offset restores
//! distributional stationarity.
//!
//! Four families share the construction:
//!
//! * `generic-bump` — `a = Id + Σ Sᵢ ψ`, `b = Σ mᵢ ψ + v` with symmetric
//!   matrix marks `Sᵢ` and vector marks `mᵢ`;
//! * `divergence-free` — `a = Id`, `b = ∇·H + v` with a skew-symmetric
//!   stream matrix `H = Σ Aᵢ ψ`, divergence evaluated analytically;
//! * `gradient` — `a = Id`, `b = ∇φ + λℓ` with a scalar potential
//!   `φ = Σ mᵢ ψ`;
//! * `deterministic` — the same machinery keyed to a fixed internal seed
//!   (a singleton environment law; quenched and annealed coincide), used
//!   for oracle tests.
//!
//! Mark amplitudes are clamped at construction so the certified ellipticity,
//! drift, and Lipschitz bounds hold pointwise with probability one.

mod field;
mod realization;
mod regularity;
mod spec;

pub use field::{CoefficientField, ConstantField, FnField};
pub use realization::{CellIndex, CellMarks, EnvironmentRealization, Rerandomization};
pub use regularity::{criterion_margin, verify_regularity, CriterionMargin, NestlingClass, RegularityReport};
pub use spec::{CertifiedBounds, CoefficientSample, EnvironmentSpec, Family};
