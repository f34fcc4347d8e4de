//! Variational image restoration with the BV double phase energy
//! `|Du|(Ω) + ∫ (a|∇u|)^2 + |u - f|^2`, its ε-regularized approximations,
//! edge-adaptive weights, capped fractional maximal functions, and an
//! experiment harness for the approximation and relaxation properties.

pub mod energy;
pub mod error;
pub mod gamma;
pub mod grid;
pub mod io;
pub mod maximal;
pub mod solver;
pub mod synth;
pub mod weight;

pub use energy::{EnergyReport, RegularizationMode};
pub use error::{Error, Result};
pub use grid::{ScalarField, VectorField};
pub use solver::{Init, SolveOptions, SolveResult, StepRule};
pub use synth::SynthKind;
pub use weight::WeightSpec;
