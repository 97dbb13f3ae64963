//! Two-type Moran model with interactive neutral reproduction, fittest-type-wins
//! selection, and mutation.
//!
//! The crate provides:
//! - forward simulation of the counting chain and its marked Poisson event stream,
//! - the backward ancestral-influence-graph machinery and the cylinder calculus,
//! - the Frankenstein matching/process and the messy bookkeeping process,
//! - exact and Monte Carlo verification of the factorial moment duality and of
//!   the diffusion-limit moment duality.

pub mod ancestry;
pub mod cli;
pub mod combinatorics;
pub mod cylinder;
pub mod duality;
pub mod frankenstein;
pub mod matrix;
pub mod model;

use num::BigRational;

/// Converts an `f64` to the exact rational it represents.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Converts an exact rational to the nearest `f64`.
pub fn to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().expect("representable rational")
}
