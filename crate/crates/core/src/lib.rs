//! Two-weight testing conditions for the vector-valued positive dyadic
//! operator `T̄(fσ) = (Σ_Q |τ_Q 𝔼_Q(fσ) 1_Q|^q)^{1/q}` on finite dyadic grids.

pub mod decompose;
pub mod error;
pub mod grid;
pub mod harness;
pub mod instance;
pub mod norm;
pub mod operators;
mod par;
mod simplex;
pub mod suite;
pub mod testing;
pub mod testkit;

pub use error::{Error, Result};
pub use grid::{CellSet, CubeId, DyadicGrid, Region, StepFunction, Weight};
pub use instance::{Exponents, Instance};
