//! Wave-function potential and vector-potential formulations of quantum
//! mechanics and electrodynamics on periodic grids.
//!
//! The crate evolves the Schrodinger equation directly and through a real
//! second-order field `phi` whose image under
//! `psi = -(hbar^2/2m lap - V) phi + i hbar d_t phi` solves it, and does the
//! same for Maxwell's equations in `(E, B)` form and in vector-potential
//! form. Inverse maps rebuild each potential from a recorded solution.

pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod maxwell;
pub mod ops;
pub mod phi;
pub mod reconstruction;
pub mod schrodinger;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, ScalarField, VectorField};
pub use ops::{Backend, Ops};
