//! Phase-field reconstruction of insulating cracks and cavities from
//! boundary Cauchy data on a rectangle.
//!
//! The crate is layered bottom-up: [`grid`] and [`fem`] provide the P1
//! discretisation, [`potentials`] the phase-field nonlinearities,
//! [`reconstruction`] the adjoint gradient method with ε-continuation, and
//! [`datagen`] synthetic measurements from a finer, perturbed mesh.

pub mod datagen;
pub mod error;
pub mod fem;
pub mod grid;
pub mod potentials;
pub mod reconstruction;

pub use error::{Error, Result};
