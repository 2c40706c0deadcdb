//! Numerical laboratory for two serially connected strings joined by an
//! interior point mass and stabilized by interface and boundary feedback.
//!
//! The crate covers the whole pipeline:
//!
//! - [`model`]: physical parameters, feedback gains, initial conditions.
//! - [`discretize`]: grids and the averaged finite-difference system
//!   `M ü + D u̇ + K u = 0` together with its first-order generator.
//! - [`integrate`]: trapezoidal (implicit midpoint) time stepping.
//! - [`diagnostics`]: discrete energy, the auxiliary interface variable,
//!   dissipation rate, Lyapunov functionals and decay fits.
//! - [`spectral`]: dense eigenvalue computation with residual verification.
//! - [`certificate`]: closed-form constants of the Lyapunov decay certificate.
//! - [`output`]: CSV / coordinate-format writers shared by the CLI.

pub mod certificate;
pub mod diagnostics;
pub mod discretize;
mod error;
pub mod integrate;
pub mod model;
pub mod output;
pub mod spectral;

pub use error::{Error, Result};
