//! Monge-Ampere type measure-valued valuations on convex functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`forms`]: constant forms on `R^n x (R^n)^*`, primitivity, Lefschetz split, GL action.
//! - [`poly`] and [`minors`]: sparse polynomials, the maps `tau -> P_tau`, `tau -> Q_tau`,
//!   minor spaces and their inverse.
//! - [`convex`]: max-affine, smooth and quadratic convex functions, frames, support functions.
//! - [`measures`]: atomic plus grid-density measures, box masses, pushforwards, Fourier-Laplace.
//! - [`maops`]: the valuations (Alexandrov and C² Monge-Ampere, Hessian measures, `Psi_tau`,
//!   mixed operators, homogeneous decomposition, density extraction, Klain functions).
//! - [`harness`]: seeded suites, JSON I/O and reports used by the CLI.

pub mod convex;
pub mod error;
pub mod forms;
pub mod harness;
pub mod hull;
pub mod linalg;
pub mod maops;
pub mod measures;
pub mod minors;
pub mod poly;

pub use error::{Error, Result};
pub use num_complex::Complex64;
