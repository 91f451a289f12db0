//! Numerical laboratory for the Caffarelli-Kohn-Nirenberg critical equation
//!
//! ```text
//! div(|x|^{-2a} grad u) + |x|^{-bp} u^{p-1} = 0   in R^d
//! ```
//!
//! The crate covers the parameter calculus, the explicit radial extremals,
//! the Emden-Fowler cylinder formulation, the pressure function with its
//! Bochner quantity and divergence identity, the integral estimates measured
//! as growth laws, a singular shooting solver for radial solutions, and the
//! spectral location of the symmetry-breaking threshold.

pub mod bubble;
pub mod cli;
pub mod config;
pub mod cylfield;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod grid;
pub mod params;
pub mod pressure;
pub mod radial_ode;
pub mod spectral;
pub mod suites;

pub use error::{Error, Result};
pub use params::{derive_params, ParamSet, Regime};
