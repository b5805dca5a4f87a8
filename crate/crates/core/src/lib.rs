//! Numerical core for studying the stability threshold of plane Couette flow
//! perturbations on a periodic box in the sheared frame.

pub mod dns;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod norms;
pub mod operators;
pub mod quadrature;
pub mod random;
pub mod record;
pub mod spectral;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use operators::CoefficientFields;
pub use spectral::{DomainSpec, Grid, PhysicalField, RemeshReport, SpectralField};
pub use state::VelocityState;
