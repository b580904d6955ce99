//! Numerical engine for capillary interfaces: free energies, first and
//! second variations under ambient and normal perturbations, and the
//! cusp-coalescence and wedge break-up deformations.

pub mod error;
pub mod geometry;
pub mod ode;
pub mod quadrature;

pub use error::{Error, Result};
pub mod deformation;
pub mod energy;
pub mod field;
pub mod scenarios;
pub mod variation;
