//! Numerical laboratory for massive and domain-wall Dirac operators on
//! product cylinders over a boundary circle.
//!
//! The crate reduces every scenario to independent one-dimensional Dirac
//! blocks, solves them by a transfer-matrix route and by a discretized
//! oracle, and builds indices, eta-invariant differences, gluing defects and
//! closed-form cylinder heat-kernel traces on top of those spectra.
//!
//! Module map:
//! - [`model`]: scenario description and validation.
//! - [`boundary`]: boundary eigendata, projections, symplectic form.
//! - [`modes`]: mode reduction, spectra, kernels and indices.
//! - [`heat`]: cylinder heat kernels and their traced quantities.
//! - [`eta`]: eta differences, supertraces and gluing defects.
//! - [`harness`]: experiment registry, reports and sweeps.

pub mod boundary;
pub mod error;
pub mod eta;
pub mod harness;
pub mod heat;
pub mod model;
pub mod modes;
pub mod numerics;

pub use error::{Error, Result};
pub use model::{validate, BoundaryCondition, BoundaryModel, BulkShape, MassProfile, Scenario, Side};
