//! Reduced-order modelling of the 2D effective-mass Schrödinger equation in
//! quantum-dot arrays: finite-volume DNS, POD bases from DNS snapshots, Galerkin
//! reduced Hamiltonians, and a plane-wave comparison basis.
//!
//! Units are nm and eV throughout; fields are in kV/cm.

pub mod dns;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod fpw;
pub mod io;
pub mod metrics;
pub mod pod;
pub mod rom;
pub mod scenario;
pub mod sparse;
pub mod units;

pub use error::{Error, Result};
