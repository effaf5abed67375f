//! Phase-space simulation of dispersive qubit readout with measurement
//! undoing.

// `!(x > 0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appendix;
pub mod cavity;
pub mod config;
pub mod csv;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod linalg;
pub mod protocols;
pub mod qubit;
pub mod scalar;

pub use error::{Error, Result};

pub type Complex = scalar::C<f64>;
pub type Matrix = linalg::ComplexMatrix<f64>;
pub type Density = linalg::DensityMatrix<f64>;
pub type Params = fields::SystemParams<f64>;
pub type Fields = fields::FieldTrajectory<f64>;
