//! Finite metric-measure spaces: spectra, isoperimetry, observable
//! separation, transport distances and an inequality-checking harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod isoperimetry;
pub mod mmspace;
pub mod separation;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use mmspace::{MMSpace, Subset, SubsetFamily};
