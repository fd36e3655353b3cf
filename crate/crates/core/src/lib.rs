//! Solvers for 2D steady heat conduction on heterogeneous conductivity fields:
//! direct finite differences, the seamless-domain method (coarse points with
//! oversampled local interpolation) and a finite-difference domain
//! decomposition, plus the metrics and file formats used to compare them.

pub mod counts;
pub mod ddm;
pub mod error;
pub mod fdm;
pub mod field;
pub mod io;
pub mod linear;
pub mod metrics;
pub mod sdm;

pub use error::{Error, Result};
