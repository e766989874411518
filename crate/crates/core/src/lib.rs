//! Functional principal component analysis of distribution-valued
//! longitudinal data through optimal transport maps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod frechet;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod link;
pub mod measure;
pub mod scores;
pub mod simulation;
pub mod sparse;
pub mod transport;

pub use error::{Error, ErrorClass, Result};
pub use frechet::{Design, Observation, Panel, Payload, Subject};
pub use kernel::Kernel;
pub use link::Link;
pub use measure::GridMeasure;
pub use transport::TransportMap;
