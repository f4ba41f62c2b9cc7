//! Semi-supervised active clustering with weak same-cluster oracles.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: points, datasets, clusterings, centers, radii and margins.
//! - [`oracle`]: simulated oracles that may answer "not sure".
//! - [`ssac`]: the two-phase clustering algorithm, its boundary search and
//!   the coverage checks for the weak-oracle guarantees.
//! - [`datagen`]: synthetic margin-constrained data and embedding files.
//! - [`eval`]: label matching, accuracy and aggregation.
//! - [`experiment`]: the parameter-grid runner behind the `ssac` binary.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geometry;
pub mod oracle;
pub mod ssac;

pub use error::{Error, Result};
