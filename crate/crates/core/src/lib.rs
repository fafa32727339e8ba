//! Nonparametric regression over random projection tree partitions.
//!
//! The crate grows a binary space partition with random hyperplane splits
//! (alternating per-cell median splits and shared "noisy" splits), refines it
//! in rounds that each halve the average data diameter, and selects one of
//! the rounds either by held-out risk or by a penalized complexity rule. The
//! selected partition backs a piecewise-constant regressor.
//!
//! Modules:
//! - [`geometry`]: point sets, data diameters, doubling-dimension estimates.
//! - [`rptree`]: the randomized splitting core.
//! - [`regress`]: the adaptive outer loop, partition selection and the regressor.
//! - [`baselines`]: axis-parallel k-d and dyadic partitioners.
//! - [`synth`]: synthetic data with known intrinsic dimension.

pub mod baselines;
pub mod error;
pub mod geometry;
pub mod regress;
pub mod rng;
pub mod rptree;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use geometry::{CellData, DiameterMode, DiameterSummary, PointSet};
pub use regress::{Dataset, RegressorModel, Trace};
pub use rng::RngStream;
pub use tree::{PartitionTree, Subtree};
