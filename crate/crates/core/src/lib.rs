//! Crowd labeling with candidate sets.
//!
//! Synthetic annotators label instances of known difficulty, either with a
//! single label (full labeling) or with a set of plausible labels (candidate
//! labeling). Their answers are aggregated by full or candidate voting, and
//! the aggregation error is estimated over repeated runs together with its
//! squared-bias/variance decomposition.
//!
//! The modules follow the pipeline:
//!
//! - [`sampling`]: reproducible random streams, Dirichlet and categorical draws
//! - [`truthgen`]: instance difficulties and ground truth
//! - [`annotators`]: behavior distributions and candidate sets
//! - [`voting`]: full and candidate voting with exact tie detection
//! - [`evaluation`]: error and bias/variance estimates
//! - [`experiment`]: scenarios, sweeps and result files
//! - [`cli`]: the `crowdcand` command

pub mod annotators;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod sampling;
pub mod truthgen;
pub mod voting;

pub use error::{Error, Result};
