//! Files, Monte Carlo evaluation and the command-line front end for
//! binned generalized CuSum change detection.

pub mod bench;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod input;
pub mod model;
pub mod report;
pub mod rng;

pub use bgcusum_core as core;
pub use error::{Error, Result};
