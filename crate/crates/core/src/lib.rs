//! Binned generalized CuSum (BG-CuSum) change detection.
//!
//! The pre-change distribution `f` is known; the post-change distribution is
//! only assumed to differ from `f` on some bin of an equiprobable partition.
//! The detector learns the post-change bin masses online and updates its
//! statistic in constant time per sample.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod binning;
pub mod detector;
pub mod distributions;
pub mod error;
pub mod n_selection;
pub mod reference;

pub use binning::{is_distinguishable, smallest_distinguishable_n, BinPartition};
pub use detector::{
    oracle_cusum_step, run_until_stop, Detector, DetectorConfig, DetectorState, StopReason,
    StoppingReport, TracePoint, TIE_TOL,
};
pub use distributions::{kl_binned, Atom, Component, GeneralizedPdf};
pub use error::{Error, Result};
pub use n_selection::{check_prop_a1, choose_n, crossing_set, mn_bounds, CrossingSet, NSelectionParams};
pub use reference::{shat_statistic, stilde_direct, ShatTracker};
