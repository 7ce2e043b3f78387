//! Streaming BG-CuSum detector.
//!
//! The statistic is a CuSum whose post-change bin masses are replaced by an
//! add-`R` smoothed histogram of the samples observed since the current
//! change-point estimate `lambda`. Each step costs one bin lookup and one
//! logarithm; a reset clears the `N + H` window counters.

use alloc::vec::Vec;

use crate::binning::BinPartition;
use crate::error::{Error, Result};

/// Sums within this of zero count as zero. Window sums that vanish exactly
/// (they do, since the log ratios take few distinct values) otherwise come
/// out as `+-1e-16` and decide the change-point estimate by rounding.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Regularizer `R` added to every bin count.
    pub r: f64,
    /// Alarm threshold `b`, natural-log scale.
    pub b: f64,
}

impl DetectorConfig {
    pub fn new(r: f64, b: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig("R must be positive"));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidConfig("b must be nonnegative"));
        }
        Ok(Self { r, b })
    }

    /// `R = N`, the usual choice.
    pub fn with_default_r(partition: &BinPartition, b: f64) -> Result<Self> {
        Self::new(partition.n_continuous() as f64, b)
    }
}

/// `ln(ghat / f)` for a bin holding `count` of the `window_len` samples in
/// the estimation window. An empty window uses `f` itself, so the ratio is
/// exactly one.
#[inline]
pub(crate) fn log_ratio(count: u64, window_len: u64, r: f64, n_bins: usize, f_mass: f64) -> f64 {
    if window_len == 0 {
        return 0.0;
    }
    libm::log(ghat_value(count, window_len, r, n_bins) / f_mass)
}

#[inline]
pub(crate) fn ghat_value(count: u64, window_len: u64, r: f64, n_bins: usize) -> f64 {
    (count as f64 + r) / (n_bins as f64 * r + window_len as f64)
}

/// Detector state after `t` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    t: u64,
    lambda: u64,
    stat: f64,
    window_counts: Vec<u64>,
    window_len: u64,
}

impl DetectorState {
    pub fn new(n_bins: usize) -> Self {
        Self {
            t: 0,
            lambda: 1,
            stat: 0.0,
            window_counts: alloc::vec![0; n_bins],
            window_len: 0,
        }
    }

    /// Samples consumed.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Current change-point estimate (one-based time index). Equals `t + 1`
    /// when the estimation window is empty.
    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    pub fn stat(&self) -> f64 {
        self.stat
    }

    /// Per-bin counts of the samples with index in `[lambda, t]`.
    pub fn window_counts(&self) -> &[u64] {
        &self.window_counts
    }

    pub fn window_len(&self) -> u64 {
        self.window_len
    }
}

/// One bin-level update outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub bin: usize,
    pub log_ratio: f64,
    pub stat: f64,
    pub lambda: u64,
}

#[derive(Debug, Clone)]
pub struct Detector<'p> {
    partition: &'p BinPartition,
    config: DetectorConfig,
    state: DetectorState,
}

impl<'p> Detector<'p> {
    pub fn new(config: DetectorConfig, partition: &'p BinPartition) -> Self {
        Self {
            partition,
            config,
            state: DetectorState::new(partition.n_bins()),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn partition(&self) -> &'p BinPartition {
        self.partition
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    /// Back to `t = 0`, keeping the allocation.
    pub fn reset(&mut self) {
        let s = &mut self.state;
        s.t = 0;
        s.lambda = 1;
        s.stat = 0.0;
        s.window_len = 0;
        s.window_counts.iter_mut().for_each(|c| *c = 0);
    }

    /// Regularized post-change estimate for bin `j`.
    pub fn ghat(&self, j: usize) -> f64 {
        if self.state.window_len == 0 {
            self.partition.f_masses()[j]
        } else {
            ghat_value(
                self.state.window_counts[j],
                self.state.window_len,
                self.config.r,
                self.partition.n_bins(),
            )
        }
    }

    /// Feeds one observation and returns the new statistic.
    #[inline]
    pub fn update(&mut self, x: f64) -> f64 {
        self.step(x).stat
    }

    pub fn step(&mut self, x: f64) -> Step {
        let bin = self.partition.bin_index(x);
        self.step_bin(bin)
    }

    /// Update with an already-binned observation.
    pub fn step_bin(&mut self, bin: usize) -> Step {
        let n_bins = self.partition.n_bins();
        let s = &mut self.state;
        let r = log_ratio(
            s.window_counts[bin],
            s.window_len,
            self.config.r,
            n_bins,
            self.partition.f_masses()[bin],
        );
        let candidate = s.stat + r;
        if candidate > TIE_TOL || s.lambda == s.t + 1 {
            s.stat = candidate.max(0.0);
            s.window_counts[bin] += 1;
            s.window_len += 1;
        } else {
            s.stat = 0.0;
            s.lambda = s.t + 2;
            s.window_counts.iter_mut().for_each(|c| *c = 0);
            s.window_len = 0;
        }
        s.t += 1;
        Step {
            bin,
            log_ratio: r,
            stat: s.stat,
            lambda: s.lambda,
        }
    }

    /// True once the statistic has reached the threshold.
    pub fn alarmed(&self) -> bool {
        self.state.stat >= self.config.b
    }
}

/// One CuSum step with known bin masses.
pub fn oracle_cusum_step(stat: f64, g_masses: &[f64], f_masses: &[f64], j: usize) -> f64 {
    (stat + libm::log(g_masses[j] / f_masses[j])).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Statistic reached the threshold.
    Alarm,
    /// `cap` observations consumed without alarm.
    CapReached,
    /// The source ran dry first.
    SourceExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub stat: f64,
    pub lambda: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingReport {
    /// Stopping time on alarm, otherwise the number of observations consumed.
    pub tau: u64,
    pub reason: StopReason,
    pub lambda_at_stop: u64,
    pub stat_at_stop: f64,
    pub trace: Option<Vec<TracePoint>>,
}

impl StoppingReport {
    pub fn alarmed(&self) -> bool {
        self.reason == StopReason::Alarm
    }
}

/// Runs a fresh detector until `stat >= b`, `cap` steps, or the end of
/// `source`, whichever comes first.
pub fn run_until_stop<I>(
    source: I,
    config: DetectorConfig,
    partition: &BinPartition,
    cap: u64,
    record_trace: bool,
) -> StoppingReport
where
    I: IntoIterator<Item = f64>,
{
    let mut det = Detector::new(config, partition);
    let mut trace = record_trace.then(Vec::new);
    let mut source = source.into_iter();
    let reason = loop {
        if det.state().t() >= cap {
            break StopReason::CapReached;
        }
        let Some(x) = source.next() else {
            break StopReason::SourceExhausted;
        };
        let step = det.step(x);
        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                t: det.state().t(),
                stat: step.stat,
                lambda: step.lambda,
            });
        }
        if det.alarmed() {
            break StopReason::Alarm;
        }
    };
    let s = det.state();
    StoppingReport {
        tau: s.t(),
        reason,
        lambda_at_stop: s.lambda(),
        stat_at_stop: s.stat(),
        trace,
    }
}
