//! Non-recursive statistics, evaluated by brute force.
//!
//! `stilde_direct` evaluates the BG-CuSum statistic and change-point
//! estimate from their nested-maximum definitions and is the cross-check
//! for the O(1) recursion in [`crate::detector`]. `shat_statistic` and
//! [`ShatTracker`] compute the full generalized statistic that re-estimates
//! the post-change histogram for every candidate change point; it costs
//! O(t) per sample and serves as the slow comparison test.

use alloc::vec::Vec;

use crate::binning::BinPartition;
use crate::detector::{log_ratio, DetectorConfig, TIE_TOL};

/// `(S(t), lambda_t)` for `t = 1..=stream.len()`, evaluated literally:
///
/// `S(t) = max_{lambda_{t-1} <= k <= t+1} sum_{i=k}^t ln(ghat^{lambda_{t-1}:i-1}(x_i) / f(x_i))`
///
/// and `lambda_t` is the largest maximizer over the same range excluding
/// `k = lambda_{t-1} + 1`, with sums within [`TIE_TOL`] of the best treated
/// as tied. O(T^2) overall.
pub fn stilde_direct(stream: &[f64], config: &DetectorConfig, partition: &BinPartition) -> Vec<(f64, u64)> {
    let bins: Vec<usize> = stream.iter().map(|&x| partition.bin_index(x)).collect();
    let n_bins = partition.n_bins();
    let f = partition.f_masses();
    let mut out = Vec::with_capacity(stream.len());
    let mut lambda_prev: usize = 1;
    let mut counts = alloc::vec![0u64; n_bins];
    // prefix[m] = sum of the terms i = lambda_prev .. lambda_prev + m - 1
    let mut prefix: Vec<f64> = Vec::new();
    for t in 1..=stream.len() {
        counts.iter_mut().for_each(|c| *c = 0);
        prefix.clear();
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in lambda_prev..=t {
            let j = bins[i - 1];
            let w = (i - lambda_prev) as u64;
            acc += log_ratio(counts[j], w, config.r, n_bins, f[j]);
            counts[j] += 1;
            prefix.push(acc);
        }
        let total = acc;
        let mut best = f64::NEG_INFINITY;
        let mut best_k_excluding = 0usize;
        let mut best_excluding = f64::NEG_INFINITY;
        for k in lambda_prev..=t + 1 {
            let sum = total - prefix[k - lambda_prev];
            if sum > best {
                best = sum;
            }
            if k != lambda_prev + 1 && sum >= best_excluding - TIE_TOL {
                best_excluding = best_excluding.max(sum);
                best_k_excluding = k;
            }
        }
        out.push((best, best_k_excluding as u64));
        lambda_prev = best_k_excluding;
    }
    out
}

/// `max_{1 <= k <= t+1} sum_{i=k}^t ln(ghat^{k:i-1}(x_i) / f(x_i))` at the
/// end of `stream`.
pub fn shat_statistic(stream: &[f64], partition: &BinPartition, r: f64) -> f64 {
    let n_bins = partition.n_bins();
    let f = partition.f_masses();
    let bins: Vec<usize> = stream.iter().map(|&x| partition.bin_index(x)).collect();
    let mut counts = alloc::vec![0u64; n_bins];
    let mut best = 0.0f64;
    for k in 1..=bins.len() {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut sum = 0.0;
        for (w, &j) in bins[k - 1..].iter().enumerate() {
            sum += log_ratio(counts[j], w as u64, r, n_bins, f[j]);
            counts[j] += 1;
        }
        best = best.max(sum);
    }
    best
}

/// Running version of [`shat_statistic`]: keeps one histogram and partial
/// sum per candidate change point, O(t) work per sample.
#[derive(Debug, Clone)]
pub struct ShatTracker<'p> {
    partition: &'p BinPartition,
    r: f64,
    // counts[(k-1) * n_bins + j] for candidate start k
    counts: Vec<u32>,
    sums: Vec<f64>,
    stat: f64,
}

impl<'p> ShatTracker<'p> {
    pub fn new(partition: &'p BinPartition, r: f64) -> Self {
        Self {
            partition,
            r,
            counts: Vec::new(),
            sums: Vec::new(),
            stat: 0.0,
        }
    }

    pub fn t(&self) -> usize {
        self.sums.len()
    }

    pub fn stat(&self) -> f64 {
        self.stat
    }

    pub fn reset(&mut self) {
        self.counts.clear();
        self.sums.clear();
        self.stat = 0.0;
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let n_bins = self.partition.n_bins();
        let j = self.partition.bin_index(x);
        let f_j = self.partition.f_masses()[j];
        self.counts.resize(self.counts.len() + n_bins, 0);
        self.sums.push(0.0);
        let t = self.sums.len();
        let mut best = 0.0f64;
        for k in 0..t {
            let row = &mut self.counts[k * n_bins..(k + 1) * n_bins];
            let w = (t - 1 - k) as u64;
            self.sums[k] += log_ratio(u64::from(row[j]), w, self.r, n_bins, f_j);
            row[j] += 1;
            best = best.max(self.sums[k]);
        }
        self.stat = best;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarters() -> BinPartition {
        BinPartition::new(alloc::vec![-1.0, 0.0, 1.0], alloc::vec![], alloc::vec![0.25; 4]).unwrap()
    }

    #[test]
    fn stilde_trivial_cases() {
        let p = quarters();
        let cfg = DetectorConfig::new(4.0, 1.0).unwrap();
        assert!(stilde_direct(&[], &cfg, &p).is_empty());
        assert_eq!(stilde_direct(&[0.5], &cfg, &p), alloc::vec![(0.0, 1)]);
    }

    #[test]
    fn shat_trivial_cases() {
        let p = quarters();
        assert_eq!(shat_statistic(&[], &p, 4.0), 0.0);
        assert_eq!(shat_statistic(&[0.3], &p, 4.0), 0.0);
        let mut tr = ShatTracker::new(&p, 4.0);
        assert_eq!(tr.update(0.3), 0.0);
    }

    #[test]
    fn tracker_matches_literal() {
        let p = quarters();
        let xs = [2.0, 2.0, -3.0, 2.0, 0.5, 2.0, 2.0, 2.0, -0.5, 2.0, 2.0];
        let mut tr = ShatTracker::new(&p, 4.0);
        for t in 1..=xs.len() {
            let s = tr.update(xs[t - 1]);
            let lit = shat_statistic(&xs[..t], &p, 4.0);
            assert!((s - lit).abs() < 1e-12, "t={t}: {s} vs {lit}");
        }
        assert!(tr.stat() > 0.0);
        tr.reset();
        assert_eq!(tr.t(), 0);
    }
}
