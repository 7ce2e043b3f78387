//! Monte Carlo estimates of run length and detection delay.
//!
//! Every trial draws from its own stream (see [`crate::rng`]); trials run on
//! a rayon pool but results are gathered in trial order and reduced
//! sequentially, so a report depends only on the experiment and the seed.

use std::time::Instant;

use bgcusum_core::{
    kl_binned, BinPartition, Detector, DetectorConfig, GeneralizedPdf, ShatTracker,
};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::trial_rng;

const Z95: f64 = 1.96;
/// Slope studies need `KL(g_N || f_N)` at least this large.
pub const MIN_KL: f64 = 1e-6;

/// A sequential statistic fed one sample at a time.
pub trait Monitor {
    fn reset(&mut self);
    fn update(&mut self, x: f64) -> f64;
}

impl Monitor for Detector<'_> {
    fn reset(&mut self) {
        Detector::reset(self)
    }

    fn update(&mut self, x: f64) -> f64 {
        Detector::update(self, x)
    }
}

impl Monitor for ShatTracker<'_> {
    fn reset(&mut self) {
        ShatTracker::reset(self)
    }

    fn update(&mut self, x: f64) -> f64 {
        ShatTracker::update(self, x)
    }
}

/// `f` before the change point `nu`, `g` from `nu` on (1-based).
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub f: GeneralizedPdf,
    pub g: GeneralizedPdf,
    pub partition: BinPartition,
    pub config: DetectorConfig,
    pub nu: u64,
    pub trials: usize,
    pub cap: u64,
    pub master_seed: u64,
}

impl ExperimentSpec {
    /// Partition with `n` equiprobable bins under `f` and `R = r.unwrap_or(n)`.
    pub fn new(f: GeneralizedPdf, g: GeneralizedPdf, n: usize, r: Option<f64>, b: f64) -> Result<Self> {
        let partition = BinPartition::from_pdf(&f, n)?;
        let config = DetectorConfig::new(r.unwrap_or(n as f64), b)?;
        Ok(ExperimentSpec {
            f,
            g,
            partition,
            config,
            nu: 1,
            trials: 1000,
            cap: 1_000_000,
            master_seed: 0,
        })
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        let mut s = self.clone();
        s.config = DetectorConfig::new(self.config.r, b)?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("trials must be at least 1".into()));
        }
        if self.cap == 0 {
            return Err(Error::InvalidExperiment("cap must be at least 1".into()));
        }
        if self.nu == 0 {
            return Err(Error::InvalidExperiment("nu must be at least 1".into()));
        }
        Ok(())
    }

    fn detector(&self) -> Detector<'_> {
        Detector::new(self.config, &self.partition)
    }

    fn draw<R: Rng>(&self, rng: &mut R, t: u64) -> f64 {
        if t < self.nu {
            self.f.draw(rng)
        } else {
            self.g.draw(rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub metric: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: usize,
    pub truncated: usize,
    /// Trials discarded because the alarm came before the change.
    pub false_alarms: usize,
    pub seconds: f64,
}

impl MonteCarloReport {
    fn new(metric: &str, estimate: f64, se: f64, trials: usize, started: Instant) -> Self {
        MonteCarloReport {
            metric: metric.to_string(),
            estimate,
            se,
            ci_lo: estimate - Z95 * se,
            ci_hi: estimate + Z95 * se,
            trials,
            truncated: 0,
            false_alarms: 0,
            seconds: started.elapsed().as_secs_f64(),
        }
    }

    pub fn truncated_fraction(&self) -> f64 {
        self.truncated as f64 / self.trials as f64
    }

    pub fn false_alarm_fraction(&self) -> f64 {
        self.false_alarms as f64 / self.trials as f64
    }

    pub fn completed(&self) -> usize {
        self.trials - self.truncated - self.false_alarms
    }
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// How a renewal cycle ends on the low side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleEnd {
    /// At the first reset (`stat <= 0` with `t >= 2`). A reset leaves the
    /// detector in its initial state, so cycles are exact renewals.
    FirstReset,
    /// At the first `t > 2` with `stat <= 0`. A reset at `t = 2` is then
    /// followed by one more (always zero) step, which the next cycle does
    /// not account for.
    Literal,
}

#[derive(Debug, Clone)]
pub struct RenewalEstimate {
    pub report: MonteCarloReport,
    pub cycles: usize,
    pub crossings: usize,
    pub mean_cycle: f64,
    pub crossing_freq: f64,
    pub crossing_se: f64,
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub b: f64,
    pub arl: f64,
    pub arl_se: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// `S(t)/t` at the horizon, one per seed.
    pub ratios: Vec<f64>,
    pub kl: f64,
}

impl GrowthReport {
    pub fn median_abs_error(&self) -> f64 {
        let mut errs: Vec<f64> = self.ratios.iter().map(|r| (r - self.kl).abs()).collect();
        errs.sort_unstable_by(f64::total_cmp);
        let m = errs.len();
        if m % 2 == 1 {
            errs[m / 2]
        } else {
            0.5 * (errs[m / 2 - 1] + errs[m / 2])
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub b: f64,
    pub add: MonteCarloReport,
    pub add_next: MonteCarloReport,
    pub delta: f64,
}

/// Matched-ARL delays of the recursive statistic and the full
/// re-maximizing one.
#[derive(Debug, Clone)]
pub struct ShatComparison {
    pub b_tilde: f64,
    pub arl_tilde: f64,
    pub add_tilde: MonteCarloReport,
    pub b_hat: f64,
    pub arl_hat: f64,
    pub add_hat: MonteCarloReport,
}

impl ShatComparison {
    pub fn relative_gap(&self) -> f64 {
        (self.add_tilde.estimate - self.add_hat.estimate).abs() / self.add_hat.estimate
    }
}

enum Outcome {
    Alarm(u64),
    Truncated,
}

/// Feeds `m` from `next(t)` for `t = 1..` until `stat >= b` or `cap`.
fn run_monitor<M: Monitor>(m: &mut M, b: f64, cap: u64, mut next: impl FnMut(u64) -> f64) -> Outcome {
    m.reset();
    for t in 1..=cap {
        if m.update(next(t)) >= b {
            return Outcome::Alarm(t);
        }
    }
    Outcome::Truncated
}

/// Points where the running maximum of a statistic path increases.
struct Records {
    points: Vec<(u64, f64)>,
}

impl Records {
    fn first_reaching(&self, b: f64) -> Option<u64> {
        let i = self.points.partition_point(|&(_, v)| v < b);
        self.points.get(i).map(|&(t, _)| t)
    }
}

pub struct Harness {
    pool: rayon::ThreadPool,
}

impl Harness {
    /// `workers == 0` picks rayon's default.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Pool(e.to_string()))?;
        Ok(Harness { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `work(i)` for `i in 0..trials`, in trial order.
    pub fn map_trials<T: Send>(&self, trials: usize, work: impl Fn(u64) -> T + Sync) -> Vec<T> {
        self.pool.install(|| (0..trials as u64).into_par_iter().map(&work).collect())
    }

    /// Mean stopping time of the detector on pure pre-change data.
    pub fn estimate_arl_direct(&self, spec: &ExperimentSpec) -> Result<MonteCarloReport> {
        self.estimate_arl_direct_with(spec, || spec.detector())
    }

    /// Same, for any statistic built by `make`.
    pub fn estimate_arl_direct_with<'a, M: Monitor>(
        &self,
        spec: &'a ExperimentSpec,
        make: impl Fn() -> M + Sync,
    ) -> Result<MonteCarloReport> {
        spec.validate()?;
        let started = Instant::now();
        let b = spec.config.b;
        let outcomes = self.map_trials(spec.trials, |i| {
            let mut rng = trial_rng(spec.master_seed, i);
            let mut m = make();
            run_monitor(&mut m, b, spec.cap, |_| spec.f.draw(&mut rng))
        });
        let mut truncated = 0;
        let lengths: Vec<f64> = outcomes
            .iter()
            .map(|o| match *o {
                Outcome::Alarm(t) => t as f64,
                Outcome::Truncated => {
                    truncated += 1;
                    spec.cap as f64
                }
            })
            .collect();
        if truncated == spec.trials {
            return Err(Error::Inconclusive("every ARL trial hit the cap"));
        }
        let (mean, se) = mean_se(&lengths);
        let mut report = MonteCarloReport::new("arl_direct", mean, se, spec.trials, started);
        report.truncated = truncated;
        Ok(report)
    }

    /// ARL through the renewal identity `E[zeta] / P(stat(zeta) >= b)`,
    /// with `spec.trials` independent cycles.
    pub fn estimate_arl_renewal(&self, spec: &ExperimentSpec, rule: CycleEnd) -> Result<RenewalEstimate> {
        spec.validate()?;
        let started = Instant::now();
        let b = spec.config.b;
        let min_t = match rule {
            CycleEnd::FirstReset => 2,
            CycleEnd::Literal => 3,
        };
        // (length, crossed, truncated)
        let cycles = self.map_trials(spec.trials, |i| {
            let mut rng = trial_rng(spec.master_seed, i);
            let mut det = spec.detector();
            for t in 1..=spec.cap {
                let s = det.update(spec.f.draw(&mut rng));
                if s >= b {
                    return (t, true, false);
                }
                if s <= 0.0 && t >= min_t {
                    return (t, false, false);
                }
            }
            (spec.cap, false, true)
        });
        let n = cycles.len() as f64;
        let crossings = cycles.iter().filter(|c| c.1).count();
        if crossings == 0 {
            return Err(Error::Inconclusive("no cycle crossed the threshold"));
        }
        let mean_cycle = cycles.iter().map(|c| c.0 as f64).sum::<f64>() / n;
        let p = crossings as f64 / n;
        let arl = mean_cycle / p;
        // delta method for a ratio of means
        let resid: Vec<f64> = cycles
            .iter()
            .map(|&(len, crossed, _)| len as f64 - arl * if crossed { 1.0 } else { 0.0 })
            .collect();
        let (_, resid_se) = mean_se(&resid);
        let mut report = MonteCarloReport::new("arl_renewal", arl, resid_se / p, spec.trials, started);
        report.truncated = cycles.iter().filter(|c| c.2).count();
        Ok(RenewalEstimate {
            report,
            cycles: spec.trials,
            crossings,
            mean_cycle,
            crossing_freq: p,
            crossing_se: (p * (1.0 - p) / n).sqrt(),
        })
    }

    /// Threshold whose renewal ARL lies within `tol` (relative) of
    /// `target_arl`. `spec.trials` cycles per evaluation, the same streams
    /// at every candidate `b`.
    pub fn calibrate_threshold(&self, spec: &ExperimentSpec, target_arl: f64, tol: f64) -> Result<Calibration> {
        if !(target_arl >= 1.0) || !(tol > 0.0) {
            return Err(Error::InvalidExperiment("target ARL must be at least 1 and tol positive".into()));
        }
        if target_arl == 1.0 {
            return Ok(Calibration { b: 0.0, arl: 1.0, arl_se: 0.0, iterations: 0 });
        }
        let eval = |b: f64| -> Result<(f64, f64)> {
            let r = self.estimate_arl_renewal(&spec.with_b(b)?, CycleEnd::FirstReset)?;
            Ok((r.report.estimate, r.report.se))
        };
        let close = |arl: f64| (arl - target_arl).abs() / target_arl <= tol;
        let mut iterations = 0;
        let (mut lo, mut hi) = (0.0, target_arl.ln());
        let mut at_hi = eval(hi)?;
        while at_hi.0 < target_arl {
            iterations += 1;
            if close(at_hi.0) {
                return Ok(Calibration { b: hi, arl: at_hi.0, arl_se: at_hi.1, iterations });
            }
            if iterations > 40 {
                return Err(Error::Inconclusive("could not bracket the target ARL"));
            }
            lo = hi;
            hi += 1.0;
            at_hi = eval(hi)?;
        }
        if close(at_hi.0) {
            return Ok(Calibration { b: hi, arl: at_hi.0, arl_se: at_hi.1, iterations });
        }
        for _ in 0..100 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let (arl, se) = eval(mid)?;
            if close(arl) {
                return Ok(Calibration { b: mid, arl, arl_se: se, iterations });
            }
            if arl < target_arl {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Err(Error::Inconclusive("bisection did not reach the ARL tolerance"))
    }

    /// Threshold for any statistic from direct pure-`f` runs. Each trial
    /// is simulated once and its running maximum recorded, so the ARL as a
    /// function of `b` is exact (for these trials) and monotone. Returns
    /// the smallest `b` whose ARL reaches `target_arl`; fails if that ARL is
    /// not within `tol` of the target.
    pub fn calibrate_threshold_direct<M: Monitor>(
        &self,
        spec: &ExperimentSpec,
        make: impl Fn() -> M + Sync,
        target_arl: f64,
        tol: f64,
    ) -> Result<Calibration> {
        spec.validate()?;
        // start low and grow: runs above the target threshold are the costly part
        let mut b_hi = 0.5;
        for _ in 0..20 {
            let records = self.map_trials(spec.trials, |i| {
                let mut rng = trial_rng(spec.master_seed, i);
                let mut m = make();
                m.reset();
                let mut points = Vec::new();
                let mut best = f64::NEG_INFINITY;
                for t in 1..=spec.cap {
                    let s = m.update(spec.f.draw(&mut rng));
                    if s > best {
                        best = s;
                        points.push((t, s));
                    }
                    if s >= b_hi {
                        break;
                    }
                }
                Records { points }
            });
            let arl = |b: f64| -> (f64, f64) {
                let lens: Vec<f64> = records
                    .iter()
                    .map(|r| r.first_reaching(b).unwrap_or(spec.cap) as f64)
                    .collect();
                mean_se(&lens)
            };
            if arl(b_hi).0 < target_arl {
                b_hi *= 1.5;
                continue;
            }
            let (mut lo, mut hi) = (0.0, b_hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if arl(mid).0 < target_arl {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            let (value, se) = arl(hi);
            if (value - target_arl).abs() / target_arl > tol {
                return Err(Error::Inconclusive("direct calibration cannot reach the ARL tolerance"));
            }
            return Ok(Calibration { b: hi, arl: value, arl_se: se, iterations: 200 });
        }
        Err(Error::Inconclusive("could not bracket the target ARL"))
    }

    /// `E[tau - nu + 1 | tau >= nu]`; alarms before `nu` are discarded and
    /// counted.
    pub fn estimate_add(&self, spec: &ExperimentSpec) -> Result<MonteCarloReport> {
        self.estimate_add_with(spec, || spec.detector())
    }

    pub fn estimate_add_with<M: Monitor>(
        &self,
        spec: &ExperimentSpec,
        make: impl Fn() -> M + Sync,
    ) -> Result<MonteCarloReport> {
        spec.validate()?;
        let started = Instant::now();
        let b = spec.config.b;
        let outcomes = self.map_trials(spec.trials, |i| {
            let mut rng = trial_rng(spec.master_seed, i);
            let mut m = make();
            run_monitor(&mut m, b, spec.cap, |t| spec.draw(&mut rng, t))
        });
        let (mut truncated, mut false_alarms) = (0, 0);
        let mut delays = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            match o {
                Outcome::Alarm(t) if t < spec.nu => false_alarms += 1,
                Outcome::Alarm(t) => delays.push((t - spec.nu + 1) as f64),
                Outcome::Truncated => truncated += 1,
            }
        }
        if delays.is_empty() {
            return Err(Error::Inconclusive("no trial produced a post-change alarm"));
        }
        let (mean, se) = mean_se(&delays);
        let mut report = MonteCarloReport::new("add", mean, se, spec.trials, started);
        report.truncated = truncated;
        report.false_alarms = false_alarms;
        Ok(report)
    }

    /// `S(t)/t` after `t_horizon` pure-`g` samples, one run per seed,
    /// alongside `KL(g_N || f_N)`.
    pub fn growth_rate_check(&self, spec: &ExperimentSpec, t_horizon: u64, seeds: &[u64]) -> Result<GrowthReport> {
        let kl = kl_binned(&spec.partition.masses_of(&spec.g)?, spec.partition.f_masses())?;
        let ratios = self.pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    let mut rng = trial_rng(seed, 0);
                    let mut det = spec.detector();
                    let mut s = 0.0;
                    for _ in 0..t_horizon {
                        s = det.update(spec.g.draw(&mut rng));
                    }
                    s / t_horizon as f64
                })
                .collect()
        });
        Ok(GrowthReport { ratios, kl })
    }

    /// ADD with the change at the first sample for every `b` in `thresholds`
    /// and at `b + h`, with finite differences `(ADD(b + h) - ADD(b)) / h`.
    /// The same streams are used at every threshold.
    pub fn add_slope_study(&self, spec: &ExperimentSpec, thresholds: &[f64], h: f64) -> Result<Vec<SlopeRow>> {
        if !(h > 0.0) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidExperiment("thresholds must increase and h be positive".into()));
        }
        let kl = kl_binned(&spec.partition.masses_of(&spec.g)?, spec.partition.f_masses())?;
        if kl < MIN_KL {
            return Err(Error::InvalidExperiment(format!(
                "KL(g_N || f_N) = {kl:e} is too small for a finite delay"
            )));
        }
        let mut base = spec.clone();
        base.nu = 1;
        thresholds
            .iter()
            .map(|&b| {
                let add = self.estimate_add(&base.with_b(b)?)?;
                let add_next = self.estimate_add(&base.with_b(b + h)?)?;
                let delta = (add_next.estimate - add.estimate) / h;
                Ok(SlopeRow { b, add, add_next, delta })
            })
            .collect()
    }

    /// Calibrates both statistics to `target_arl` on direct runs
    /// (`arl_trials` each) and compares their delays with the change at the
    /// first sample (`spec.trials` runs each).
    pub fn compare_shat_stilde(
        &self,
        spec: &ExperimentSpec,
        target_arl: f64,
        tol: f64,
        arl_trials: usize,
    ) -> Result<ShatComparison> {
        let r = spec.config.r;
        let mut arl_spec = spec.clone();
        arl_spec.trials = arl_trials;
        let tilde = self.calibrate_threshold_direct(&arl_spec, || spec.detector(), target_arl, tol)?;
        let hat = self.calibrate_threshold_direct(&arl_spec, || ShatTracker::new(&spec.partition, r), target_arl, tol)?;
        let mut add_spec = spec.clone();
        add_spec.nu = 1;
        let add_tilde = self.estimate_add(&add_spec.with_b(tilde.b)?)?;
        let hat_spec = add_spec.with_b(hat.b)?;
        let add_hat = self.estimate_add_with(&hat_spec, || ShatTracker::new(&hat_spec.partition, r))?;
        Ok(ShatComparison {
            b_tilde: tilde.b,
            arl_tilde: tilde.arl,
            add_tilde,
            b_hat: hat.b,
            arl_hat: hat.arl,
            add_hat,
        })
    }
}
