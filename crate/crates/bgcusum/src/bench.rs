//! Benchmark experiments: definitions, built-in suites and the runner that
//! turns them into report rows.
//!
//! An experiment file is `{"experiments": [...]}` where each entry is
//!
//! ```json
//! {"id": "shift3", "kind": "add", "g": {...model...}, "n": 16,
//!  "target_arl": 500, "nu": 300, "trials": 5000}
//! ```
//!
//! `kind` is one of `arl_direct`, `arl_renewal`, `add`, `growth`. `f`
//! defaults to N(0, 1), `n` to 16 and `r` to `n`. The threshold is `b` if
//! given, otherwise calibrated to `target_arl`.

use std::collections::HashMap;

use bgcusum_core::GeneralizedPdf;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evaluation::{Calibration, CycleEnd, ExperimentSpec, Harness, MonteCarloReport};
use crate::model::ModelSpec;
use crate::report::Row;

const DEFAULT_CALIBRATION_CYCLES: usize = 200_000;
const DEFAULT_CALIBRATION_TOL: f64 = 0.05;
const DEFAULT_HORIZON: u64 = 20_000;
const DEFAULT_CAP: u64 = 1_000_000;
// keeps calibration streams apart from the experiment's own trials
const CALIBRATION_SALT: u64 = 0x5bd1_e995_9e37_79b9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    ArlDirect,
    ArlRenewal,
    Add,
    Growth,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDef {
    pub id: String,
    pub kind: Kind,
    #[serde(default)]
    pub f: Option<ModelSpec>,
    #[serde(default)]
    pub g: Option<ModelSpec>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub target_arl: Option<f64>,
    #[serde(default)]
    pub nu: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub calibration_cycles: Option<usize>,
    /// Samples per seed for `growth`; `trials` is the number of seeds.
    #[serde(default)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentFile {
    pub experiments: Vec<ExperimentDef>,
}

/// Values from the command line; each one replaces the matching field of
/// every experiment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub b: Option<f64>,
    pub target_arl: Option<f64>,
    pub nu: Option<u64>,
    pub trials: Option<usize>,
    pub cap: Option<u64>,
}

impl ExperimentDef {
    fn new(id: impl Into<String>, kind: Kind) -> Self {
        ExperimentDef {
            id: id.into(),
            kind,
            f: None,
            g: None,
            n: None,
            r: None,
            b: None,
            target_arl: None,
            nu: None,
            trials: None,
            cap: None,
            calibration_cycles: None,
            horizon: None,
        }
    }

    fn post(mut self, g: &GeneralizedPdf) -> Self {
        self.g = Some(ModelSpec::from(g));
        self
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => { $( if o.$field.is_some() { self.$field = o.$field; } )* };
        }
        take!(n, r, b, target_arl, nu, trials, cap);
        if o.b.is_some() {
            self.target_arl = None;
        }
    }
}

fn gaussian(mean: f64, sd: f64) -> GeneralizedPdf {
    GeneralizedPdf::gaussian(mean, sd * sd).expect("positive variance")
}

fn add_at_500(id: String, g: GeneralizedPdf, nu: u64) -> ExperimentDef {
    let mut e = ExperimentDef::new(id, Kind::Add).post(&g);
    e.target_arl = Some(500.0);
    e.nu = Some(nu);
    e.trials = Some(5000);
    e
}

/// Built-in suites: `table1`, `table2`, `table3`, `prop1`, `smoke`.
pub fn preset(name: &str) -> Option<Vec<ExperimentDef>> {
    let suite = match name {
        "table1" => [0.125, 0.75, 1.5, 2.25, 3.0]
            .iter()
            .map(|&d| add_at_500(format!("mean_shift_{d}"), gaussian(d, 1.0), 300))
            .collect(),
        "table2" => [0.2, 0.33, 0.5, 1.5, 2.0]
            .iter()
            .map(|&d| add_at_500(format!("scale_{d}"), gaussian(0.0, d), 300))
            .collect(),
        "table3" => [50, 300]
            .iter()
            .map(|&nu| {
                let g = GeneralizedPdf::laplace(0.0, 0.7071).expect("positive scale");
                add_at_500(format!("laplace_nu{nu}"), g, nu)
            })
            .collect(),
        "prop1" => {
            let mut v = Vec::new();
            for (label, b) in [("1", 1.0), ("2", 2.0), ("ln200", 200f64.ln())] {
                let mut d = ExperimentDef::new(format!("b_{label}"), Kind::ArlDirect);
                d.b = Some(b);
                d.trials = Some(5000);
                d.cap = Some(10_000_000);
                let mut r = ExperimentDef::new(format!("b_{label}"), Kind::ArlRenewal);
                r.b = Some(b);
                r.trials = Some(400_000);
                v.push(d);
                v.push(r);
            }
            v
        }
        "smoke" => {
            let mut direct = ExperimentDef::new("smoke_arl", Kind::ArlDirect);
            direct.n = Some(8);
            direct.b = Some(1.0);
            direct.trials = Some(300);
            let mut renewal = ExperimentDef::new("smoke_arl", Kind::ArlRenewal);
            renewal.n = Some(8);
            renewal.b = Some(1.0);
            renewal.trials = Some(20_000);
            let mut add = ExperimentDef::new("smoke_add", Kind::Add).post(&gaussian(2.0, 1.0));
            add.n = Some(8);
            add.target_arl = Some(100.0);
            add.calibration_cycles = Some(20_000);
            add.nu = Some(50);
            add.trials = Some(300);
            let mut growth = ExperimentDef::new("smoke_growth", Kind::Growth).post(&gaussian(1.0, 1.0));
            growth.trials = Some(5);
            growth.horizon = Some(2000);
            vec![direct, renewal, add, growth]
        }
        _ => return None,
    };
    Some(suite)
}

pub const PRESETS: [&str; 5] = ["table1", "table2", "table3", "prop1", "smoke"];

fn invalid(id: &str, msg: &str) -> Error {
    Error::InvalidExperiment(format!("{id}: {msg}"))
}

fn fraction_report(metric: &str, count: usize, trials: usize) -> MonteCarloReport {
    let p = count as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    MonteCarloReport {
        metric: metric.to_string(),
        estimate: p,
        se,
        ci_lo: p - 1.96 * se,
        ci_hi: p + 1.96 * se,
        trials,
        truncated: 0,
        false_alarms: 0,
        seconds: 0.0,
    }
}

fn point_report(metric: &str, value: f64, trials: usize, seconds: f64) -> MonteCarloReport {
    MonteCarloReport {
        metric: metric.to_string(),
        estimate: value,
        se: 0.0,
        ci_lo: value,
        ci_hi: value,
        trials,
        truncated: 0,
        false_alarms: 0,
        seconds,
    }
}

pub struct Runner<'h> {
    harness: &'h Harness,
    seed: u64,
    calibrations: HashMap<String, Calibration>,
}

impl<'h> Runner<'h> {
    pub fn new(harness: &'h Harness, seed: u64) -> Self {
        Runner {
            harness,
            seed,
            calibrations: HashMap::new(),
        }
    }

    /// Runs every experiment in order; calibrations are shared between
    /// experiments with the same pre-change setup.
    pub fn run_all(&mut self, defs: &[ExperimentDef], overrides: &Overrides) -> Result<Vec<Row>> {
        let mut rows = Vec::new();
        for def in defs {
            let mut def = def.clone();
            def.apply(overrides);
            rows.extend(self.run(&def)?);
        }
        Ok(rows)
    }

    fn run(&mut self, def: &ExperimentDef) -> Result<Vec<Row>> {
        let id = def.id.as_str();
        let f = match &def.f {
            Some(m) => m.build()?,
            None => GeneralizedPdf::standard_normal(),
        };
        let g = match &def.g {
            Some(m) => m.build()?,
            None if matches!(def.kind, Kind::Add | Kind::Growth) => {
                return Err(invalid(id, "a post-change model `g` is required"));
            }
            None => f.clone(),
        };
        let n = def.n.unwrap_or(16);
        let trials = def.trials.unwrap_or(1000);
        if trials == 0 {
            return Err(invalid(id, "trials must be at least 1"));
        }
        let mut spec = ExperimentSpec::new(f, g, n, def.r, 0.0)?;
        spec.trials = trials;
        spec.master_seed = self.seed;
        spec.nu = def.nu.unwrap_or(1);
        let mut rows = Vec::new();
        let mut push = |report: MonteCarloReport| {
            rows.push(Row {
                experiment_id: id.to_string(),
                report,
            })
        };

        if def.kind == Kind::Growth {
            let seeds: Vec<u64> = (0..trials as u64).map(|i| self.seed.wrapping_add(i)).collect();
            let started = std::time::Instant::now();
            let g = self.harness.growth_rate_check(&spec, def.horizon.unwrap_or(DEFAULT_HORIZON), &seeds)?;
            let secs = started.elapsed().as_secs_f64();
            push(point_report("kl_binned", g.kl, trials, secs));
            push(point_report("growth_median_abs_error", g.median_abs_error(), trials, secs));
            return Ok(rows);
        }

        let b = match (def.b, def.target_arl) {
            (Some(b), _) => b,
            (None, Some(target)) => {
                let cal = self.calibrate(&spec, def, target)?;
                let cycles = def.calibration_cycles.unwrap_or(DEFAULT_CALIBRATION_CYCLES);
                push(point_report("threshold", cal.b, cycles, 0.0));
                let mut arl = point_report("arl_calibrated", cal.arl, cycles, 0.0);
                arl.se = cal.arl_se;
                arl.ci_lo = cal.arl - 1.96 * cal.arl_se;
                arl.ci_hi = cal.arl + 1.96 * cal.arl_se;
                push(arl);
                cal.b
            }
            (None, None) => return Err(invalid(id, "needs either `b` or `target_arl`")),
        };
        spec = spec.with_b(b)?;
        // e^b is only a lower bound on the ARL, too loose to size a cap
        let default_cap = match def.target_arl {
            Some(t) => (50.0 * t).ceil().max(1000.0) as u64,
            None => DEFAULT_CAP,
        };
        spec.cap = def.cap.unwrap_or(default_cap);

        match def.kind {
            Kind::ArlDirect => push(self.harness.estimate_arl_direct(&spec)?),
            Kind::ArlRenewal => {
                let r = self.harness.estimate_arl_renewal(&spec, CycleEnd::FirstReset)?;
                push(fraction_report("crossing_freq", r.crossings, r.cycles));
                push(r.report);
            }
            Kind::Add => {
                let r = self.harness.estimate_add(&spec)?;
                push(fraction_report("false_alarm_fraction", r.false_alarms, r.trials));
                push(r);
            }
            Kind::Growth => unreachable!(),
        }
        Ok(rows)
    }

    fn calibrate(&mut self, spec: &ExperimentSpec, def: &ExperimentDef, target: f64) -> Result<Calibration> {
        let cycles = def.calibration_cycles.unwrap_or(DEFAULT_CALIBRATION_CYCLES);
        let key = format!(
            "{}|{}|{}|{target}|{cycles}",
            serde_json::to_string(&ModelSpec::from(&spec.f)).expect("plain data serializes"),
            spec.partition.n_continuous(),
            spec.config.r,
        );
        if let Some(c) = self.calibrations.get(&key) {
            return Ok(c.clone());
        }
        let mut cal_spec = spec.clone();
        cal_spec.trials = cycles;
        cal_spec.master_seed = self.seed ^ CALIBRATION_SALT;
        cal_spec.cap = (100.0 * target).ceil() as u64;
        let c = self.harness.calibrate_threshold(&cal_spec, target, DEFAULT_CALIBRATION_TOL)?;
        self.calibrations.insert(key, c.clone());
        Ok(c)
    }
}
