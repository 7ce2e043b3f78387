use bgcusum::evaluation::{CycleEnd, ExperimentSpec, Harness};
use bgcusum_core::GeneralizedPdf;

fn null_spec(n: usize, b: f64) -> ExperimentSpec {
    let f = GeneralizedPdf::standard_normal();
    let mut s = ExperimentSpec::new(f.clone(), f, n, None, b).unwrap();
    s.cap = 10_000_000;
    s
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

#[test]
fn direct_and_renewal_estimators_agree() {
    let h = Harness::new(0).unwrap();
    for b in [1.0, 2.0] {
        let mut s = null_spec(16, b);
        s.trials = 4000;
        s.master_seed = 21;
        let d = h.estimate_arl_direct(&s).unwrap();
        s.trials = 300_000;
        s.master_seed = 22;
        let r = h.estimate_arl_renewal(&s, CycleEnd::FirstReset).unwrap().report;
        assert!(overlap((d.ci_lo, d.ci_hi), (r.ci_lo, r.ci_hi)), "b={b}: {d:?} vs {r:?}");
        assert!(d.ci_lo >= 0.9 * b.exp());
    }
}

#[test]
fn literal_cycle_end_overstates_arl() {
    // a reset at t = 2 is already a renewal; running to t = 3 adds a step
    // that the next cycle repeats, inflating the mean cycle length
    let h = Harness::new(0).unwrap();
    let mut s = null_spec(16, 1.0);
    s.trials = 300_000;
    s.master_seed = 5;
    let reset = h.estimate_arl_renewal(&s, CycleEnd::FirstReset).unwrap();
    let literal = h.estimate_arl_renewal(&s, CycleEnd::Literal).unwrap();
    assert_eq!(reset.crossings, literal.crossings);
    assert!(literal.mean_cycle > reset.mean_cycle + 0.5);
    let mut d = s.clone();
    d.trials = 4000;
    let direct = h.estimate_arl_direct(&d).unwrap();
    let z = (literal.report.estimate - direct.estimate) / literal.report.se.hypot(direct.se);
    assert!(z > 4.0, "literal cycles should sit well above the direct ARL, z = {z}");
}

#[test]
fn calibration_is_monotone_in_target() {
    let h = Harness::new(0).unwrap();
    let mut s = null_spec(8, 0.0);
    s.trials = 100_000;
    s.master_seed = 8;
    let lo = h.calibrate_threshold(&s, 100.0, 0.05).unwrap();
    let hi = h.calibrate_threshold(&s, 1000.0, 0.05).unwrap();
    assert!(hi.b >= lo.b);
    for c in [&lo, &hi] {
        // ARL >= e^b
        assert!(c.b <= (c.arl + 3.0 * c.arl_se).ln());
    }
    let mut check = s.with_b(lo.b).unwrap();
    check.trials = 3000;
    let direct = h.estimate_arl_direct(&check).unwrap();
    assert!((direct.estimate - 100.0).abs() < 3.0 * direct.se + 5.0, "{direct:?}");
}

#[test]
fn add_with_unchanged_distribution_looks_like_pre_change() {
    let h = Harness::new(0).unwrap();
    let mut s = null_spec(8, 0.5);
    s.trials = 3000;
    s.nu = 40;
    s.cap = 1_000_000;
    let add = h.estimate_add(&s).unwrap();
    // the pure-f stopping-time distribution gives P(tau < nu)
    let mut pure = s.clone();
    pure.nu = u64::MAX;
    pure.cap = 39;
    pure.master_seed = 99;
    let trials = 3000;
    pure.trials = trials;
    let stopped = h
        .map_trials(trials, |i| {
            let mut rng = bgcusum::rng::trial_rng(99, i);
            let mut det = bgcusum_core::Detector::new(pure.config, &pure.partition);
            (0..39).any(|_| det.update(pure.f.draw(&mut rng)) >= 0.5)
        })
        .into_iter()
        .filter(|&x| x)
        .count();
    let p_pure = stopped as f64 / trials as f64;
    let p_add = add.false_alarm_fraction();
    let se = (p_pure * (1.0 - p_pure) / trials as f64).sqrt() * 2f64.sqrt();
    assert!((p_add - p_pure).abs() < 4.0 * se, "{p_add} vs {p_pure}");
}

#[test]
fn growth_rate_tracks_kl() {
    let h = Harness::new(0).unwrap();
    let f = GeneralizedPdf::standard_normal();
    let s = ExperimentSpec::new(f.clone(), f.clone(), 16, None, 0.0).unwrap();
    let same = h.growth_rate_check(&s, 20_000, &[1, 2, 3]).unwrap();
    assert_eq!(same.kl, 0.0);
    assert!(same.ratios.iter().all(|r| *r < 0.01));

    let s = ExperimentSpec::new(f, GeneralizedPdf::gaussian(1.0, 1.0).unwrap(), 16, None, 0.0).unwrap();
    let g = h.growth_rate_check(&s, 20_000, &[1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
    assert!(g.median_abs_error() <= 0.05);
}
