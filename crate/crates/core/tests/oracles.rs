//! Values checked against independent oracles: quadrature of the density,
//! plain bisection on the error function, Monte Carlo binning, and the
//! literal distinguishability definition against the crossing-set route.

use bgcusum_core::n_selection::levels_outside;
use bgcusum_core::{
    check_prop_a1, crossing_set, is_distinguishable, kl_binned, mn_bounds, Atom, BinPartition,
    Component, GeneralizedPdf, NSelectionParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Quantile by plain bisection on the erfc-based normal cdf.
fn normal_quantile_oracle(u: f64) -> f64 {
    let cdf = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

fn mixture() -> GeneralizedPdf {
    GeneralizedPdf::new(
        1.0,
        vec![
            (0.6, Component::Gaussian { mean: 1.0, var: 1.0 }),
            (0.4, Component::Gaussian { mean: -1.0, var: 1.0 }),
        ],
        vec![],
    )
    .unwrap()
}

#[test]
fn mixture_cdf_by_quadrature() {
    let g = mixture();
    let integral = simpson(|x| g.pdf_continuous(x), -20.0, 0.0, 200_000);
    let value = g.cdf_continuous(0.0);
    assert!((value - integral).abs() < 1e-10, "{value} vs {integral}");
}

#[test]
fn quantiles_by_bisection() {
    let f = GeneralizedPdf::standard_normal();
    let q = normal_quantile_oracle(0.25);
    assert!((q + 0.67449).abs() < 1e-5);
    assert!((f.quantile_continuous(0.25).unwrap() - q).abs() < 1e-9);
    let p = BinPartition::from_pdf(&f, 4).unwrap();
    for (j, z) in p.boundaries().iter().enumerate() {
        let expect = normal_quantile_oracle((j + 1) as f64 / 4.0);
        assert!((z - expect).abs() < 1e-9);
    }
}

#[test]
fn three_bin_mass_under_narrow_gaussian() {
    let f = GeneralizedPdf::standard_normal();
    let g = GeneralizedPdf::gaussian(0.0, 0.5).unwrap();
    let z1 = normal_quantile_oracle(1.0 / 3.0);
    assert!((z1 + 0.43073).abs() < 1e-5);
    let oracle = 0.5 * libm::erfc(-(z1 / 0.5f64.sqrt()) / std::f64::consts::SQRT_2);
    let masses = BinPartition::from_pdf(&f, 3).unwrap().masses_of(&g).unwrap();
    assert!((masses[0] - oracle).abs() < 1e-9);
    assert!((masses[0] - 0.2713).abs() < 1e-4);
}

#[test]
fn empirical_boundaries_concentrate() {
    let f = GeneralizedPdf::standard_normal();
    let xs = f.sample(&mut ChaCha8Rng::seed_from_u64(2024), 100_000);
    let p = BinPartition::from_samples(&xs, 4, &[], 1.0, &[]).unwrap();
    for (z, e) in p.boundaries().iter().zip([-0.67449, 0.0, 0.67449]) {
        assert!((z - e).abs() < 0.02, "{z} vs {e}");
    }
}

#[test]
fn monte_carlo_bin_masses() {
    let f = GeneralizedPdf::new(
        0.5,
        vec![
            (0.5, Component::Gaussian { mean: 0.0, var: 1.0 }),
            (0.5, Component::Uniform { lo: -1.0, hi: 2.0 }),
        ],
        vec![Atom { theta: -1.0, p: 0.25 }, Atom { theta: 1.0, p: 0.25 }],
    )
    .unwrap();
    let p = BinPartition::from_pdf(&f, 6).unwrap();
    let n = 1_000_000;
    let mut counts = vec![0u64; p.n_bins()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..n {
        counts[p.bin_index(f.draw(&mut rng))] += 1;
    }
    for (c, &m) in counts.iter().zip(p.f_masses()) {
        let se = (m * (1.0 - m) / n as f64).sqrt();
        let freq = *c as f64 / n as f64;
        assert!((freq - m).abs() <= 5.0 * se, "freq {freq} vs mass {m}");
    }
}

#[test]
fn partition_bins_are_equiprobable() {
    for f in [GeneralizedPdf::standard_normal(), mixture(), GeneralizedPdf::laplace(0.3, 0.7071).unwrap()] {
        for n in [2usize, 3, 7, 16, 33] {
            let p = BinPartition::from_pdf(&f, n).unwrap();
            let mut prev = 0.0;
            for j in 0..n {
                let cur = if j + 1 == n { 1.0 } else { f.cdf_continuous(p.boundaries()[j]) };
                assert!((cur - prev - 1.0 / n as f64).abs() < 1e-8);
                prev = cur;
            }
        }
    }
}

#[test]
fn moments_against_monte_carlo() {
    let models = [
        mixture(),
        GeneralizedPdf::laplace(0.5, 0.7071).unwrap(),
        GeneralizedPdf::new(
            0.5,
            vec![(1.0, Component::Uniform { lo: -2.0, hi: 1.0 })],
            vec![Atom { theta: -1.0, p: 0.25 }, Atom { theta: 3.0, p: 0.25 }],
        )
        .unwrap(),
    ];
    let n = 1_000_000;
    for (mi, f) in models.iter().enumerate() {
        let xs = f.sample(&mut ChaCha8Rng::seed_from_u64(mi as u64), n);
        for k in 1..=4u32 {
            let vals: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let exact = f.moment(k);
            assert!((mean - exact).abs() <= 5.0 * se, "model {mi} k {k}: {mean} vs {exact}");
        }
    }
}

#[test]
fn kl_reference_for_unit_shift() {
    let f = GeneralizedPdf::standard_normal();
    let g = GeneralizedPdf::gaussian(1.0, 1.0).unwrap();
    let p = BinPartition::from_pdf(&f, 16).unwrap();
    let kl = kl_binned(&p.masses_of(&g).unwrap(), p.f_masses()).unwrap();
    // binning can only lose information relative to the exact KL of 1/2
    assert!(kl > 0.4 && kl < 0.5, "{kl}");
}

fn test_matrix() -> Vec<(GeneralizedPdf, GeneralizedPdf)> {
    let f = GeneralizedPdf::standard_normal();
    let gauss = Component::Gaussian { mean: 0.0, var: 1.0 };
    let with_atoms = |a: f64, b: f64| {
        GeneralizedPdf::new(
            0.5,
            vec![(1.0, gauss)],
            vec![Atom { theta: -1.0, p: a }, Atom { theta: 1.0, p: b }],
        )
        .unwrap()
    };
    vec![
        (f.clone(), GeneralizedPdf::gaussian(0.0, 0.5).unwrap()),
        (f.clone(), GeneralizedPdf::gaussian(0.5, 1.0).unwrap()),
        (f.clone(), GeneralizedPdf::gaussian(0.0, 4.0).unwrap()),
        (f.clone(), GeneralizedPdf::gaussian(0.3, 2.0).unwrap()),
        (f.clone(), GeneralizedPdf::laplace(0.0, 0.7071).unwrap()),
        (f.clone(), mixture()),
        (f.clone(), f.clone()),
        (with_atoms(0.25, 0.25), with_atoms(0.33, 0.17)),
        (
            with_atoms(0.25, 0.25),
            GeneralizedPdf::new(
                0.5,
                vec![(1.0, Component::Gaussian { mean: 0.0, var: 0.5 })],
                vec![Atom { theta: -1.0, p: 0.25 }, Atom { theta: 1.0, p: 0.25 }],
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn crossing_route_agrees_with_definition() {
    for (i, (f, g)) in test_matrix().iter().enumerate() {
        for n in 1..=32 {
            let def = is_distinguishable(f, g, n).unwrap();
            let a1 = check_prop_a1(f, g, n).unwrap();
            assert_eq!(def, a1, "pair {i}, N = {n}");
        }
    }
}

#[test]
fn distinguishable_from_crossing_count_on() {
    for (i, (f, g)) in test_matrix().iter().enumerate() {
        if f == g || !crossing_set(f, g, 4096, 1e-10).unwrap().intervals().is_empty() {
            continue;
        }
        let set = crossing_set(f, g, 4096, 1e-10).unwrap();
        for n in set.len().max(1)..=32 {
            assert!(is_distinguishable(f, g, n).unwrap(), "pair {i}, |I| = {}, N = {n}", set.len());
            assert!(levels_outside(&set, n));
        }
    }
}

#[test]
fn distinguishability_survives_doubling() {
    for (i, (f, g)) in test_matrix().iter().enumerate() {
        for n in 1..=16 {
            if is_distinguishable(f, g, n).unwrap() {
                assert!(is_distinguishable(f, g, 2 * n).unwrap(), "pair {i}, N = {n}");
            }
        }
    }
}

#[test]
fn moment_envelope_contains_f_moment() {
    // C = 11 bounds x^7 phi(x) for the standard normal, so the tail
    // assumption holds with xi = 4
    let f = GeneralizedPdf::standard_normal();
    let params = NSelectionParams::new(2, 0.5, 11.0, 4.0).unwrap();
    for n in 3..=200 {
        let (lo, hi) = mn_bounds(&f, &params, n).unwrap();
        assert!(lo <= 1.0 && 1.0 <= hi, "N = {n}: [{lo}, {hi}]");
    }
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(x in -4.5f64..4.5, mean in -2.0f64..2.0, var in 0.2f64..4.0, w in 0.05f64..0.95) {
        let f = GeneralizedPdf::new(
            1.0,
            vec![
                (w, Component::Gaussian { mean, var }),
                (1.0 - w, Component::Laplace { loc: -mean, scale: var.sqrt() }),
            ],
            vec![],
        ).unwrap();
        let u = f.cdf_continuous(x);
        prop_assume!(u > 1e-6 && u < 1.0 - 1e-6);
        let back = f.quantile_continuous(u).unwrap();
        prop_assert!((back - x).abs() < 1e-8, "x {} back {}", x, back);
    }

    #[test]
    fn gibbs_inequality(raw_g in prop::collection::vec(0.0f64..1.0, 2..20), seed in 0u64..1000) {
        let n = raw_g.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw_f: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.01..1.0)).collect();
        let sg: f64 = raw_g.iter().sum();
        prop_assume!(sg > 0.0);
        let g: Vec<f64> = raw_g.iter().map(|v| v / sg).collect();
        let sf: f64 = raw_f.iter().sum();
        let f: Vec<f64> = raw_f.iter().map(|v| v / sf).collect();
        prop_assert!(kl_binned(&g, &f).unwrap() >= 0.0);
        prop_assert!(kl_binned(&f, &f).unwrap().abs() < 1e-15);
        let diff: f64 = g.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum();
        if diff > 1e-6 {
            prop_assert!(kl_binned(&g, &f).unwrap() > 0.0);
        }
    }

    #[test]
    fn atoms_win_on_boundaries(n in 2usize..20) {
        let f = GeneralizedPdf::standard_normal();
        let z = BinPartition::from_pdf(&f, n).unwrap().boundaries().to_vec();
        let atom = z[z.len() / 2];
        let masses = vec![0.5 / n as f64; n].into_iter().chain([0.5]).collect();
        let p = BinPartition::new(z, vec![atom], masses).unwrap();
        prop_assert_eq!(p.bin_index(atom), n);
    }
}
