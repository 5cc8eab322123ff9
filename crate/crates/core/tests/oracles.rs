//! Closed forms of the comparison chain against values computed independently
//! (high-precision series sums and first-step linear solves).

use sbdp_core::analytics::{
    chain_transition, decay_threshold, estimate_extinction_mc, estimate_hitting_mc, extinction_probability,
    hitting_probability, log_extinction_probability, ChainParams, ExtinctionOptions,
};
use sbdp_core::chain::{series_extinction, SeriesExtinction};
use sbdp_core::{ComparisonModel, Configuration, Point, Region};

fn p12() -> ChainParams {
    ChainParams::new(1.0, 2.0).unwrap()
}

/// P(hit s before n_max) from every state, by solving h(i) = up·h(i+1) + down·h(i−1)
/// with h(s) = 1, h(n_max) = 0 (Thomas algorithm).
fn first_step_hitting(params: &ChainParams, s: usize, n_max: usize) -> Vec<f64> {
    let m = n_max - s - 1; // unknowns s+1..n_max-1
    let (mut a, mut b, mut c, mut d) = (vec![0.0; m], vec![1.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let i = s + 1 + k;
        let (up, down) = chain_transition(i as u64, params).unwrap();
        a[k] = -down;
        c[k] = -up;
        if k == 0 {
            d[k] = down;
        }
    }
    for k in 1..m {
        let w = a[k] / b[k - 1];
        b[k] -= w * c[k - 1];
        d[k] -= w * d[k - 1];
    }
    let mut h = vec![0.0; m];
    h[m - 1] = d[m - 1] / b[m - 1];
    for k in (0..m - 1).rev() {
        h[k] = (d[k] - c[k] * h[k + 1]) / b[k];
    }
    let mut out = vec![0.0; n_max + 1];
    out[s] = 1.0;
    out[s + 1..n_max].copy_from_slice(&h);
    out
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn extinction_matches_high_precision_values() {
    let p = p12();
    assert!(rel(extinction_probability(1, &p), 0.390_850_288_933_771_38) < 1e-13);
    assert!(rel(extinction_probability(2, &p), 0.086_275_433_400_657_077) < 1e-13);
    assert!(rel(extinction_probability(5, &p), 1.888_251_725_556_377_8e-5) < 1e-12);
    assert!(rel(hitting_probability(2, 1, &p).unwrap(), 0.220_737_801_258_927_14) < 1e-13);
}

#[test]
fn extinction_matches_first_step_solve() {
    for (c, a) in [(1.0, 2.0), (0.5, 1.5), (3.0, 1.2), (0.2, 4.0)] {
        let p = ChainParams::new(c, a).unwrap();
        let h = first_step_hitting(&p, 0, 400);
        for q in 1..12 {
            let closed = extinction_probability(q as u64, &p);
            assert!((closed - h[q]).abs() < 1e-12, "c={c} a={a} q={q}: {closed} vs {}", h[q]);
        }
        let h1 = first_step_hitting(&p, 1, 400);
        for q in 2..12 {
            let closed = hitting_probability(q as u64, 1, &p).unwrap();
            assert!((closed - h1[q]).abs() < 1e-12, "c={c} a={a} q={q}");
        }
    }
}

#[test]
fn deep_tail_in_log_space() {
    let lp = log_extinction_probability(30, &p12());
    assert!(lp / std::f64::consts::LN_10 < -100.0);
    assert!((lp / std::f64::consts::LN_10 + 140.194).abs() < 1e-3, "{}", lp / std::f64::consts::LN_10);
    let lp = log_extinction_probability(1000, &p12());
    assert!(lp.is_finite() && lp < -300_000.0);
}

#[test]
fn monotone_in_q_a_and_c() {
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let bases = [1.1, 1.5, 2.0, 3.0, 5.0];
    for &c in &grid {
        for &a in &bases {
            let p = ChainParams::new(c, a).unwrap();
            let mut prev = 1.0;
            for q in 1..25 {
                let v = log_extinction_probability(q, &p);
                assert!(v < prev, "not decreasing in q at c={c} a={a} q={q}");
                prev = v;
            }
        }
    }
    for q in [1, 3, 8] {
        for &c in &grid {
            for w in bases.windows(2) {
                let lo = log_extinction_probability(q, &ChainParams::new(c, w[0]).unwrap());
                let hi = log_extinction_probability(q, &ChainParams::new(c, w[1]).unwrap());
                assert!(hi < lo, "not decreasing in a");
            }
        }
        for &a in &bases {
            for w in grid.windows(2) {
                let lo = log_extinction_probability(q, &ChainParams::new(w[0], a).unwrap());
                let hi = log_extinction_probability(q, &ChainParams::new(w[1], a).unwrap());
                assert!(hi < lo, "not decreasing in c");
            }
        }
    }
}

#[test]
fn hitting_one_decays_to_zero() {
    let p = p12();
    let mut prev = 1.0;
    for q in 1..=20 {
        let v = hitting_probability(q + 1, 1, &p).unwrap();
        assert!(v < prev);
        prev = v;
    }
    assert!(prev < 1e-50);
}

#[test]
fn exponential_decay_thresholds() {
    let p = p12();
    assert_eq!(decay_threshold(&p, 2.0).unwrap(), 2);
    for base in [2.0f64, 5.0, 10.0] {
        let m0 = decay_threshold(&p, base).unwrap();
        for m in m0..=50 {
            assert!(log_extinction_probability(m, &p) <= -(m as f64) * base.ln(), "base {base} m {m}");
        }
    }
}

#[test]
fn generic_series_examples() {
    let half = series_extinction(|j| -(j as f64) * 2f64.ln(), 1);
    assert!((half.probability().unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(series_extinction(|_| 0.0, 1), SeriesExtinction::Certain);
    let p = p12();
    let agg = series_extinction(|j| sbdp_core::analytics::log_rho(j, &p), 1);
    assert!((agg.probability().unwrap() - 0.390_850_288_933_771_38).abs() < 1e-14);
}

fn comparison() -> (ComparisonModel, Region) {
    let region = Region::unit_cube(2);
    (ComparisonModel::new(2.0, 1.0, region.clone()).unwrap(), region)
}

#[test]
fn empty_start_is_extinct() {
    let (model, region) = comparison();
    let est = estimate_extinction_mc(&model, &Configuration::new(), &region, 100, 50.0, 1, &ExtinctionOptions::default())
        .unwrap();
    assert_eq!(est.mean, 1.0);
    assert_eq!(est.std_error, Some(0.0));
}

#[test]
fn five_particles_rarely_die_out() {
    let (model, region) = comparison();
    let alpha = Configuration::from_points((0..5).map(|i| Point::from([0.1 + 0.15 * i as f64, 0.5])));
    let opts = ExtinctionOptions {
        chain: Some(p12()),
        workers: 4,
        ..Default::default()
    };
    let runs = 20_000;
    let est = estimate_extinction_mc(&model, &alpha, &region, runs, 50.0, 7, &opts).unwrap();
    let p5 = extinction_probability(5, &p12());
    let se = (p5 * (1.0 - p5) / runs as f64).sqrt();
    assert!((est.mean - p5).abs() <= 3.0 * se, "{} vs {p5}", est.mean);
}

#[test]
fn chain_and_spatial_extinction_agree() {
    let (model, region) = comparison();
    let alpha = Configuration::from_points([Point::from([0.3, 0.3])]);
    let opts = ExtinctionOptions {
        chain: Some(p12()),
        workers: 4,
        ..Default::default()
    };
    let spatial = estimate_extinction_mc(&model, &alpha, &region, 20_000, 50.0, 11, &opts).unwrap();
    let chain = estimate_hitting_mc(&p12(), 1, 0, 20_000, 12, 4).unwrap();
    let pooled = (spatial.std_error.unwrap().powi(2) + chain.std_error.unwrap().powi(2)).sqrt();
    assert!((spatial.mean - chain.mean).abs() <= 3.0 * pooled, "{} vs {}", spatial.mean, chain.mean);
    assert!(spatial.extra("truncation_bias").unwrap() < 1e-10);
}
