//! Statistical checks of the samplers against exact laws. All seeds are fixed.

use sbdp_core::engine::{majorant_with, next_event_inhomogeneous, simulate_with, Sampler};
use sbdp_core::mc::mc_collect;
use sbdp_core::stats::{chi_square_two_sample, ks_one_sample, ks_two_sample};
use sbdp_core::{
    next_event_homogeneous, substream, yule_mean, Configuration, EventKind, LinearModel, MCEstimate, Point, Region,
    SimOptions, SimState, Step, TimeScaled,
};

fn one_particle() -> Configuration {
    Configuration::from_points([Point::from([0.5])])
}

#[test]
fn first_event_law_direct_method() {
    // B = 2 (immigration), D = 0.5
    let model = LinearModel::new(Region::unit_cube(1), 2.0, 0.0, 0.5).unwrap();
    let n = 100_000;
    let mut births = 0u64;
    let mut waits = Vec::with_capacity(n);
    let mut rng = substream(1, 0);
    for _ in 0..n {
        let mut state = SimState::new(one_particle(), rng.clone());
        let Step::Event(ev) = next_event_homogeneous(&model, &mut state, f64::INFINITY).unwrap() else {
            panic!("expected an event")
        };
        rng = state.rng;
        births += (ev.kind == EventKind::Birth) as u64;
        waits.push(ev.time);
    }
    let freq = births as f64 / n as f64;
    let sd = (0.8f64 * 0.2 / n as f64).sqrt();
    assert!((freq - 0.8).abs() <= 3.0 * sd, "{freq}");
    let wait = MCEstimate::from_samples(&waits);
    assert!((wait.mean - 0.4).abs() <= 3.0 * wait.std_error.unwrap(), "{}", wait.mean);
    let ks = ks_one_sample(&waits, |t| 1.0 - (-2.5 * t).exp()).unwrap();
    assert!(ks.p_value > 1e-3);
}

#[test]
fn thinning_and_direct_agree_on_homogeneous_model() {
    let model = LinearModel::new(Region::unit_cube(1), 0.5, 1.0, 0.7).unwrap();
    let alpha = Configuration::from_points([Point::from([0.2]), Point::from([0.6])]);
    let n = 20_000;
    let first_wait = |thin: bool, seed: u64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut state = SimState::new(alpha.clone(), substream(seed, i));
                let step = if thin {
                    next_event_inhomogeneous(&model, &mut state, f64::INFINITY)
                } else {
                    next_event_homogeneous(&model, &mut state, f64::INFINITY)
                };
                match step.unwrap() {
                    Step::Event(ev) => ev.time,
                    other => panic!("{other:?}"),
                }
            })
            .collect()
    };
    let ks = ks_two_sample(&first_wait(false, 2), &first_wait(true, 3)).unwrap();
    assert!(ks.p_value > 1e-3, "{ks:?}");

    let final_counts = |sampler: Sampler, seed: u64| -> Vec<u64> {
        let opts = SimOptions {
            sampler,
            ..Default::default()
        };
        let ends = mc_collect(n, seed, 4, |_, rng| {
            let traj = simulate_with(&model, &alpha, 1.5, rng.clone(), &opts)?;
            Ok(traj.final_configuration()?.len())
        })
        .unwrap();
        let mut hist = vec![0u64; 16];
        for e in ends {
            hist[e.min(15)] += 1;
        }
        hist
    };
    let chi = chi_square_two_sample(&final_counts(Sampler::Direct, 4), &final_counts(Sampler::Thinning, 5)).unwrap();
    assert!(chi.p_value > 1e-3, "{chi:?}");
}

#[test]
fn no_birth_while_birth_profile_vanishes() {
    let base = LinearModel::new(Region::unit_cube(1), 1.0, 1.0, 0.2).unwrap();
    let model = TimeScaled::new(base)
        .birth_profile(|t| if t < 1.0 { 0.0 } else { 1.0 }, 1.0)
        .unwrap();
    let trajs = mc_collect(2000, 6, 4, |_, rng| {
        simulate_with(&model, &one_particle(), 3.0, rng.clone(), &SimOptions::default())
    })
    .unwrap();
    let mut late_births = 0;
    for traj in &trajs {
        for ev in &traj.events {
            if ev.kind == EventKind::Birth {
                assert!(ev.time >= 1.0);
                late_births += 1;
            }
        }
    }
    assert!(late_births > 1000);
}

#[test]
fn doubled_profile_doubles_yule_rate() {
    let model = TimeScaled::new(LinearModel::yule(1, 0.5).unwrap())
        .birth_profile(|_| 2.0, 2.0)
        .unwrap();
    let sizes = mc_collect(20_000, 8, 4, |_, rng| {
        let traj = simulate_with(&model, &one_particle(), 1.0, rng.clone(), &SimOptions::default())?;
        Ok(traj.final_configuration()?.len() as f64)
    })
    .unwrap();
    let est = MCEstimate::from_samples(&sizes);
    let target = yule_mean(1, 1.0, 1.0);
    assert!((est.mean - target).abs() <= 3.0 * est.std_error.unwrap(), "{} vs {target}", est.mean);
}

#[test]
fn pure_death_last_death_is_harmonic() {
    let model = LinearModel::pure_death(1, 1.0).unwrap();
    let n = 5;
    let alpha = Configuration::from_points((0..n).map(|i| Point::from([i as f64 / 10.0])));
    let last = mc_collect(20_000, 9, 4, |_, rng| {
        let traj = simulate_with(&model, &alpha, 1e6, rng.clone(), &SimOptions::default())?;
        assert_eq!(traj.deaths(), n);
        Ok(traj.events.last().unwrap().time)
    })
    .unwrap();
    let est = MCEstimate::from_samples(&last);
    let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    assert!((est.mean - harmonic).abs() <= 3.0 * est.std_error.unwrap(), "{} vs {harmonic}", est.mean);
}

#[test]
fn majorant_contains_process_and_has_yule_mean() {
    let model = LinearModel::new(Region::unit_cube(1), 0.0, 1.0, 0.6).unwrap();
    let sizes = mc_collect(10_000, 10, 4, |_, rng| {
        let (eta, bar) = majorant_with(&model, &one_particle(), 1.0, rng.clone(), &SimOptions::default())?;
        let mut lower = eta.initial.clone();
        let mut upper = bar.initial.clone();
        let (mut i, mut j) = (0, 0);
        while i < eta.events.len() || j < bar.events.len() {
            let ti = eta.events.get(i).map_or(f64::INFINITY, |e| e.time);
            let tj = bar.events.get(j).map_or(f64::INFINITY, |e| e.time);
            if tj <= ti {
                let ev = &bar.events[j];
                upper.insert_with_id(ev.particle, ev.point.clone())?;
                j += 1;
            }
            if ti <= tj {
                let ev = &eta.events[i];
                match ev.kind {
                    EventKind::Birth => lower.insert_with_id(ev.particle, ev.point.clone())?,
                    EventKind::Death => {
                        lower.remove(ev.particle);
                    }
                }
                i += 1;
            }
            assert!(lower.ids().all(|id| upper.get(id).is_some()), "inclusion broken");
        }
        Ok(upper.len() as f64)
    })
    .unwrap();
    let est = MCEstimate::from_samples(&sizes);
    let e = std::f64::consts::E;
    assert!((est.mean - e).abs() <= 3.0 * est.std_error.unwrap(), "{}", est.mean);
}

#[test]
fn reruns_are_identical() {
    let model = LinearModel::new(Region::unit_cube(2), 0.3, 0.9, 0.5).unwrap();
    let alpha = Configuration::from_points([Point::from([0.1, 0.1])]);
    let a = sbdp_core::simulate(&model, &alpha, 3.0, 77).unwrap();
    let b = sbdp_core::simulate(&model, &alpha, 3.0, 77).unwrap();
    assert_eq!(a, b);
    let c = sbdp_core::simulate(&model, &alpha, 3.0, 78).unwrap();
    assert_ne!(a, c);
}
