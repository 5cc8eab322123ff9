use sbdp_core::coupling::{coupled_with, inclusion_violations};
use sbdp_core::engine::simulate_with;
use sbdp_core::mc::mc_collect;
use sbdp_core::stats::chi_square_two_sample;
use sbdp_core::{
    comparison_model, AggregationModel, AggregationParams, Configuration, Phi, Point, Region, SimOptions,
};

fn pair() -> (sbdp_core::ComparisonModel, AggregationModel, Configuration) {
    let mut params = AggregationParams::new(2.0, 0.3, Region::unit_cube(2));
    params.phi = Phi::Gaussian { height: 2.0, scale: 1.0 };
    let lower = comparison_model(&params).unwrap();
    let upper = AggregationModel::new(params).unwrap();
    let alpha = Configuration::from_points([Point::from([0.25, 0.25]), Point::from([0.75, 0.5])]);
    (lower, upper, alpha)
}

fn histogram(sizes: &[usize], cells: usize) -> Vec<u64> {
    let mut h = vec![0u64; cells];
    for &s in sizes {
        h[s.min(cells - 1)] += 1;
    }
    h
}

#[test]
fn coupled_marginals_match_independent_runs() {
    let (lower, upper, alpha) = pair();
    let runs = 4000;
    let horizon = 5.0;
    let opts = SimOptions::default();
    let coupled = mc_collect(runs, 21, 4, |_, rng| {
        let p = coupled_with(&lower, &upper, &alpha, &alpha, horizon, rng.clone(), &opts)?;
        assert_eq!(inclusion_violations(&p)?, 0);
        Ok((p.lower.final_configuration()?.len(), p.upper.final_configuration()?.len()))
    })
    .unwrap();
    let solo_lower = mc_collect(runs, 22, 4, |_, rng| {
        Ok(simulate_with(&lower, &alpha, horizon, rng.clone(), &opts)?.final_configuration()?.len())
    })
    .unwrap();
    let solo_upper = mc_collect(runs, 23, 4, |_, rng| {
        Ok(simulate_with(&upper, &alpha, horizon, rng.clone(), &opts)?.final_configuration()?.len())
    })
    .unwrap();
    let cl: Vec<usize> = coupled.iter().map(|p| p.0).collect();
    let cu: Vec<usize> = coupled.iter().map(|p| p.1).collect();
    assert!(cl.iter().zip(&cu).all(|(l, u)| l <= u));
    let low = chi_square_two_sample(&histogram(&cl, 12), &histogram(&solo_lower, 12)).unwrap();
    let up = chi_square_two_sample(&histogram(&cu, 12), &histogram(&solo_upper, 12)).unwrap();
    assert!(low.p_value > 1e-3, "{low:?}");
    assert!(up.p_value > 1e-3, "{up:?}");
}

#[test]
fn swapped_roles_are_refused() {
    let (lower, upper, alpha) = pair();
    // with one extra particle above, the aggregation death rate falls below a^{-3}
    let bigger = {
        let mut b = alpha.clone();
        b.insert(Point::from([0.5, 0.9]));
        b
    };
    for seed in 0..20 {
        let res = coupled_with(&upper, &lower, &alpha, &bigger, 5.0, sbdp_core::substream(seed, 0), &SimOptions::default());
        assert!(matches!(res, Err(sbdp_core::Error::MonotonicityViolation { .. })), "{res:?}");
    }
}
