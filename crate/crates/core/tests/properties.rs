use proptest::prelude::*;

use sbdp_core::analytics::{log_extinction_probability, ChainParams};
use sbdp_core::chain::{is_lumpable, lump, pushforward_equivalence, FiniteKernel, Lumping};
use sbdp_core::mc::mc_parallel;
use sbdp_core::model::RateModel;
use sbdp_core::{
    aggregation_death_rate, comparison_model, simulate, AggregationModel, AggregationParams, Configuration,
    ContactModel, DispersalKernel, LinearModel, Phi, Point, Region,
};

fn points_in_unit_square(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec([0.0..=1.0f64, 0.0..=1.0f64], 1..max)
}

fn phi_strategy() -> impl Strategy<Value = Phi> {
    prop_oneof![
        Just(Phi::Constant(2f64.ln())),
        (0.7..3.0f64).prop_map(|h| Phi::Step { height: h, radius: 2.0 }),
        (2.0..4.0f64, 1.0..2.0f64).prop_map(|(h, s)| Phi::Gaussian { height: h, scale: s }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregation_death_rate_is_antitone(pts in points_in_unit_square(12), extra in points_in_unit_square(6), phi in phi_strategy()) {
        let mut params = AggregationParams::new(2.0, 1.0, Region::unit_cube(2));
        params.phi = phi;
        let small = Configuration::from_points(pts.iter().map(|p| Point::from(*p)));
        let mut large = small.clone();
        for p in &extra {
            large.insert(Point::from(*p));
        }
        for x in small.points() {
            let ds = aggregation_death_rate(&params, x, &small).unwrap();
            let dl = aggregation_death_rate(&params, x, &large).unwrap();
            prop_assert!(dl <= ds);
        }
    }

    #[test]
    fn comparison_sits_below_aggregation(pts in points_in_unit_square(10), extra in points_in_unit_square(6), probe in [0.0..=1.0f64, 0.0..=1.0f64], phi in phi_strategy()) {
        let mut params = AggregationParams::new(2.0, 0.8, Region::unit_cube(2));
        params.phi = phi;
        let lower = comparison_model(&params).unwrap();
        let upper = AggregationModel::new(params).unwrap();
        let small = Configuration::from_points(pts.iter().map(|p| Point::from(*p)));
        let mut large = small.clone();
        for p in &extra {
            large.insert(Point::from(*p));
        }
        let x = Point::from(probe);
        prop_assert!(lower.birth_density(&x, 0.0, &small) <= upper.birth_density(&x, 0.0, &large) * (1.0 + 1e-12));
        for id in small.ids() {
            prop_assert!(lower.death_rate(id, 0.0, &small) >= upper.death_rate(id, 0.0, &large) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn birth_mass_respects_growth_bound(pts in points_in_unit_square(20), lambda in 0.1..3.0f64, c in 0.1..3.0f64) {
        let eta = Configuration::from_points(pts.iter().map(|p| Point::from(*p)));
        let contact = ContactModel::new(2, lambda, DispersalKernel::Gaussian { sigma: 0.3 }, 1.0).unwrap();
        let linear = LinearModel::new(Region::unit_cube(2), 0.4, c, 0.5).unwrap();
        let agg = AggregationModel::new(AggregationParams::new(2.0, c, Region::unit_cube(2)))
            .unwrap()
            .with_dispersal(lambda, DispersalKernel::UniformBall { radius: 0.2 })
            .unwrap();
        let models: [&dyn RateModel; 3] = [&contact, &linear, &agg];
        for m in models {
            let (c1, c2) = m.growth_constants();
            prop_assert!(m.birth_mass(0.0, &eta) <= c1 * eta.len() as f64 + c2 + 1e-12);
        }
    }

    #[test]
    fn lumping_duplicated_rows_is_exact(
        base in prop::collection::vec(prop::collection::vec(0.01..1.0f64, 4), 4),
        copies in prop::collection::vec(1usize..4, 4),
        start in 0usize..4,
    ) {
        // normalise the base chain on labels, then split each label's mass over its copies
        let labels: Vec<usize> = copies.iter().enumerate().flat_map(|(l, &k)| std::iter::repeat(l).take(k)).collect();
        let n = labels.len();
        let mut rows = Vec::with_capacity(n);
        for &l in &labels {
            let total: f64 = base[l].iter().sum();
            let mut row = Vec::with_capacity(n);
            for (m, &k) in copies.iter().enumerate() {
                for _ in 0..k {
                    row.push(base[l][m] / total / k as f64);
                }
            }
            let s: f64 = row.iter().sum();
            let last = row.len() - 1;
            row[last] += 1.0 - s;
            rows.push(row);
        }
        let q = FiniteKernel::from_rows(rows).unwrap();
        let f = Lumping::new(labels.clone()).unwrap();
        prop_assert!(is_lumpable(&q, &f, 1e-12));
        let lumped = lump(&q, &f).unwrap();
        prop_assert_eq!(lumped.states(), 4);
        let mut mu0 = vec![0.0; n];
        mu0[labels.iter().position(|&l| l == start).unwrap()] = 1.0;
        prop_assert!(pushforward_equivalence(&q, &f, &mu0, 20).unwrap() <= 1e-12);
    }

    #[test]
    fn extinction_decreases_in_q(c in 0.05..5.0f64, a in 1.01..6.0f64) {
        let p = ChainParams::new(c, a).unwrap();
        let mut prev = 0.0;
        for q in 1..15 {
            let v = log_extinction_probability(q, &p);
            prop_assert!(v <= 0.0);
            prop_assert!(v < prev || (q == 1 && v <= prev));
            prev = v;
        }
    }

    #[test]
    fn replay_reproduces_population_path(seed in any::<u64>(), imm in 0.0..2.0f64, per in 0.0..1.5f64, death in 0.0..2.0f64) {
        let model = LinearModel::new(Region::unit_cube(1), imm, per, death).unwrap();
        let alpha = Configuration::from_points([Point::from([0.3]), Point::from([0.9])]);
        let traj = simulate(&model, &alpha, 2.0, seed).unwrap();
        let path = traj.population_path();
        let mut k = 1;
        let last = traj.replay_with(|before, _| {
            assert_eq!(before.len(), path[k - 1].1);
            k += 1;
        }).unwrap();
        prop_assert_eq!(last.len(), path.last().unwrap().1);
        prop_assert!(traj.events.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn worker_count_never_changes_estimates(seed in any::<u64>(), workers in 2usize..9) {
        let model = LinearModel::new(Region::unit_cube(1), 0.2, 0.8, 0.6).unwrap();
        let alpha = Configuration::from_points([Point::from([0.5])]);
        let run = |_: u64, rng: &mut sbdp_core::SimRng| -> sbdp_core::Result<f64> {
            let t = sbdp_core::engine::simulate_with(&model, &alpha, 1.0, rng.clone(), &Default::default())?;
            Ok(t.final_configuration()?.len() as f64)
        };
        let one = mc_parallel(run, 50, seed, 1).unwrap();
        let many = mc_parallel(run, 50, seed, workers).unwrap();
        prop_assert_eq!(one, many);
    }
}
