use gwflow_core::dynamics::{evolve, run_markov_split, sample_creations, EvolveOptions};
use gwflow_core::equilibrium::speed;
use gwflow_core::experiment::{ExperimentConfig, ExperimentKind};
use gwflow_core::hj::{numerical_hamiltonian, SchemeParams};
use gwflow_core::lattice::{
    discretize, linear_field, snapshot, sup_error, validate, ContinuousProfile, DomainSpec,
};
use gwflow_core::polymer::{
    chain_tail_bound, longest_light_chain, longest_light_chain_brute, PlanarPointSet,
};
use gwflow_core::ticks::fmt17;
use proptest::prelude::*;

fn small_torus() -> impl Strategy<Value = (i64, i64, u64)> {
    (2i64..6, 2i64..5, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn patience_sorting_matches_brute_force(pts in prop::collection::vec((0u8..5, 0u8..5), 0..11)) {
        let set = PlanarPointSet::new(pts.into_iter().map(|(a, b)| (a as f64, b as f64)).collect());
        prop_assert_eq!(longest_light_chain(&set), longest_light_chain_brute(&set));
    }

    #[test]
    fn chain_length_is_monotone_in_the_set(pts in prop::collection::vec((-3.0f64..3.0, 0.0f64..4.0), 1..30)) {
        let all = PlanarPointSet::new(pts.clone());
        let some = PlanarPointSet::new(pts[..pts.len() / 2].to_vec());
        prop_assert!(longest_light_chain(&some) <= longest_light_chain(&all));
        prop_assert!(longest_light_chain(&all) <= all.len());
    }

    #[test]
    fn translation_commutes_with_evolution((m, n, seed) in small_torus(), shift in -9i64..9) {
        let phi = linear_field([0.5, -0.5], 1, (m * 2, n)).unwrap().field;
        let dom = DomainSpec::torus(m * 2, n);
        let w = sample_creations(seed, &dom, 3.0).unwrap();
        let a = evolve(&phi, &w, 3.0, &EvolveOptions::default()).unwrap();
        let b = evolve(&phi.shifted(shift), &w, 3.0, &EvolveOptions::default()).unwrap();
        prop_assert_eq!(a.final_field().shifted(shift), b.final_field().clone());
    }

    #[test]
    fn evolution_is_monotone((m, n, seed) in small_torus(), raise in 0i64..4, pre in 0.0f64..2.0) {
        let dom = DomainSpec::torus(m, n);
        let phi = linear_field([0.0, -0.5], 1, (m, n)).unwrap().field;
        let grown = evolve(&phi, &sample_creations(seed ^ 1, &dom, pre).unwrap(), pre, &EvolveOptions::default()).unwrap();
        let upper = grown.final_field().shifted(raise);
        prop_assert!(phi.le(&upper));
        let w = sample_creations(seed, &dom, 3.0).unwrap();
        let a = evolve(&phi, &w, 3.0, &EvolveOptions::recorded(3.0)).unwrap();
        let b = evolve(&upper, &w, 3.0, &EvolveOptions::recorded(3.0)).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert!(x.1.le(&y.1));
            prop_assert!(validate(&y.1).is_ok());
        }
    }

    #[test]
    fn markov_split_is_bit_exact((m, n, seed) in small_torus(), frac in 0.05f64..0.95) {
        let dom = DomainSpec::torus(m, n);
        let phi = linear_field([0.0, -0.5], 1, (m, n)).unwrap().field;
        let w = sample_creations(seed, &dom, 4.0).unwrap();
        let (one, two) = run_markov_split(&phi, &w, 4.0 * frac, 4.0).unwrap();
        prop_assert_eq!(one, two);
    }

    #[test]
    fn discretizer_error_is_at_most_two_over_n(r1 in -4i32..=4, r2 in -4i32..=0, n in 1u32..30, c in -2.0f64..2.0) {
        // Slopes in quarters so that the torus windings are integers.
        let f = ContinuousProfile::Affine { rho: [r1 as f64 / 4.0, r2 as f64 / 4.0], offset: c };
        let m = 2 * n as i64;
        let field = discretize(&f, n, DomainSpec::torus(m, m)).unwrap();
        prop_assert!(validate(&field).is_ok());
        prop_assert!(sup_error(&f, n, &field, 200).unwrap() <= 2.0 / n as f64);
    }

    #[test]
    fn snapshots_round_trip((m, n, seed) in small_torus()) {
        let dom = DomainSpec::torus(m, n);
        let phi = linear_field([0.0, -0.5], 1, (m, n)).unwrap().field;
        let t = evolve(&phi, &sample_creations(seed, &dom, 2.0).unwrap(), 2.0, &EvolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        snapshot::write_field(t.final_field(), &mut buf).unwrap();
        prop_assert_eq!(snapshot::read_field(&buf[..]).unwrap(), t.final_field().clone());
    }

    #[test]
    fn flux_is_consistent_and_monotone(p in -2.0f64..2.0, q in -1.0f64..0.0, dp in 0.0f64..0.5, dq in 0.0f64..0.5) {
        let s = SchemeParams::default();
        let h = numerical_hamiltonian(p, p, q, q, &s);
        prop_assert!((h - speed([p, q])).abs() < 1e-12);
        // Raising a backward difference never raises the flux; raising a
        // forward one never lowers it.
        prop_assert!(numerical_hamiltonian(p + dp, p, q, q, &s) <= h + 1e-12);
        prop_assert!(numerical_hamiltonian(p, p + dp, q, q, &s) >= h - 1e-12);
        prop_assert!(numerical_hamiltonian(p, p, q + dq, q, &s) <= h + 1e-12);
        prop_assert!(numerical_hamiltonian(p, p, q, q + dq, &s) >= h - 1e-12);
    }

    #[test]
    fn tail_bound_decreases_past_the_peak(area in 0.1f64..4.0, k in 1u32..30) {
        let b = chain_tail_bound(area, k).unwrap();
        let k0 = (2.0 * std::f64::consts::E * std::f64::consts::E * area).sqrt();
        if k as f64 >= k0 {
            prop_assert!(chain_tail_bound(area, k + 1).unwrap() <= b);
        }
    }

    #[test]
    fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), replicas in 1usize..1000, t in 0.5f64..20.0) {
        let mut c = ExperimentConfig::new(ExperimentKind::Simulate);
        c.seed = seed;
        c.replicas = Some(replicas);
        c.simulate.as_mut().unwrap().t_end = t;
        let text = c.to_toml().unwrap();
        let back = gwflow_core::experiment::parse_config(&text).unwrap();
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert_eq!(back, c);
    }
}
