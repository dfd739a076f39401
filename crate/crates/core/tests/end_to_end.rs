use gwflow_core::equilibrium::{densities, speed, stationary_ensemble};
use gwflow_core::experiment::{parse_config, run};
use gwflow_core::hydro::{height_modulus, initial_modulus, modulus_constant, simulate, HydroCase};
use gwflow_core::lattice::ContinuousProfile;

#[test]
fn axioms_pipeline_passes_at_small_scale() {
    let text = r#"
kind = "axioms"
seed = 21
replicas = 4

[axioms]
torus = [8, 8]
t = 4.0
sizes = [4, 8]
locality_trials = 4
oracle_queries = 30

[axioms.modulus]
n = 20
deltas = [0.16]
"#;
    let c = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run(&c, dir.path()).unwrap();
    let names: Vec<&str> = m.checks.iter().map(|c| c.name.as_str()).collect();
    for want in [
        "translation",
        "monotone_raise",
        "monotone_random",
        "markov_split",
        "oracle_mismatches",
    ] {
        let check = m
            .checks
            .iter()
            .find(|c| c.name == want)
            .unwrap_or_else(|| panic!("{want} missing from {names:?}"));
        assert!(check.passed, "{check:?}");
    }
    assert!(m.outputs.iter().any(|o| o == "modulus.csv"));
}

#[test]
fn height_modulus_bound_at_moderate_scale() {
    let f = ContinuousProfile::AffinePlusSinusoid {
        rho: [0.25, -0.5],
        offset: 0.0,
        amplitude: 0.2,
        wavevector: [std::f64::consts::PI, 0.0],
    };
    let case = HydroCase {
        profile: f.clone(),
        half_cell: [1.0, 1.0],
        t: 1.0,
    };
    let field = simulate(&case, 40, 5, &[1.0]).unwrap();
    let ys = [-0.5, 0.0, 0.5];
    for delta in [0.04, 0.16] {
        let got = height_modulus(&field, &ys, 0.8, 1.0, delta).unwrap();
        let bound =
            initial_modulus(&f, &ys, 0.8, 1.0, delta) + modulus_constant(1.0) * delta.sqrt();
        assert!(got <= bound, "delta {delta}: {got} > {bound}");
    }
}

#[test]
fn small_ensemble_densities_are_plausible() {
    let ens = stationary_ensemble([0.0, -0.5], (10, 10), 20.0, 8, 3).unwrap();
    let d = densities(&ens).unwrap();
    let v = speed([0.0, -0.5]);
    assert!((d.sum() - v).abs() < 0.15 * v, "{d:?}");
    assert!(d.diff().abs() < 1e-12);
}
