//! Full-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! Takes several minutes on one core; the stationary ensembles and the n = 80
//! convergence runs dominate.

use std::fs;
use std::time::Instant;

use gwflow_core::dynamics::{evolve_seeded, EvolveOptions};
use gwflow_core::equilibrium::{
    densities, envelope_spread, kink_count_variance, measure_growth, speed, stationary_ensemble,
    structure_function, KernelParams, Sign,
};
use gwflow_core::experiment::{brute_mismatches, run, ExperimentConfig, ExperimentKind};
use gwflow_core::hj::{hopf_lax_1d, solve, time_step, Grid, GridSolution, SchemeParams};
use gwflow_core::hydro::{axiom_suite, convergence_experiment, AxiomConfig, HydroCase, SampleGrid};
use gwflow_core::lattice::{
    discretize, linear_field, sup_error, validate, ContinuousProfile, DomainSpec,
};
use gwflow_core::polymer::{lis_tail_table, oracle_mismatches};
use gwflow_core::seed;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let phi = linear_field([0.25, -0.5], 1, (20, 20)).unwrap().field;
    let opts = EvolveOptions::recorded(10.0);
    let mut bad = 0;
    for r in 0..20 {
        let s = seed::replica_seed(1, r);
        let traj = evolve_seeded(&phi, s, 10.0, &opts).unwrap();
        bad += oracle_mismatches(&traj, 50, s).unwrap().len();
    }
    outcome(bad == 0, format!("{bad} mismatches in 1000 queries"))
}

fn criterion_2() -> Outcome {
    let cfg = AxiomConfig::default();
    let rep = axiom_suite(2, &cfg).unwrap();
    let exact: Vec<_> = rep.checks.iter().filter(|c| c.exact).collect();
    let failures: usize = exact.iter().map(|c| c.failures).sum();
    let names: Vec<&str> = exact.iter().map(|c| c.name.as_str()).collect();
    outcome(
        failures == 0 && exact.iter().all(|c| c.trials == 20),
        format!("{failures} failures over {names:?}"),
    )
}

fn criterion_3() -> Outcome {
    let k = 2.0 * std::f64::consts::PI / 8.0;
    let cases = [
        ("affine", ContinuousProfile::affine(0.25, -0.5), [2.0, 2.0]),
        (
            "sinusoid",
            ContinuousProfile::AffinePlusSinusoid {
                rho: [0.25, -0.5],
                offset: 0.0,
                amplitude: 0.3,
                wavevector: [k, k],
            },
            [4.0, 4.0],
        ),
        ("wedge", ContinuousProfile::wedge(), [1.5, 4.0]),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (_, f, cell) in &cases {
        for n in [10u32, 50, 200] {
            let case = HydroCase {
                profile: f.clone(),
                half_cell: *cell,
                t: 1.0,
            };
            let (m, nn) = case.torus(n).unwrap();
            let field = discretize(f, n, DomainSpec::torus(m, nn)).unwrap();
            let e = sup_error(f, n, &field, 2000).unwrap();
            worst = worst.max(e * n as f64);
            ok &= e <= 2.0 / n as f64 && validate(&field).is_ok();
        }
    }
    outcome(
        ok,
        format!("max n * error = {worst:.4} (bound 2), all fields valid"),
    )
}

fn criterion_4() -> Outcome {
    let table = lis_tail_table(1.0, 15, 100_000, 4).unwrap();
    let over: Vec<u32> = table
        .iter()
        .filter(|r| r.empirical > r.bound)
        .map(|r| r.k)
        .collect();
    let bad = brute_mismatches(1000, 12, 44);
    outcome(
        over.is_empty() && bad == 0,
        format!(
            "P(L>=1) = {:.4} vs bound {:.4}; k over bound {over:?}; brute-force mismatches {bad}",
            table[0].empirical, table[0].bound
        ),
    )
}

/// Criteria 5 to 7 share the slope (0, -1/2) ensemble.
fn criteria_5_to_7() -> [Outcome; 3] {
    let ens = stationary_ensemble([0.0, -0.5], (50, 50), 100.0, 100, 5).unwrap();
    let v = speed([0.0, -0.5]);
    let g = measure_growth(&ens, 40.0, 55).unwrap();
    let rel = (g.speed_estimate - v).abs() / v;
    let c5 = outcome(
        rel <= 0.05,
        format!(
            "speed {:.5} vs 2/pi = {v:.5}, relative error {rel:.4}",
            g.speed_estimate
        ),
    );

    let d = densities(&ens).unwrap();
    let rel_sum = (d.sum() - v).abs() / v;
    let ens2 = stationary_ensemble([0.3, -0.5], (50, 50), 100.0, 100, 6).unwrap();
    let d2 = densities(&ens2).unwrap();
    let rho1 = ens2.realized[0];
    let rel_diff = (d2.diff() - rho1).abs() / rho1;
    let c6 = outcome(
        rel_sum <= 0.05 && rel_diff <= 0.05,
        format!(
            "kink+antikink {:.5} vs v {v:.5}; antikink-kink {:.5} vs rho1 {rho1}",
            d.sum(),
            d2.diff()
        ),
    );

    let n = g.times.len();
    let var_ratio = g.var_h[n - 1] / g.var_h[n - 3];
    let lo = kink_count_variance(&ens, 4).unwrap();
    let hi = kink_count_variance(&ens, 32).unwrap();
    let model = (32.0f64 * 32.0 * 32f64.ln()) / (4.0 * 4.0 * 4f64.ln());
    let k_ratio = hi.var_kinks / lo.var_kinks / model;
    let a_ratio = hi.var_antikinks / lo.var_antikinks / model;
    let c7 = outcome(
        var_ratio <= 4.0 && k_ratio <= 2.0 && a_ratio <= 2.0,
        format!(
            "Var(40)/Var(10) = {var_ratio:.3}; count variance growth R=4..32 over R^2 log R model: kinks {k_ratio:.3}, antikinks {a_ratio:.3}"
        ),
    );
    [c5, c6, c7]
}

fn criterion_8() -> Outcome {
    let p = KernelParams {
        eta_s: 1.0,
        eta_a: 0.5,
        rho2: -0.5,
        eta_plus: 1.0,
        eta_minus: 1.0,
    };
    let mut spreads = Vec::new();
    for s in [Sign::Plus, Sign::Minus] {
        let w: Vec<f64> = (5..=40)
            .map(|x| structure_function(x as f64, 0, &p, s).unwrap().abs() * (x * x) as f64)
            .collect();
        spreads.push(envelope_spread(&w, 4).unwrap());
    }
    outcome(
        spreads.iter().all(|&s| s < 0.5),
        format!(
            "envelope spread of |S(x,0)| x^2: plus {:.3}, minus {:.3}",
            spreads[0], spreads[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let sp = SchemeParams::default();
    let mut lin_err: f64 = 0.0;
    for rho in [[0.0, -0.5], [0.3, -0.2], [-0.7, -0.9]] {
        let u = solve(
            &ContinuousProfile::affine(rho[0], rho[1]),
            1.0,
            Grid::centered(16, 2.0),
            &sp,
        )
        .unwrap();
        for (x, y) in [(0.1, 0.2), (-0.9, 0.7), (0.5, -0.5)] {
            lin_err = lin_err.max((u.eval(x, y) - (rho[0] * x + rho[1] * y + speed(rho))).abs());
        }
    }

    let w = ContinuousProfile::wedge();
    let g = Grid {
        nx: 3,
        ny: 320,
        x0: -0.5,
        y0: -4.0,
        lx: 1.0,
        ly: 8.0,
    };
    let (dt, _) = time_step(&g, 1.0, &sp).unwrap();
    let u = solve(&w, 1.0, g, &sp).unwrap();
    let wedge_err = (0..=40)
        .map(|k| -1.0 + k as f64 / 20.0)
        .map(|y| (u.eval(0.0, y) - hopf_lax_1d(&w, y, 1.0).unwrap()).abs())
        .fold(0.0, f64::max);
    let wedge_tol = 2.0 * (g.dy() + dt);

    let sinus = ContinuousProfile::AffinePlusSinusoid {
        rho: [0.0, -0.5],
        offset: 0.0,
        amplitude: 0.1,
        wavevector: [2.0 * std::f64::consts::PI, 0.0],
    };
    let sols: Vec<GridSolution> = [16, 32, 64, 128]
        .iter()
        .map(|&n| solve(&sinus, 0.5, Grid::centered(n, 1.0), &sp).unwrap())
        .collect();
    let diffs: Vec<f64> = sols
        .windows(2)
        .map(|p| {
            (0..256)
                .map(|k| (-0.5 + (k % 16) as f64 / 16.0, -0.5 + (k / 16) as f64 / 16.0))
                .map(|(x, y)| (p[0].eval(x, y) - p[1].eval(x, y)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let factor = diffs
        .windows(2)
        .map(|d| d[0] / d[1])
        .fold(f64::INFINITY, f64::min);
    outcome(
        lin_err <= 1e-12 && wedge_err <= wedge_tol && factor >= 1.8,
        format!("linear error {lin_err:.1e}; wedge error {wedge_err:.4} (tol {wedge_tol:.4}); self-convergence factor {factor:.3}"),
    )
}

fn criterion_10() -> Outcome {
    let grid = SampleGrid::square(1.0, 33, 1.0);
    let seeds = [101, 102, 103];
    let lin = HydroCase {
        profile: ContinuousProfile::affine(0.0, -0.5),
        half_cell: [2.0, 2.0],
        t: 1.0,
    };
    let wedge = HydroCase {
        profile: ContinuousProfile::wedge(),
        half_cell: [1.5, 4.0],
        t: 1.0,
    };
    let a = convergence_experiment(&lin, &[10, 20, 40, 80], &grid, &seeds, 32).unwrap();
    let b = convergence_experiment(&wedge, &[10, 20, 40, 80], &grid, &seeds, 32).unwrap();
    let fmt = |r: &[(u32, f64)]| {
        r.iter()
            .map(|p| format!("{:.4}", p.1))
            .collect::<Vec<_>>()
            .join(" > ")
    };
    outcome(
        a.strictly_decreasing() && b.strictly_decreasing() && a.final_error() <= 0.08,
        format!("linear {}; wedge {}", fmt(&a.per_n), fmt(&b.per_n)),
    )
}

fn criterion_11() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let mut sim = ExperimentConfig::new(ExperimentKind::Simulate);
    sim.seed = 11;
    sim.replicas = Some(20);
    let mut hydro = ExperimentConfig::new(ExperimentKind::Hydro);
    hydro.seed = 12;
    hydro.hydro.as_mut().unwrap().n_list = vec![5, 10, 20];
    let mut eq = ExperimentConfig::new(ExperimentKind::Equilibrium);
    eq.seed = 13;
    eq.replicas = Some(10);
    let e = eq.equilibrium.as_mut().unwrap();
    e.torus = [10, 10];
    e.burn = 5.0;
    e.t = 8.0;
    e.radii = vec![2, 4];
    e.structure_x = [1, 4];
    let mut compared = 0;
    for (name, cfg) in [("simulate", sim), ("hydro", hydro), ("equilibrium", eq)] {
        let ma = run(&cfg, &base.path().join(format!("{name}_a"))).unwrap();
        let mb = run(&cfg, &base.path().join(format!("{name}_b"))).unwrap();
        for f in ma.outputs.iter().filter(|f| f.ends_with(".csv")) {
            let a = fs::read(base.path().join(format!("{name}_a")).join(f)).unwrap();
            let b = fs::read(base.path().join(format!("{name}_b")).join(f)).unwrap();
            if a != b || ma.outputs != mb.outputs {
                return outcome(false, format!("{name}/{f} differs between runs"));
            }
            compared += 1;
        }
    }
    outcome(
        true,
        format!("{compared} CSV files byte-identical across reruns"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let time = |k: usize, what: &'static str, f: &dyn Fn() -> Outcome, results: &mut Vec<_>| {
        let start = Instant::now();
        let o = f();
        results.push((k, what, o, start.elapsed().as_secs_f64()));
    };
    time(1, "oracle equivalence", &criterion_1, &mut results);
    time(2, "dynamics axioms", &criterion_2, &mut results);
    time(3, "discretizer bound", &criterion_3, &mut results);
    time(4, "LIS tail bound", &criterion_4, &mut results);
    let start = Instant::now();
    let [c5, c6, c7] = criteria_5_to_7();
    let shared = start.elapsed().as_secs_f64();
    results.push((5, "stationary speed", c5, shared));
    results.push((6, "density identities", c6, shared));
    results.push((7, "variance growth", c7, shared));
    time(8, "kernel decay", &criterion_8, &mut results);
    time(9, "PDE correctness", &criterion_9, &mut results);
    time(10, "hydrodynamic convergence", &criterion_10, &mut results);
    time(11, "determinism", &criterion_11, &mut results);

    let mut failed = 0;
    for (k, what, o, secs) in &results {
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {k:>2} {}: {what}: {} [{secs:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
