use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gwflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("GWFLOW_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_outputs_and_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.toml",
        "kind = \"simulate\"\n[simulate]\ntorus = [4, 4]\nt_end = 2.0\n",
    );
    let out = gwflow(
        &[
            "simulate", "--config", &cfg, "--seed", "3", "--out", "run", "--check",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    for f in [
        "summary.csv",
        "events_r0.ndjson",
        "final_r0.ndjson",
        "checks.csv",
        "manifest.json",
        "config.toml",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["complete"], true);
    assert_eq!(m["seed"], 3);
    let first = fs::read_to_string(run.join("events_r0.ndjson")).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(line.get("kind").is_some() && line.get("effective").is_some());
}

#[test]
fn same_seed_same_csv() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = gwflow(
            &[
                "lis-bound",
                "--area",
                "1",
                "--k",
                "6",
                "--replicas",
                "3000",
                "--seed",
                "11",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for f in ["lis_tail.csv", "checks.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let table = fs::read_to_string(dir.path().join("a/lis_tail.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "k,empirical,stderr,bound");
    assert_eq!(table.lines().count(), 7);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "kind = \"equilibrium\"\n[equilibrium]\nrho = [0.0, 0.5]\n",
    );
    let out = gwflow(&["equilibrium", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("equilibrium.rho[1]"));

    let cfg = write(dir.path(), "unknown.toml", "kind = \"pde\"\nfoo = 1\n");
    assert_eq!(
        gwflow(&["pde", "--config", &cfg], dir.path()).status.code(),
        Some(2)
    );

    let cfg = write(dir.path(), "wrong.toml", "kind = \"pde\"\n");
    assert_eq!(
        gwflow(&["hydro", "--config", &cfg], dir.path())
            .status
            .code(),
        Some(2)
    );

    assert_eq!(
        gwflow(&["lis-bound", "--replicas", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        gwflow(
            &["equilibrium", "--rho", "0,0.5", "--torus", "4,4"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // A 1% tolerance on a handful of replicas cannot be met.
    let cfg = write(
        dir.path(),
        "eq.toml",
        "kind = \"equilibrium\"\nreplicas = 10\n[equilibrium]\ntorus = [6, 6]\nburn = 2.0\nt = 4.0\nradii = [2, 3]\nstructure_x = [1, 0]\ntolerance = 1e-6\n",
    );
    let out = gwflow(
        &["equilibrium", "--config", &cfg, "--out", "eq", "--check"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = gwflow(
        &["equilibrium", "--config", &cfg, "--out", "eq2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL speed_rel_error"));
}

#[test]
fn threads_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gwflow"))
        .args(["pde", "--out", "p"])
        .current_dir(dir.path())
        .env("GWFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_gwflow"))
        .args(["pde", "--out", "p"])
        .current_dir(dir.path())
        .env("GWFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let header = fs::read_to_string(dir.path().join("p/pde_header.csv")).unwrap();
    assert!(header.starts_with("n_x,n_y,L_x,L_y,t,rho1,rho2,slope_excess\n"));
}
