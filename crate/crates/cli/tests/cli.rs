use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nblab(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nblab"));
    cmd.args(args).arg("--out").arg(out).arg("--reproducible").env_remove("NBLAB_OUT");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_global_and_blowup() {
    let dir = TempDir::new().unwrap();
    let global = write_config(
        &dir,
        "global.json",
        r#"{"L": 1, "p": 2, "l": 2, "c": "0", "k": "0", "u0": "1", "nodes": 21, "solver": {"t_end": 0.5}}"#,
    );
    let out = dir.path().join("global");
    let o = nblab(&["solve"], Some(&global), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(out.join("verdict.json"));
    assert_eq!(v["verdict"]["kind"], "ReachedTEnd");
    assert!(v["estimate"].is_null());
    for f in ["trajectory.csv", "snapshots.csv", "diagnostics.svg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let blow = write_config(
        &dir,
        "blow.json",
        r#"{"problem": {"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "2"}, "nodes": 51}"#,
    );
    let out = dir.path().join("blow");
    let o = nblab(&["solve"], Some(&blow), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(out.join("verdict.json"));
    assert_eq!(v["verdict"]["kind"], "BlowUpDetected");
    let t_est = v["estimate"]["t_est"].as_f64().unwrap();
    assert!((t_est - 0.5).abs() < 0.01, "{t_est}");
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let bad = write_config(&dir, "bad.json", "{ \"L\": 1, ");
    assert_eq!(code(&nblab(&["solve"], Some(&bad), &out)), 2);
    assert_eq!(code(&nblab(&["solve"], Some(&dir.path().join("missing.json")), &out)), 2);
    let negative = write_config(&dir, "neg.json", r#"{"L": 1, "p": 2, "l": 2, "c": "-1", "k": "0", "u0": "1"}"#);
    let o = nblab(&["criteria"], Some(&negative), &out);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nonnegative"), "{}", stderr(&o));
    let incompatible = write_config(&dir, "inc.json", r#"{"L": 1, "p": 2, "l": 2, "c": "0", "k": "1", "u0": "1"}"#);
    assert_eq!(code(&nblab(&["solve"], Some(&incompatible), &out)), 2);
    assert_eq!(code(&nblab(&["sweep"], Some(&negative), &out)), 2);
}

#[test]
fn criteria_examples() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "0.1"}"#, "BlowsUpForAllNontrivial"),
        (r#"{"L": 1, "p": 2, "l": 2, "c": "exp(-t)", "k": "0", "u0": "2"}"#, "BlowsUpAboveThreshold"),
        (r#"{"L": 1, "p": 0.5, "l": 1, "c": "1", "k": "1", "u0": "1"}"#, "AllGlobal"),
    ];
    for (i, (body, kind)) in cases.iter().enumerate() {
        let cfg = write_config(&dir, &format!("c{i}.json"), body);
        let out = dir.path().join(format!("c{i}"));
        let o = nblab(&["criteria"], Some(&cfg), &out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let r = read_json(out.join("criteria.json"));
        assert_eq!(r["verdict"]["kind"], *kind, "{r}");
        if i == 1 {
            assert!((r["verdict"]["threshold"].as_f64().unwrap() - 1.0).abs() < 1e-6);
            assert_eq!(r["w0_exceeds_threshold"], true);
        }
    }
}

#[test]
fn single_cell_sweep_matches_solve_and_criteria() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "problem": {"L": 1, "p": 2, "l": 2, "c": "exp(-t)", "k": "0", "u0": "1.5"},
        "nodes": 31,
        "solver": {"t_end": 3.0, "waive_compatibility": true},
        "sweep": {"x": {"axis": "u0_scale", "values": [1.0]}, "nodes": 31, "t_end": 3.0}
    }"#;
    let cfg = write_config(&dir, "one.json", body);
    let (sw, so, cr) = (dir.path().join("sw"), dir.path().join("so"), dir.path().join("cr"));
    assert_eq!(code(&nblab(&["sweep"], Some(&cfg), &sw)), 0);
    assert_eq!(code(&nblab(&["solve"], Some(&cfg), &so)), 0);
    assert_eq!(code(&nblab(&["criteria"], Some(&cfg), &cr)), 0);
    let cells = read_json(sw.join("sweep.json"));
    let cell = &cells["cells"][0];
    let solved = read_json(so.join("verdict.json"));
    let crit = read_json(cr.join("criteria.json"));
    assert_eq!(cell["simulated"], solved["verdict"]["kind"]);
    assert_eq!(cell["t_stop"], solved["t_final"]);
    assert_eq!(cell["w0"], crit["w0"]);
    assert_eq!(cell["threshold"], crit["threshold"]);
    assert_eq!(cell["prediction"], "blowup");
    assert_eq!(cell["agreement"], "yes");
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "problem": {"L": 1, "p": 2, "l": 2, "c": "exp(-t)", "k": "0", "u0": "1"},
        "sweep": {
            "x": {"axis": "u0_scale", "min": 0.5, "max": 3, "count": 4},
            "y": {"axis": "p", "values": [1.5, 2, 3]},
            "nodes": 21, "t_end": 4.0
        }
    }"#;
    let cfg = write_config(&dir, "sw.json", body);
    let runs: Vec<PathBuf> = ["1", "3"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}"));
            let o = nblab(&["sweep", "--workers", w], Some(&cfg), &out);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            out
        })
        .collect();
    for f in ["regime_map.csv", "sweep.json", "manifest.json"] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(runs[0].join("regime_map.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    // row-major: the column index runs fastest
    let idx: Vec<(usize, usize)> = rows
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    let expected: Vec<(usize, usize)> = (0..3).flat_map(|r| (0..4).map(move |c| (r, c))).collect();
    assert_eq!(idx, expected);
    let summary = &read_json(runs[0].join("sweep.json"))["summary"];
    assert_eq!(summary["disagree"], 0);
}

#[test]
fn sublinear_sweep_is_all_global() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "problem": {"L": 1, "p": 0.5, "l": 0.5, "c": "1 + x", "k": "1", "u0": "2"},
        "sweep": {
            "x": {"axis": "p", "values": [0.2, 0.6, 1.0]},
            "y": {"axis": "u0_scale", "values": [1, 10]},
            "nodes": 21, "t_end": 5.0
        }
    }"#;
    let cfg = write_config(&dir, "sub.json", body);
    let out = dir.path().join("sub");
    let o = nblab(&["sweep"], Some(&cfg), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = &read_json(out.join("sweep.json"))["summary"];
    assert_eq!(summary["cells"], 6);
    assert_eq!(summary["simulated_global"], 6);
    assert_eq!(summary["agree"], 6);
}

#[test]
fn verify_super_exit_codes() {
    let dir = TempDir::new().unwrap();
    let l1 = write_config(
        &dir,
        "l1.json",
        r#"{"problem": {"L": 1, "p": 2, "l": 1, "c": "exp(-2*t)", "k": "0.5", "u0": "0"},
            "nodes": 101, "supersolution": {"t_end": 1.0, "time_nodes": 51}}"#,
    );
    let out = dir.path().join("fam");
    let o = nblab(&["verify-super", "--family", "L1_PG1", "--tighten", "--perturb"], Some(&l1), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = read_json(out.join("verification.json"));
    assert_eq!(v["passed"], true);
    let perturbations = v["perturbations"].as_array().unwrap();
    assert!(perturbations.iter().filter(|p| p["constrained"] == true).all(|p| p["detected"] == true));

    let tight = &v["tightened"]["params"];
    let a = tight["a"].as_f64().unwrap();
    let shrunk = format!("a={}", a * 0.9);
    let o = nblab(&["verify-super", "--family", "L1_PG1", "--param", &shrunk], Some(&l1), &dir.path().join("bad"));
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    let sub = write_config(
        &dir,
        "sub.json",
        r#"{"problem": {"L": 1, "p": 0.5, "l": 0.8, "c": "1 + x", "k": "0.5*(1 + y)", "u0": "1 + cos(pi*x)"},
            "nodes": 51, "supersolution": {"t_end": 1.0, "time_nodes": 21}}"#,
    );
    let good = nblab(&["verify-super", "--expr", "exp(10*t)*(2 + 3*(x-0.5)^2)"], Some(&sub), &dir.path().join("e1"));
    assert_eq!(code(&good), 0, "{}", stderr(&good));
    let flat = nblab(&["verify-super", "--expr", "1"], Some(&sub), &dir.path().join("e2"));
    assert_eq!(code(&flat), 1);
    let wrong = nblab(&["verify-super", "--family", "P1_EXP"], Some(&sub), &dir.path().join("e3"));
    assert_eq!(code(&wrong), 2);
    let neither = nblab(&["verify-super"], Some(&sub), &dir.path().join("e4"));
    assert_eq!(code(&neither), 2);
}

#[test]
fn reproducible_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "blow.json",
        r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "2", "nodes": 41}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&nblab(&["solve"], Some(&cfg), &a)), 0);
    assert_eq!(code(&nblab(&["solve"], Some(&cfg), &b)), 0);
    let manifest = read_json(a.join("manifest.json"));
    let outputs: Vec<String> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert!(outputs.contains(&"verdict.json".to_string()));
    for f in outputs.iter().map(String::as_str).chain(["manifest.json"]) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(manifest["parameters"]["config"]["problem"]["c"], "1");

    let stamped = dir.path().join("stamped");
    let o = Command::new(env!("CARGO_BIN_EXE_nblab"))
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&stamped)
        .env_remove("NBLAB_OUT")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(stamped.join("diagnostics.svg")).unwrap();
    assert!(svg.contains("<!-- generated by nblab"));
    assert!(!fs::read_to_string(a.join("diagnostics.svg")).unwrap().contains("<!--"));
    assert_eq!(fs::read(a.join("verdict.json")).unwrap(), fs::read(stamped.join("verdict.json")).unwrap());
}

#[test]
fn env_var_overrides_out() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "0.1"}"#);
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_nblab"))
        .args(["criteria", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag)
        .env("NBLAB_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(env.join("criteria.json").exists());
    assert!(!flag.exists());
}

#[test]
fn auxiliary_subcommands() {
    let dir = TempDir::new().unwrap();
    let b = write_config(
        &dir,
        "b.json",
        r#"{"boundedness": {"g": "1", "nodes": 21, "growth_window": [5, 10]}}"#,
    );
    let out = dir.path().join("b");
    let o = nblab(&["boundedness-check"], Some(&b), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(out.join("boundedness.json"));
    assert_eq!(r["report"]["verdict"], "Unbounded");
    // mass grows like 2t, so sup(10)/sup(5) is close to 21/11
    let growth = r["simulation"]["growth"].as_f64().unwrap();
    assert!(growth > 0.8, "{growth}");

    let out = dir.path().join("cx");
    let cx = write_config(&dir, "cx.json", r#"{"counterexample": {"horizon": 64}}"#);
    let o = nblab(&["counterexample"], Some(&cx), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(out.join("counterexample.json"));
    assert_eq!(r["criteria"]["integral_finite"], true);
    assert_eq!(r["increasing"], true);

    let loc = write_config(
        &dir,
        "loc.json",
        r#"{"L": 1, "p": 1, "l": 2, "c": "0", "k": "5", "u0": "1", "localization": {"nodes": 101}}"#,
    );
    let out = dir.path().join("loc");
    let o = nblab(&["localize"], Some(&loc), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(out.join("localization.json"));
    assert_eq!(r["passed"], true, "{r}");
    assert!(fs::read_to_string(out.join("localization.csv")).unwrap().starts_with("t,boundary_max,interior_max\n"));
    let wrong = write_config(&dir, "w.json", r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "1"}"#);
    assert_eq!(code(&nblab(&["localize"], Some(&wrong), &dir.path().join("w"))), 2);

    let ode = write_config(
        &dir,
        "ode.json",
        r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": "0.5", "u0": "0.5", "nodes": 41,
            "solver": {"waive_compatibility": true}, "ode": {"t_end": 2}}"#,
    );
    let out = dir.path().join("ode");
    let o = nblab(&["ode-compare"], Some(&ode), &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(out.join("ode.json"));
    assert_eq!(r["ordered"], true, "{r}");
    // w' = 2w², w(0) = 1/2
    assert!((r["ode_blowup_time"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let pde_stop = r["pde_verdict"]["t_stop"].as_f64().unwrap();
    assert!(pde_stop <= 1.0, "{pde_stop}");
}
