use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use peltier_core::device::trace::{read_actions, read_series, read_temps};
use peltier_core::pattern::CompiledSchedule;
use serde_json::Value;
use tempfile::TempDir;

fn peltier() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_peltier"));
    c.env_remove("PELTIER_OUT_DIR");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    peltier().args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn pattern(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/patterns")
        .join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_a_readable_trace() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--voltage", "2", "--duration", "300"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o);
    let lifetime = summary["lifetime"].as_f64().unwrap();
    assert!((lifetime - 206.3).abs() / 206.3 < 0.05, "{lifetime}");
    let series = read_series(fs::File::open(dir.path().join("trace.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 30_001);
}

#[test]
fn zero_volts_has_no_lifetime() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--voltage", "0", "--duration", "10"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(json(&o).get("lifetime").is_none());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // configuration: step too coarse, unknown config key, missing file
    assert_eq!(code(&run(&["simulate", "--dt", "0.5"], d)), 2);
    let bad = write(d, "bad.toml", "nonsense = 1\n");
    assert_eq!(code(&run(&["--config", bad.to_str().unwrap(), "sweep"], d)), 2);
    assert_eq!(code(&run(&["simulate", "--params", "missing.json"], d)), 2);

    let hot = write(
        d,
        "hot.json",
        r#"{"seebeck_alpha":0.0087,"resistance":0.5,"internal_conductance":0.0064,"heat_capacity_side":1.5,
            "ambient_conductance":0.02,"skin_conductance":0.03,"skin_temp":33,"ambient_temp":25,"warm_face_stack":true}"#,
    );
    let o = run(&["simulate", "--params", hot.to_str().unwrap(), "--voltage", "5"], d);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["calibrate", "--max-iters", "1", "--restarts", "1"], d);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &[
            "calibrate",
            "--max-iters",
            "1",
            "--restarts",
            "1",
            "--allow-nonconverged",
        ],
        d,
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["converged"], Value::Bool(false));

    let typo = write(d, "typo.tpat", "duration 5s\nat 1s elem 9 warm\n");
    let o = run(&["compile", "--pattern", typo.to_str().unwrap()], d);
    assert_eq!(code(&o), 5);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("2:"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let alt = pattern("alternating.tpat");
    assert_eq!(
        code(&run(&["compile", "--pattern", alt.to_str().unwrap(), "--strict"], d)),
        6
    );
    assert_eq!(code(&run(&["compile", "--pattern", alt.to_str().unwrap()], d)), 0);
    assert_eq!(
        code(&run(
            &["run-pattern", "--pattern", alt.to_str().unwrap(), "--strict"],
            d
        )),
        6
    );
}

#[test]
fn empty_pattern_runs_to_an_empty_trace() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["run-pattern", "--pattern", pattern("empty.tpat").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read_actions(fs::File::open(dir.path().join("actions.csv")).unwrap())
        .unwrap()
        .is_empty());
    assert!(read_temps(fs::File::open(dir.path().join("temps.csv")).unwrap())
        .unwrap()
        .is_empty());
}

#[test]
fn single_voltage_sweep() {
    let dir = TempDir::new().unwrap();
    let o = run(&["sweep", "--from", "2", "--to", "2"], dir.path());
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["rows"].as_array().map(Vec::len), Some(1));
    assert_eq!(v["optimal_voltage"].as_f64(), Some(2.0));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("elsewhere");
    fs::create_dir(&target).unwrap();
    let o = peltier()
        .args(["sweep", "--from", "2", "--to", "2.5"])
        .env("PELTIER_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("sweep.csv").exists());
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "peltier.toml",
        "out_dir = \"results\"\ndt = 0.05\nduration = 20.0\n",
    );
    fs::create_dir(dir.path().join("results")).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "simulate"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let series = read_series(fs::File::open(dir.path().join("results/trace.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 401);
}

#[test]
fn run_pattern_outputs_read_back() {
    let dir = TempDir::new().unwrap();
    for backend in ["sim", "emulator"] {
        let out = dir.path().join(backend);
        let o = run(
            &[
                "run-pattern",
                "--pattern",
                pattern("wave.tpat").to_str().unwrap(),
                "--backend",
                backend,
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let summary = json(&o);
        let actions = read_actions(fs::File::open(out.join("actions.csv")).unwrap()).unwrap();
        let temps = read_temps(fs::File::open(out.join("temps.csv")).unwrap()).unwrap();
        let schedule: CompiledSchedule =
            serde_json::from_str(&fs::read_to_string(out.join("schedule.json")).unwrap()).unwrap();
        assert_eq!(summary["actions"].as_u64(), Some(actions.len() as u64));
        assert_eq!(summary["temp_rows"].as_u64(), Some(temps.len() as u64));
        assert_eq!(schedule.command_count() + schedule.rejection_count(), schedule.targets);
        assert!(!actions.is_empty());
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mixed = pattern("mixed.tpat");
    let runs: Vec<Vec<(String, Vec<u8>)>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            fs::create_dir(&out).unwrap();
            let o = run(
                &[
                    "--out-dir",
                    out.to_str().unwrap(),
                    "run-pattern",
                    "--pattern",
                    mixed.to_str().unwrap(),
                    "--noise-sigma",
                    "0.2",
                    "--seed",
                    "42",
                ],
                dir.path(),
            );
            assert_eq!(code(&o), 0);
            let o = run(
                &[
                    "--out-dir",
                    out.to_str().unwrap(),
                    "sweep",
                    "--from",
                    "1.5",
                    "--to",
                    "3",
                ],
                dir.path(),
            );
            assert_eq!(code(&o), 0);
            files(&out)
        })
        .collect();
    assert_eq!(runs[0].len(), 4);
    assert_eq!(runs[0], runs[1]);
}
