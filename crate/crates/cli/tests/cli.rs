use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn arbkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbkit"))
        .args(args)
        .current_dir(dir)
        .env_remove("ARBKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(text: &[u8]) -> Value {
    serde_json::from_slice(text).expect("report is JSON")
}

/// The report without its timing block.
fn without_timing(text: &[u8]) -> Value {
    let mut v = json(text);
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn states(report: &Value) -> Vec<(String, String)> {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| {
            (
                v["condition"].as_str().unwrap().to_owned(),
                v["state"].as_str().unwrap().to_owned(),
            )
        })
        .collect()
}

const DRIFTED: &str = "model.kind = drifted_bm\nmodel.mu = 0.5\nmodel.sigma = 1\nmodel.s0 = 0\n\
                       grid.steps = 64\nn_paths = 200\nseed = 11\n";

#[test]
fn simulate_writes_a_reproducible_path_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    for name in ["a.bin", "b.bin"] {
        let out = arbkit(dir.path(), &["simulate", "--config", &cfg, "--out", name]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.bin")).unwrap();
    let b = std::fs::read(dir.path().join("b.bin")).unwrap();
    assert_eq!(&a[..5], b"ARBK\x01");
    assert_eq!(a, b);
}

#[test]
fn simulate_report_lists_the_file_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    let out = arbkit(dir.path(), &["simulate", "--config", &cfg, "--out", "p.bin", "--json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out.stdout);
    assert_eq!(r["simulation"]["n_paths"], 200);
    assert_eq!(r["simulation"]["steps"], 64);
    assert_eq!(r["command"], "simulate");
}

#[test]
fn zero_steps_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", &DRIFTED.replace("grid.steps = 64", "grid.steps = 0"));
    let out = arbkit(dir.path(), &["simulate", "--config", &cfg, "--out", "p.bin"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("grid.steps"), "{}", stderr(&out));
}

#[test]
fn malformed_thresholds_and_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", &format!("{DRIFTED}thresholds.rho_div = -1\n"));
    let out = arbkit(dir.path(), &["classify", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("thresholds.rho_div"), "{}", stderr(&out));

    let cfg = write(dir.path(), "bad.cfg", &format!("{DRIFTED}colour = blue\n"));
    assert_eq!(code(&arbkit(dir.path(), &["classify", "--config", &cfg])), 2);
    assert_eq!(code(&arbkit(dir.path(), &["classify", "--seed", "abc"])), 2);
    assert_eq!(code(&arbkit(dir.path(), &["classify", "--threads", "0", "--config", &cfg])), 2);
}

#[test]
fn unknown_commands_and_scenarios_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&arbkit(dir.path(), &["scenario", "nosuch"])), 3);
    assert_eq!(code(&arbkit(dir.path(), &["frobnicate"])), 3);
}

#[test]
fn io_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    let out = arbkit(dir.path(), &["simulate", "--config", &cfg, "--out", "missing/dir/p.bin"]);
    assert_eq!(code(&out), 4);
    assert_eq!(code(&arbkit(dir.path(), &["classify", "--config", "no-such.cfg"])), 4);
    assert_eq!(code(&arbkit(dir.path(), &["report-validate", "no-such.json"])), 4);
}

#[test]
fn kernel_drift_fails_nip_with_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "model.kind = kernel_drift\ngrid.steps = 32\nn_paths = 100\n");
    let out = arbkit(dir.path(), &["classify", "--config", &cfg, "--conditions", "nip", "--json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out.stdout);
    assert_eq!(states(&r), vec![("NIP".to_owned(), "FAILS_WITH_CERTIFICATE".to_owned())]);
    let cert = &r["verdicts"][0]["certificate"];
    assert_eq!(cert["kind"], "INCREASING_PROFIT");
    assert!((cert["stats"]["terminal_min"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn drifted_bm_holds_all_three_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    let out = arbkit(dir.path(), &["classify", "--config", &cfg, "--conditions", "nip,nsa,na1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out.stdout);
    let expected: Vec<_> = ["NIP", "NSA", "NA1"]
        .iter()
        .map(|c| (c.to_string(), "HOLDS_NUMERICALLY".to_owned()))
        .collect();
    assert_eq!(states(&r), expected);
    // Every verdict carries the thresholds it used.
    assert_eq!(r["verdicts"][0]["evidence"]["thresholds"]["rho_div"], 1.5);
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model.kind = stopped_bm\nmodel.s0 = 1\nmeasure_change = canonical\ngrid.steps = 128\nn_paths = 700\nchunk_size = 256\n",
    );
    for cmd in ["classify", "change-measure"] {
        let one = arbkit(dir.path(), &[cmd, "--config", &cfg, "--threads", "1"]);
        let four = arbkit(dir.path(), &[cmd, "--config", &cfg, "--threads", "4"]);
        assert_eq!(code(&one), 0, "{}", stderr(&one));
        assert_eq!(code(&four), 0, "{}", stderr(&four));
        assert_eq!(json(&one.stdout)["timing"]["threads"], 1);
        assert_eq!(json(&four.stdout)["timing"]["threads"], 4);
        let strip = |o: &Output| {
            let text = String::from_utf8(o.stdout.clone()).unwrap();
            let cut = text.find("\"timing\"").unwrap();
            text[..cut].to_owned()
        };
        assert_eq!(strip(&one), strip(&four), "{cmd}");
    }
}

#[test]
fn threads_fall_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    let out = Command::new(env!("CARGO_BIN_EXE_arbkit"))
        .args(["classify", "--config", &cfg])
        .current_dir(dir.path())
        .env("ARBKIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out.stdout)["timing"]["threads"], 2);
}

#[test]
fn config_echo_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model.kind = exp_default\nmodel.rate = 1\nmeasure_change = canonical\ngrid.steps = 64\nn_paths = 300\n",
    );
    let first = arbkit(dir.path(), &["classify", "--config", &cfg, "--out", "first.json"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let again = arbkit(dir.path(), &["classify", "--config", "first.json", "--out", "second.json"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    let a = std::fs::read(dir.path().join("first.json")).unwrap();
    let b = std::fs::read(dir.path().join("second.json")).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));

    // The echo, written out as a flat config, is accepted as well.
    let echo = json(&a)["config"].as_object().unwrap().clone();
    let text: String = echo.iter().map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap())).collect();
    let flat = write(dir.path(), "echo.cfg", &text);
    let third = arbkit(dir.path(), &["classify", "--config", &flat]);
    assert_eq!(code(&third), 0, "{}", stderr(&third));
    assert_eq!(without_timing(&a), without_timing(&third.stdout));
}

#[test]
fn report_validate_accepts_reports_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DRIFTED);
    let out = arbkit(dir.path(), &["classify", "--config", &cfg, "--out", "r.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&arbkit(dir.path(), &["report-validate", "r.json"])), 0);

    let text = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    write(dir.path(), "extra.json", &text.replacen("{\n", "{\n  \"extra\": 1,\n", 1));
    assert_eq!(code(&arbkit(dir.path(), &["report-validate", "extra.json"])), 2);
    write(dir.path(), "compact.json", &serde_json::to_string(&json(text.as_bytes())).unwrap());
    assert_eq!(code(&arbkit(dir.path(), &["report-validate", "compact.json"])), 2);
}

#[test]
fn scenario_reports_pass_and_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = arbkit(
        dir.path(),
        &["scenario", "exp-default", "--n-paths", "2000", "--set", "grid.steps=64", "--json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out.stdout);
    assert_eq!(r["scenario"]["pass"], true);
    assert_eq!(r["config"]["n_paths"], "2000");

    // A single path cannot estimate a probability of 0.63.
    let out = arbkit(dir.path(), &["scenario", "exp_default", "--n-paths", "1", "--set", "grid.steps=8"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert_eq!(code(&arbkit(dir.path(), &["scenario", "bessel", "--set", "model.kind=bes3"])), 2);
}

#[test]
fn change_measure_shifts_the_brownian_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model.kind = drifted_bm\nmodel.mu = 0\nmodel.sigma = 1\nmodel.s0 = 0\n\
         measure_change = exponential\nmeasure_change.theta0 = 0.3\ngrid.steps = 16\nn_paths = 20000\n",
    );
    let out = arbkit(dir.path(), &["change-measure", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = &json(&out.stdout)["measure_change"];
    let mean = &m["terminal_mean_q"][0];
    let (est, se) = (mean["estimate"].as_f64().unwrap(), mean["stderr"].as_f64().unwrap());
    assert!((est - 0.3).abs() < 3.0 * se + 1e-12, "{est} ± {se}");
    assert!((m["theta_over_z_mean"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(m["approach"], "NONE");
    assert_eq!(m["tradeoff_bound"]["holds"], true);
}

#[test]
fn density_files_drive_a_measure_change() {
    let dir = tempfile::tempdir().unwrap();
    // A stopped Brownian motion from one is a valid density for itself.
    let base = "model.kind = stopped_bm\nmodel.s0 = 1\ngrid.steps = 64\nn_paths = 1000\nseed = 5\n";
    let cfg = write(dir.path(), "sim.cfg", base);
    assert_eq!(code(&arbkit(dir.path(), &["simulate", "--config", &cfg, "--out", "z.bin"])), 0);
    let cfg = write(
        dir.path(),
        "q.cfg",
        &format!("{base}measure_change = file\nmeasure_change.file = z.bin\n"),
    );
    let out = arbkit(dir.path(), &["change-measure", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = &json(&out.stdout)["measure_change"];
    assert_eq!(m["density"], "file");
    assert_eq!(m["theta"], "estimated");
    assert_eq!(m["approach"], "CONTINUOUS");

    let wrong = write(
        dir.path(),
        "wrong.cfg",
        &format!("{}measure_change = file\nmeasure_change.file = z.bin\n", base.replace("64", "32")),
    );
    let out = arbkit(dir.path(), &["classify", "--config", &wrong]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("measure_change.file"), "{}", stderr(&out));
}
