use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_warmslice"));
    c.env_remove("WARMSLICE_OUT");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn summary_mean(path: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["stats"]["mean_ms"].as_f64().unwrap()
}

const DEFAULT_HELLO: &str = "[policy]\nkind = \"default\"\n\n[workload]\nname = \"helloworld\"\n";

#[test]
fn simulate_default_helloworld() {
    let d = tempfile::tempdir().unwrap();
    let s = write(d.path(), "s.toml", DEFAULT_HELLO);
    let o = run(&["simulate", "--scenario", s.to_str().unwrap(), "--out", "out"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mean = summary_mean(&d.path().join("out/summary-default-helloworld.json"));
    assert!((mean - 5.31).abs() < 1e-9, "{mean}");
    let trace = fs::read_to_string(d.path().join("out/trace-default-helloworld.csv")).unwrap();
    assert!(trace.starts_with("# seed=42 policy=default workload=helloworld"));
}

#[test]
fn simulate_is_byte_reproducible() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "s.toml",
        "[policy]\nkind = \"in-place\"\n[workload]\nname = \"cpu\"\n[driver]\nmode = \"poisson\"\nrate_rps = 2.0\nhorizon_ms = 20000\n",
    );
    let mut traces = Vec::new();
    for out in ["a", "b"] {
        let o = run(&["simulate", "--scenario", "s.toml", "--seed", "9", "--out", out], d.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        traces.push(fs::read(d.path().join(out).join("trace-in-place-cpu.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert!(String::from_utf8_lossy(&traces[0]).starts_with("# seed=9 "));
}

#[test]
fn simulate_validation_error_names_field() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "bad.toml",
        "[policy]\nkind = \"in-place\"\npark_cpu_mcpu = 2000\n[workload]\nname = \"helloworld\"\n",
    );
    let o = run(&["simulate", "--scenario", "bad.toml", "--out", "out"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("park_cpu"), "{}", stderr(&o));
    assert!(!d.path().join("out").exists());
}

#[test]
fn output_dir_from_environment() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.toml", DEFAULT_HELLO);
    let o = bin()
        .args(["simulate", "--scenario", "s.toml"])
        .env("WARMSLICE_OUT", "from-env")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.path().join("from-env/summary-default-helloworld.json").is_file());
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["frobnicate"], d.path())), 1);
    assert_eq!(code(&run(&["simulate"], d.path())), 1);
    assert_eq!(code(&run(&["simulate", "--scenario", "missing.toml"], d.path())), 1);
    assert_eq!(code(&run(&["--help"], d.path())), 0);
}

#[test]
fn grid_report_and_figures() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["grid", "--out", "g"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = d.path().join("g");
    let summaries = fs::read_dir(&g)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("summary-"))
        .count();
    assert_eq!(summaries, 24);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(g.join("report.json")).unwrap()).unwrap();
    let hello = &report["rows"][0];
    assert_eq!(hello["workload"], "helloworld");
    assert!((hello["cold_ratio"].as_f64().unwrap() - 286.99).abs() < 0.05 * 286.99);
    assert!((hello["warm_ratio"].as_f64().unwrap() - 3.87).abs() < 1e-6);
    assert_eq!(hello["default_ratio"].as_f64().unwrap(), 1.0);
    assert_eq!(report["seeds"], serde_json::json!([42]));

    let traces: Vec<String> = fs::read_dir(&g)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("trace-"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    let mut args = vec!["plot-data", "--figure", "fig7", "--out", "fig7.csv", "--inputs"];
    args.extend(traces.iter().map(String::as_str));
    let o = run(&args, d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("fig7.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "x,y,group");
    assert_eq!(data.len(), 7);
    assert!(text.contains("seed=42"));
}

#[test]
fn report_against_itself_and_mismatch() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.toml", DEFAULT_HELLO);
    assert_eq!(code(&run(&["simulate", "--scenario", "s.toml", "--out", "o"], d.path())), 0);
    let s = "o/summary-default-helloworld.json";
    let o = run(&["report", "--baseline", s, "--inputs", s, "--out", "r"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("helloworld"));
    assert!(stdout.contains("1.00"));
    assert!(d.path().join("r/report.json").is_file());

    let other = write(
        d.path(),
        "other.json",
        &fs::read_to_string(d.path().join(s)).unwrap().replace("helloworld", "io"),
    );
    let o = run(&["report", "--baseline", s, "--inputs", other.to_str().unwrap()], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mismatch"));
}

#[test]
fn plot_data_errors() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "empty.csv", "");
    write(
        d.path(),
        "header.csv",
        "plan_id,step_index,from_mcpu,to_mcpu,repetition,injected_ms,measured_ms\n",
    );
    let o = run(&["plot-data", "--figure", "fig99", "--inputs", "header.csv", "--out", "p.csv"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("fig5a"), "{}", stderr(&o));
    for input in ["empty.csv", "header.csv"] {
        let o = run(&["plot-data", "--figure", "fig3", "--inputs", input, "--out", "p.csv"], d.path());
        assert_eq!(code(&o), 1, "{input}: {}", stderr(&o));
    }
}

#[test]
fn resize_bench_suites_and_custom_plan() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["resize-bench", "--plan", "table2", "--latency", "0", "--out", "t2"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let files: Vec<_> = fs::read_dir(d.path().join("t2")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 8, "{files:?}");

    let o = run(&["resize-bench", "--plan", "fine", "--latency", "0", "--out", "fine"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_dir(d.path().join("fine")).unwrap().count(), 2);

    write(
        d.path(),
        "plan.csv",
        "step_index,from_mcpu,to_mcpu,timed\n0,1,300,true\n1,300,1,false\n2,1,600,true\n",
    );
    let o = run(
        &["resize-bench", "--plan", "plan.csv", "--latency", "5", "--reps", "2", "--out", "c"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv_path = fs::read_dir(d.path().join("c")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(csv_path).unwrap();
    assert!(text.starts_with("# plan="));
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let measured: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!((5.0..=5.0 + 1.0 + 20.0).contains(&measured), "{r}");
    }
}

#[test]
fn resize_bench_rejects_bad_flags() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["resize-bench", "--plan", "table2", "--latency", "-3"][..],
        &["resize-bench", "--plan", "table2", "--load", "sleepy"][..],
        &["resize-bench", "--plan", "nope.csv"][..],
        &["resize-bench", "--plan", "table2", "--reps", "0"][..],
    ] {
        assert_eq!(code(&run(args, d.path())), 1, "{args:?}");
    }
}
