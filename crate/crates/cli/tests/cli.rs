use std::fs;
use std::process::{Command, Output};

use muscle_core::segmentation::check_loss;
use serde_json::Value;
use tempfile::TempDir;

fn muscle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muscle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn steps() -> Vec<f64> {
    (0..60)
        .map(|i| if (20..40).contains(&i) { 5.0 } else { 0.0 } + ((i * 37 % 11) as f64 - 5.0) * 0.1)
        .collect()
}

fn lines(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

fn fit_json(args: &[&str]) -> Value {
    let out = muscle(args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_runtime(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("runtime_ms");
    v
}

#[test]
fn fit_report_reproduces_its_loss() {
    let dir = TempDir::new().unwrap();
    let data = steps();
    let input = write(&dir, "steps.txt", &lines(&data));
    let beta = 0.3;
    let r = fit_json(&["fit", "--input", &input, "--beta", "0.3", "--intervals", "all", "--mc-reps", "1000"]);

    assert_eq!(r["n"], 60);
    assert_eq!(r["method"], "muscle");
    assert_eq!(r["interval_system"], "all");
    let cps: Vec<usize> = serde_json::from_value(r["change_point_indices"].clone()).unwrap();
    assert_eq!(cps, vec![21, 41]);
    assert_eq!(r["k_hat"], 2);
    let values: Vec<Vec<f64>> = serde_json::from_value(r["segment_values"].clone()).unwrap();
    assert_eq!(values.len(), 1);
    assert_eq!(values[0].len(), 3);

    let mut starts = vec![1];
    starts.extend(&cps);
    starts.push(61);
    let loss: f64 = starts
        .windows(2)
        .zip(&values[0])
        .map(|(w, &theta)| check_loss(&data[w[0] - 1..w[1] - 1], theta, beta))
        .sum();
    let reported = r["total_loss"].as_f64().unwrap();
    assert!((loss - reported).abs() <= 1e-9 * (1.0 + loss.abs()), "{loss} vs {reported}");
}

#[test]
fn single_value_series() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.txt", "2.5\n");
    let r = fit_json(&["fit", "--input", &input, "--mc-reps", "1000"]);
    assert_eq!(r["k_hat"], 0);
    assert_eq!(r["segment_values"], serde_json::json!([[2.5]]));
    assert_eq!(r["total_loss"], 0.0);
}

#[test]
fn delimited_columns() {
    let dir = TempDir::new().unwrap();
    let text: String = std::iter::once("t,value\n".to_owned())
        .chain(steps().iter().enumerate().map(|(i, v)| format!("{i},{v}\n")))
        .collect();
    let input = write(&dir, "steps.csv", &text);
    let by_name = fit_json(&["fit", "--input", &input, "--column", "value", "--mc-reps", "1000"]);
    let by_index = fit_json(&["fit", "--input", &input, "--column", "2", "--mc-reps", "1000"]);
    let plain = write(&dir, "steps.txt", &lines(&steps()));
    let direct = fit_json(&["fit", "--input", &plain, "--mc-reps", "1000"]);
    assert_eq!(without_runtime(by_name.clone()), without_runtime(direct));
    assert_eq!(without_runtime(by_name), without_runtime(by_index));

    let out = muscle(&["fit", "--input", &input, "--column", "missing", "--mc-reps", "1000"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn multi_level_and_split() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "steps.txt", &lines(&steps()));
    let r = fit_json(&["fit", "--input", &input, "--betas", "0.25,0.75", "--mc-reps", "1000"]);
    assert_eq!(r["method"], "m_muscle");
    assert_eq!(r["segment_values"].as_array().unwrap().len(), 2);
    assert_eq!(r["calibration_key"].as_array().unwrap().len(), 2);

    let r = fit_json(&["fit", "--input", &input, "--split", "25", "--mc-reps", "1000"]);
    assert_eq!(r["method"], "muscle_s");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.txt", "1\n2\n3\n");
    let bad = write(&dir, "bad.txt", "1\nabc\n3\n");
    let empty = write(&dir, "empty.txt", "# nothing\n\n");
    let missing = path(&dir, "missing.txt");
    let reps = ["--mc-reps", "1000"];

    let run = |args: &[&str]| code(&muscle(&[args, &reps[..]].concat()));
    assert_eq!(run(&["fit", "--input", &missing]), 2);
    assert_eq!(run(&["fit", "--input", &empty]), 2);
    let out = muscle(&["fit", "--input", &bad, "--mc-reps", "1000"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(run(&["fit", "--input", &good, "--beta", "1.5"]), 64);
    assert_eq!(run(&["fit", "--input", &good, "--alpha", "0"]), 64);
    assert_eq!(run(&["fit", "--input", &good, "--betas", "0.7,0.3"]), 64);
    assert_eq!(run(&["fit", "--input", &good, "--betas", "0.3,0.7", "--split", "10"]), 64);
    assert_eq!(run(&["fit", "--input", &good, "--intervals", "octal"]), 64);
    assert_eq!(run(&["fit", "--input", &good, "--no-such-flag"]), 64);
    assert_eq!(run(&["simulate", "--scenario", "nope"]), 64);
    assert_eq!(run(&["calibrate", "--length", "0"]), 64);
    assert_eq!(code(&muscle(&["fit", "--input", &good, "--mc-reps", "10"])), 64);
    assert_eq!(code(&muscle(&["--help"])), 0);
    assert_eq!(code(&muscle(&["--version"])), 0);

    let corrupt = write(&dir, "corrupt.cache", "0.5,0.3,dyadic,1000,0,1\n");
    assert_eq!(run(&["fit", "--input", &good, "--cache", &corrupt]), 65);
    let conflict = write(
        &dir,
        "conflict.cache",
        "0.5,0.3,dyadic,1000,0,1,0.1\n0.5,0.3,dyadic,1000,0,1,0.2\n",
    );
    assert_eq!(run(&["fit", "--input", &good, "--cache", &conflict]), 65);

    let unwritable = path(&dir, "no/such/dir/out.json");
    assert_eq!(run(&["fit", "--input", &good, "--output", &unwritable]), 74);
}

#[test]
fn cache_is_deterministic_and_reused() {
    let dir = TempDir::new().unwrap();
    let cache = path(&dir, "muscle.cache");
    let calibrate = |verbose: bool| {
        let mut args = vec!["calibrate", "--length", "40", "--mc-reps", "1000", "--seed", "7", "--cache", &cache];
        if verbose {
            args.push("-v");
        }
        let out = muscle(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out
    };
    let first = calibrate(false);
    let bytes = fs::read(&cache).unwrap();
    assert!(bytes.starts_with(b"# "));
    let second = calibrate(true);
    assert_eq!(fs::read(&cache).unwrap(), bytes);
    assert_eq!(first.stdout, second.stdout);
    assert!(String::from_utf8_lossy(&second.stderr).contains(" 0 simulated"));

    let out = muscle(&[
        "calibrate", "--length", "40", "--mc-reps", "1000", "--seed", "7", "--cache", &cache, "--verify",
    ]);
    assert_eq!(code(&out), 0);

    let mut text = String::from_utf8(bytes).unwrap();
    let line = text.lines().find(|l| l.split(',').nth(5) == Some("40")).unwrap().to_owned();
    let mut fields: Vec<&str> = line.split(',').collect();
    fields[6] = "9.5";
    text = text.replace(&line, &fields.join(","));
    fs::write(&cache, text).unwrap();
    let out = muscle(&[
        "calibrate", "--length", "40", "--mc-reps", "1000", "--seed", "7", "--cache", &cache, "--verify",
    ]);
    assert_eq!(code(&out), 65);
}

#[test]
fn cached_and_fresh_fits_agree() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "steps.txt", &lines(&steps()));
    let cache = path(&dir, "fit.cache");
    let args = ["fit", "--input", &input, "--mc-reps", "1000", "--seed", "3"];
    let fresh = fit_json(&args);
    let filled = fit_json(&[&args[..], &["--cache", &cache]].concat());
    let reused = fit_json(&[&args[..], &["--cache", &cache]].concat());
    assert_eq!(without_runtime(fresh.clone()), without_runtime(filled));
    assert_eq!(without_runtime(fresh), without_runtime(reused));
}

#[test]
fn svg_plot_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "steps.txt", &lines(&steps()));
    let render = |name: &str| {
        let svg = path(&dir, name);
        let out = muscle(&["fit", "--input", &input, "--mc-reps", "1000", "--plot", &svg, "--output", &path(&dir, "r.json")]);
        assert_eq!(code(&out), 0);
        assert!(out.stdout.is_empty());
        fs::read_to_string(svg).unwrap()
    };
    let a = render("a.svg");
    assert_eq!(a, render("b.svg"));
    assert!(a.starts_with("<svg "));
    assert!(a.trim_end().ends_with("</svg>"));
    assert_eq!(a.matches("<circle ").count(), 60);
    assert_eq!(a.matches("<line ").count(), 2);
    assert_eq!(a.matches("<polyline ").count(), 1);
}

#[test]
fn simulate_writes_csv_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "reps.csv");
    let out = muscle(&["simulate", "--scenario", "windowing", "--reps", "2", "--mc-reps", "1000", "--csv", &csv]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let agg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(agg.is_object());
    let text = fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    let header = rows.next().unwrap();
    assert!(header.starts_with("scenario,rep,seed,k_hat"));
    let rows: Vec<&str> = rows.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("windowing,0,"));
    assert!(rows[2].starts_with("windowing,median,"));
}
