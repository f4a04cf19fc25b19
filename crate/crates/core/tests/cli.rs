use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lamopt::cli::cli_dispatch;
use lamopt::config::RunConfig;
use lamopt::output::{read_archive_csv, RunManifest};
use lamopt::pipeline::RobustEvaluator;
use lamopt::stochastic::DesignPoint;
use serde_json::Value;

const SMALL: &str = "
[uq]
samples_inner = 64
samples_report = 2000

[ga]
population = 16
generations = 6
";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("lamopt").chain(args.iter().copied());
    let code = cli_dispatch(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn optimize(config: &Path, out: &Path) -> Value {
    let r = run(&["optimize", "--quiet", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    serde_json::from_str(&r.stdout).unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let r = run(&["frobnicate"]);
    assert_eq!(r.code, 2);
    assert!(!r.stderr.is_empty());
    assert_eq!(run(&["evaluate", "--bogus"]).code, 2);
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn evaluate_default_prints_json() {
    let r = run(&["evaluate", "--config", "default"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["plies"].as_array().unwrap().len(), 8);
    let s6 = v["objective_sigma6"].as_f64().unwrap();
    assert!(s6 > 0.0 && s6 < 10.0);
}

#[test]
fn evaluate_rejects_bad_designs() {
    assert_eq!(run(&["evaluate", "--design", "0.5,1.25,1.25"]).code, 1);
    assert_eq!(run(&["evaluate", "--design", "1.5,1.25,1.25,1.25,1.25,100"]).code, 1);
    let r = run(&["evaluate", "--design", "0.5,1.25,1.25,1.25,1.25,100", "--table"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("max |sigma6|"));
}

#[test]
fn configuration_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[ga]\npopulation = 3\n").unwrap();
    let r = run(&["evaluate", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("ga.population"), "{}", r.stderr);
    fs::write(&path, "[ga]\npopulation = \n").unwrap();
    let r = run(&["evaluate", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("line 2"), "{}", r.stderr);
}

#[test]
fn propagate_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let r = run(&["propagate", "--samples", "300", "--write-samples", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["response"]["sample_count"], 300);
    let mut reader = csv::Reader::from_path(out.join("samples.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["sample_index", "x1", "x2", "x3", "x4", "x5", "x6", "sigma6"]
    );
    let sigma: Vec<f64> = reader.records().map(|r| r.unwrap()[7].parse().unwrap()).collect();
    assert_eq!(sigma.len(), 300);
    let mean = sigma.iter().sum::<f64>() / 300.0;
    assert!((mean - v["response"]["mean"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn seed_precedence_flag_over_environment() {
    let bin = env!("CARGO_BIN_EXE_lamopt");
    let mean = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(bin);
        cmd.args(["propagate", "--samples", "50"]).args(args).env_remove("LAMOPT_SEED");
        if let Some(seed) = env {
            cmd.env("LAMOPT_SEED", seed);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        (v["seed"].as_u64().unwrap(), v["response"]["mean"].as_f64().unwrap())
    };
    let base = mean(&[], None);
    assert_eq!(base.0, 42);
    let env = mean(&[], Some("7"));
    assert_eq!(env.0, 7);
    assert_ne!(env.1, base.1);
    let flag = mean(&["--seed", "9"], Some("7"));
    assert_eq!(flag.0, 9);
    assert_eq!(mean(&["--seed", "7"], None), env);
}

#[test]
fn end_to_end_products() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let summary = optimize(&config, &out);
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["design_evaluations"], 16 * 7);

    // Manifest lists every product with its size.
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: BTreeMap<String, u64> = manifest.files.iter().map(|f| (f.name.clone(), f.bytes)).collect();
    let on_disk: BTreeMap<String, u64> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.metadata().unwrap().len()))
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest.seeds.ga, 42);
    let stored = RunConfig::from_toml_str(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(manifest.config_sha256, stored.hash());

    // Strict parse of the archive with a general-purpose CSV reader.
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(out.join("archive.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["gen", "x1", "x2", "x3", "x4", "x5", "x6", "mean", "std", "rsd", "rank"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 16 * 7);
    for row in &rows {
        row[0].parse::<usize>().unwrap();
        row[10].parse::<usize>().unwrap();
        for field in row.iter().skip(1).take(9) {
            assert!(field.parse::<f64>().unwrap().is_finite());
        }
    }

    // Independent max-under-filter scan over the archive reproduces the optimum.
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        let (mean, rsd): (f64, f64) = (row[7].parse().unwrap(), row[9].parse().unwrap());
        if rsd <= 0.1 && best.is_none_or(|(_, m)| mean > m) {
            best = Some((i, mean));
        }
    }
    let (index, mean) = best.unwrap();
    assert_eq!(summary["optimum"]["archive_index"], index);
    assert_eq!(summary["optimum"]["inner"]["mean"].as_f64().unwrap(), mean);
    let report_rsd = summary["optimum"]["report"]["rsd"].as_f64().unwrap();
    assert!(report_rsd.is_finite());

    // Every scatter row is feasible.
    for entry in fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if name.starts_with("scatter_") {
            let body = fs::read_to_string(out.join(&name)).unwrap();
            for line in body.lines().skip(1) {
                let m: f64 = line.split(' ').next().unwrap().parse().unwrap();
                let row = rows.iter().find(|r| r[7].parse::<f64>().unwrap() == m).unwrap();
                assert!(row[9].parse::<f64>().unwrap() <= 0.1, "{name}: {line}");
            }
        }
    }

    // The report subcommand agrees with the run summary.
    let r = run(&["report", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--rsd-limit", "0.10"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["optimum"]["archive_index"], summary["optimum"]["archive_index"]);
    assert_eq!(report["optimum"]["inputs"], summary["optimum"]["inputs"]);

    // Re-evaluating an archived design with the shared normals reproduces it.
    let entries = read_archive_csv(&out.join("archive.csv")).unwrap();
    let evaluator = RobustEvaluator::new(stored.plate_model(), stored.input_set().unwrap(), 64, stored.uq.seed);
    for e in entries.iter().step_by(17) {
        let resp = evaluator.response(&DesignPoint::from_slice(&e.genes).unwrap()).unwrap();
        assert_eq!(resp.mean, e.mean);
        assert_eq!(resp.std, e.std);
    }

    // A second run into a non-empty directory is refused.
    let r = run(&["optimize", "--quiet", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    optimize(&config, &a);
    optimize(&config, &b);
    for name in ["archive.csv", "sobol.csv", "summary.json", "cloud.dat", "scatter_load.dat"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn rsd_limit_extremes() {
    let dir = tempfile::tempdir().unwrap();

    let config = write_config(dir.path(), "rsd_limit = inf\n");
    let out = dir.path().join("inf");
    let summary = optimize(&config, &out);
    let entries = read_archive_csv(&out.join("archive.csv")).unwrap();
    let max = entries.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(summary["optimum"]["inner"]["mean"].as_f64().unwrap(), max);
    assert_eq!(summary["feasible_count"], entries.len());

    let config = write_config(dir.path(), "rsd_limit = 0.0\n");
    let out = dir.path().join("zero");
    let summary = optimize(&config, &out);
    assert_eq!(summary["status"], "no feasible design");
    assert!(summary["optimum"].is_null());
    let body = fs::read_to_string(out.join("scatter_volume_fraction.dat")).unwrap();
    assert_eq!(body.lines().count(), 1);
}
