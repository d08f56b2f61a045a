use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: [&str; 12] = [
    "--set",
    "train.samples=2000",
    "--set",
    "train.validation_samples=200",
    "--set",
    "train.epochs=2",
    "--set",
    "network.width=16",
    "--set",
    "network.blocks=1",
    "--set",
    "sweep.samples=200",
];

fn mudsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mudsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = mudsim(args);
    assert!(
        out.status.success(),
        "mudsim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Hash line, header and data rows of one of our CSV files.
fn read_csv(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap();
    assert!(hash.starts_with("# config_hash="), "{}: {hash}", path.display());
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (hash.to_string(), header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn musa_codes_respect_threshold_and_create_nested_output() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("a/b/c");
    run_ok(&["gen-codes", "--preset", "musa-150", "-o", dir.to_str().unwrap()]);
    assert!(dir.join("codes.nmcs").exists());
    let (_, header, rows) = read_csv(&dir.join("correlation.csv"));
    assert_eq!(header.len(), 22);
    assert_eq!(rows.len(), 21);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r[1..].iter().enumerate() {
            let v: f64 = v.parse().unwrap();
            if i == j {
                assert!((v - 1.0).abs() < 1e-9);
            } else {
                assert!(v <= 0.6 + 1e-9, "pair ({i},{j}) correlation {v}");
            }
        }
    }
}

#[test]
fn scma_codes_have_expected_entries() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run_ok(&[
        "gen-codes", "--set", "scheme.kind=scma", "--set", "scheme.resources=6", "--set", "scheme.devices=8", "-o", dir,
    ]);
    let (_, header, rows) = read_csv(&tmp.path().join("codes.csv"));
    assert_eq!(header, ["device", "row", "col", "re", "im"]);
    assert_eq!(rows.len(), 8 * 6 * 4);
    let nonzero = rows
        .iter()
        .filter(|r| r[3].parse::<f64>().unwrap() != 0.0 || r[4].parse::<f64>().unwrap() != 0.0)
        .count();
    assert_eq!(nonzero, 8 * 3 * 4);
}

#[test]
fn scma_presets_build() {
    for preset in ["scma-150", "scma-300"] {
        let tmp = TempDir::new().unwrap();
        run_ok(&["gen-codes", "--preset", preset, "-o", tmp.path().to_str().unwrap()]);
        let (_, _, rows) = read_csv(&tmp.path().join("correlation.csv"));
        assert_eq!(rows.len(), 90);
    }
}

#[test]
fn snr_sweep_has_one_row_per_point_and_algorithm_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let mut args = vec!["train", "--preset", "musa-300", "-o", dir];
    args.extend(TINY);
    run_ok(&args);
    args[0] = "sweep";
    args.push("--deterministic");
    run_ok(&args);
    let first = fs::read(tmp.path().join("sweep.csv")).unwrap();
    let (_, header, rows) = read_csv(&tmp.path().join("sweep.csv"));
    assert_eq!(rows.len(), 5 * 3);
    let alg = col(&header, "algorithm");
    for name in ["dnn", "stomp", "ls-bomp"] {
        assert_eq!(rows.iter().filter(|r| r[alg] == name).count(), 5);
    }
    let recall = col(&header, "recall");
    for r in &rows {
        let v: f64 = r[recall].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    run_ok(&args);
    assert_eq!(first, fs::read(tmp.path().join("sweep.csv")).unwrap());
}

#[test]
fn activity_sweep_covers_device_counts() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let mut args = vec![
        "sweep",
        "--preset",
        "musa-150",
        "-o",
        dir,
        "--set",
        "sweep.variable=activity",
        "--set",
        "sweep.grid=[1,2,3,4,5,6,7,8,9]",
        "--set",
        "sweep.algorithms=[\"stomp\", \"ls-bomp\"]",
    ];
    args.extend(TINY);
    run_ok(&args);
    let (_, header, rows) = read_csv(&tmp.path().join("sweep.csv"));
    assert_eq!(rows.len(), 18);
    let v = col(&header, "value");
    let values: Vec<&str> = rows.iter().step_by(2).map(|r| r[v].as_str()).collect();
    assert_eq!(values, ["1", "2", "3", "4", "5", "6", "7", "8", "9"]);
    let snr_rows = rows.iter().all(|r| r[col(&header, "variable")] == "activity");
    assert!(snr_rows);
}

#[test]
fn eval_and_analyze_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let mut args = vec!["train", "--preset", "musa-300-x2", "-o", dir];
    args.extend(TINY);
    run_ok(&args);
    args[0] = "eval";
    run_ok(&args);
    let (_, _, eval_rows) = read_csv(&tmp.path().join("eval.csv"));
    assert_eq!(eval_rows.len(), 3);
    let (_, header, preds) = read_csv(&tmp.path().join("predictions.csv"));
    assert_eq!(header, ["sample", "device", "probability", "label"]);
    assert_eq!(preds.len(), 200 * 21);

    let pred_path = tmp.path().join("predictions.csv");
    let mut a = vec!["analyze", "--preset", "musa-300-x2", "-o", dir, "--predictions", pred_path.to_str().unwrap()];
    a.extend(TINY);
    run_ok(&a);
    let (_, mh, m) = read_csv(&tmp.path().join("metrics.csv"));
    assert_eq!(m[0][col(&mh, "decisions")], (200 * 21).to_string());
    let (_, _, bins) = read_csv(&tmp.path().join("calibration.csv"));
    assert_eq!(bins.len(), 10);
    let total: u64 = bins.iter().map(|b| b[3].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 200 * 21);

    // The eval DNN row matches analyze on the same predictions.
    let (_, eh, _) = read_csv(&tmp.path().join("eval.csv"));
    let dnn = eval_rows.iter().find(|r| r[col(&eh, "algorithm")] == "dnn").unwrap();
    assert_eq!(dnn[col(&eh, "recall")], m[0][col(&mh, "recall")]);
}

#[test]
fn model_and_dataset_mismatches_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let mut args = vec!["train", "--preset", "musa-300", "-o", dir];
    args.extend(TINY);
    run_ok(&args);

    let mut eval = vec!["eval", "--preset", "musa-300", "-o", dir, "--set", "scheme.antennas=2"];
    eval.extend(TINY);
    assert_eq!(mudsim(&eval).status.code(), Some(2));

    let mut retrain = args.clone();
    retrain.extend(["--set", "train.snr_max=5"]);
    let out = mudsim(&retrain);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-data"));

    let mut codes = vec!["eval", "--preset", "musa-150", "-o", dir];
    codes.extend(TINY);
    assert_eq!(mudsim(&codes).status.code(), Some(2));
}

#[test]
fn flops_breakdown_matches_worked_value() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["flops", "--set", "scheme.resources=6", "--set", "scheme.devices=21", "-o", tmp.path().to_str().unwrap()]);
    let (_, header, rows) = read_csv(&tmp.path().join("flops.csv"));
    assert_eq!(header, ["component", "flops"]);
    let get = |n: &str| rows.iter().find(|r| r[0] == n).unwrap()[1].parse::<u64>().unwrap();
    assert_eq!(get("closed_form"), 544_212);
    assert_eq!(get("component_sum"), 544_212);
}

#[test]
fn coverage_reports_bound_and_monte_carlo() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run_ok(&["coverage", "--devices", "21", "--active", "2", "--alpha-max", "5", "-o", dir]);
    let (_, header, rows) = read_csv(&tmp.path().join("coverage.csv"));
    assert_eq!(rows.len(), 5);
    let (b, mc) = (col(&header, "bound"), col(&header, "mc"));
    for r in &rows {
        let bound: f64 = r[b].parse().unwrap();
        let est: f64 = r[mc].parse().unwrap();
        assert!((0.0..=1.0).contains(&bound));
        assert_eq!(est, 0.0);
    }
    let out = mudsim(&["coverage", "--devices", "5", "--active", "5", "-o", dir]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn channel_probe_requires_indoor_factory() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run_ok(&["channel-probe", "--set", "channel.model=inf-dh", "--points", "50", "-o", dir]);
    let (_, header, rows) = read_csv(&tmp.path().join("channel_probe.csv"));
    assert_eq!(header, ["r2d", "r3d", "pr_los", "pl_los", "pl_nlos"]);
    assert_eq!(rows.len(), 50);
    let p: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]));
    for r in &rows {
        assert!(r[4].parse::<f64>().unwrap() >= r[3].parse::<f64>().unwrap());
    }
    assert_eq!(mudsim(&["channel-probe", "-o", dir]).status.code(), Some(2));
}

#[test]
fn config_file_and_error_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "preset = \"musa-150\"\noutput = \"unused\"\n[channel]\nmodel = \"inf-sl\"\n[network]\nlayout = \"table\"\n",
    )
    .unwrap();
    let dir = tmp.path().join("out");
    run_ok(&["flops", "-c", cfg.to_str().unwrap(), "-o", dir.to_str().unwrap()]);
    run_ok(&["channel-probe", "-c", cfg.to_str().unwrap(), "-o", dir.to_str().unwrap()]);

    let bad = |extra: &[&str]| {
        let mut a = vec!["flops", "-c", cfg.to_str().unwrap(), "-o", dir.to_str().unwrap()];
        a.extend_from_slice(extra);
        mudsim(&a).status.code()
    };
    assert_eq!(bad(&["--set", "train.epoch=3"]), Some(2));
    assert_eq!(bad(&["--set", "channel.model=moon"]), Some(2));
    assert_eq!(bad(&["--set", "scheme.resources=9"]), Some(2));
    assert_eq!(bad(&["--preset", "musa-999"]), Some(2));
    assert_eq!(mudsim(&["flops", "-c", "/nonexistent.toml"]).status.code(), Some(2));

    let missing = tmp.path().join("missing.csv");
    let out = mudsim(&["analyze", "-o", dir.to_str().unwrap(), "--predictions", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
