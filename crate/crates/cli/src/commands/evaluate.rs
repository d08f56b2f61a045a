use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use mudsim::analysis::{calibration_curve, compute_metrics, compute_metrics_with_scores, MetricsReport};
use mudsim::baselines::{ls_bomp, stomp, StompConfig};
use mudsim::datagen::{generate_dataset, load_dataset, unstack_features_smv, ActivityModel, Dataset};
use mudsim::linalg::CMatrix;
use mudsim::neural::{load_checkpoint, predict_dataset, MudNetwork};
use mudsim::rng::derive_seed;
use mudsim::Complex;
use rayon::prelude::*;

use super::{sensing_matrix, Run};
use crate::config::{config_err, parse_activity, Algorithm};
use crate::output::{cell, ensure_dir, write_records};

const SWEEP_HEADER: [&str; 10] = [
    "variable",
    "value",
    "algorithm",
    "samples",
    "recall",
    "misdetection",
    "precision",
    "accuracy",
    "auc",
    "runtime_s",
];

/// Test-point settings.
struct Point {
    variable: &'static str,
    value: f64,
    snr: f64,
    activity: ActivityModel,
    seed: u64,
}

struct Outcome {
    algorithm: Algorithm,
    metrics: MetricsReport,
    runtime: f64,
    probabilities: Option<Vec<f64>>,
}

fn load_model(run: &Run) -> anyhow::Result<MudNetwork<f32>> {
    let path = run.art.model();
    if !path.exists() {
        return Err(config_err(format!("no model at {}; run train first", path.display())));
    }
    let (net, _) = load_checkpoint::<f32>(&path).with_context(|| format!("loading {}", path.display()))?;
    let (inputs, outputs) = (run.cfg.feature_len(), run.cfg.scheme.devices);
    if net.inputs() != inputs || net.outputs() != outputs {
        return Err(config_err(format!(
            "model {} expects {} features and {} devices, the config gives {inputs} and {outputs}",
            path.display(),
            net.inputs(),
            net.outputs()
        )));
    }
    Ok(net)
}

fn algorithms(run: &Run) -> anyhow::Result<Vec<Algorithm>> {
    run.cfg.sweep.algorithms.iter().map(|a| Algorithm::parse(a)).collect()
}

fn test_set(run: &Run, phi: &CMatrix<f64>, p: &Point) -> anyhow::Result<Dataset> {
    let g = run.cfg.generation(run.cfg.sweep.samples, (p.snr, p.snr), p.activity, p.seed)?;
    Ok(generate_dataset(phi, &g)?)
}

/// Block form of the multi-antenna model: antenna `a` observes rows
/// `a K..(a+1) K`, and device `d` owns columns `d X..(d+1) X`.
fn block_matrix(phi: &CMatrix<f64>, antennas: usize) -> CMatrix<f64> {
    if antennas == 1 {
        return phi.clone();
    }
    let (k, n) = (phi.rows(), phi.cols());
    let mut big = CMatrix::zeros(k * antennas, n * antennas);
    for d in 0..n {
        for a in 0..antennas {
            for r in 0..k {
                big.set(a * k + r, d * antennas + a, phi.get(r, d));
            }
        }
    }
    big
}

fn baseline_decisions(alg: Algorithm, phi: &CMatrix<f64>, d: &Dataset) -> anyhow::Result<Vec<u8>> {
    let x = d.antennas;
    let k = phi.rows();
    let n = phi.cols();
    let big = block_matrix(phi, x);
    let rows: Vec<Vec<u8>> = (0..d.samples)
        .into_par_iter()
        .map(|i| -> anyhow::Result<Vec<u8>> {
            let feats: Vec<f64> = d.features_of(i).iter().map(|&v| f64::from(v)).collect();
            let mut y: Vec<Complex<f64>> = Vec::with_capacity(k * x);
            for chunk in feats.chunks(2 * k) {
                y.extend(unstack_features_smv(chunk)?);
            }
            let active = d.labels_of(i).iter().filter(|&&l| l != 0).count();
            let mut out = vec![0u8; n];
            if active == 0 && alg != Algorithm::StompBlind {
                return Ok(out);
            }
            let support = match alg {
                Algorithm::Stomp => {
                    let cfg = StompConfig { n_known: Some(active * x), ..Default::default() };
                    stomp(&y, &big, &cfg)?.support
                }
                Algorithm::StompBlind => stomp(&y, &big, &StompConfig::default())?.support,
                Algorithm::LsBomp => ls_bomp(&y, &big, active, x)?.support,
                Algorithm::Dnn => unreachable!("not a baseline"),
            };
            for c in support {
                out[c / x] = 1;
            }
            Ok(out)
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(rows.concat())
}

fn run_algorithm(
    alg: Algorithm,
    phi: &CMatrix<f64>,
    net: Option<&MudNetwork<f32>>,
    d: &Dataset,
) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let (metrics, probabilities) = match alg {
        Algorithm::Dnn => {
            let p = predict_dataset(net.expect("model loaded for dnn"), d)?;
            (compute_metrics_with_scores(&p, &d.labels)?, Some(p))
        }
        _ => (compute_metrics(&baseline_decisions(alg, phi, d)?, &d.labels)?, None),
    };
    Ok(Outcome {
        algorithm: alg,
        metrics,
        runtime: start.elapsed().as_secs_f64(),
        probabilities,
    })
}

fn row(run: &Run, p: &Point, samples: usize, o: &Outcome) -> Vec<String> {
    let m = &o.metrics;
    let runtime = if run.deterministic { 0.0 } else { o.runtime };
    vec![
        p.variable.to_string(),
        format!("{}", p.value),
        o.algorithm.name().to_string(),
        samples.to_string(),
        cell(m.recall),
        cell(m.misdetection),
        cell(m.precision),
        format!("{:.6}", m.accuracy),
        cell(m.auc),
        format!("{runtime:.3}"),
    ]
}

/// Every enabled algorithm on one shared test set.
fn evaluate_point(
    run: &Run,
    phi: &CMatrix<f64>,
    net: Option<&MudNetwork<f32>>,
    algs: &[Algorithm],
    p: &Point,
) -> anyhow::Result<(Dataset, Vec<Outcome>)> {
    let d = test_set(run, phi, p)?;
    let outcomes = algs
        .iter()
        .map(|&a| run_algorithm(a, phi, net, &d))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((d, outcomes))
}

pub fn cmd_eval(run: &Run) -> anyhow::Result<()> {
    let algs = algorithms(run)?;
    let phi = sensing_matrix(run)?;
    let net = if algs.contains(&Algorithm::Dnn) { Some(load_model(run)?) } else { None };
    let s = &run.cfg.sweep;
    let point = Point {
        variable: "snr",
        value: s.snr,
        snr: s.snr,
        activity: parse_activity(&s.activity)?,
        seed: s.seed,
    };
    let (d, outcomes) = evaluate_point(run, &phi, net.as_ref(), &algs, &point)?;
    ensure_dir(&run.art.dir)?;
    let hash = run.cfg.hash("eval");
    let rows: Vec<Vec<String>> = outcomes.iter().map(|o| row(run, &point, d.samples, o)).collect();
    write_records(&run.art.eval(), &hash, &SWEEP_HEADER, &rows)?;

    if let Some(p) = outcomes.iter().find_map(|o| o.probabilities.as_ref()) {
        let mut pred = Vec::with_capacity(p.len());
        for i in 0..d.samples {
            for dev in 0..d.devices {
                let j = i * d.devices + dev;
                pred.push(vec![i.to_string(), dev.to_string(), format!("{:.9}", p[j]), d.labels[j].to_string()]);
            }
        }
        write_records(&run.art.predictions(), &hash, &["sample", "device", "probability", "label"], &pred)?;
    }
    for o in &outcomes {
        println!(
            "{:<12} recall {}  precision {}  accuracy {:.4}",
            o.algorithm.name(),
            cell(o.metrics.recall),
            cell(o.metrics.precision),
            o.metrics.accuracy
        );
    }
    Ok(())
}

pub fn cmd_sweep(run: &Run) -> anyhow::Result<()> {
    let algs = algorithms(run)?;
    let phi = sensing_matrix(run)?;
    let net = if algs.contains(&Algorithm::Dnn) { Some(load_model(run)?) } else { None };
    let s = &run.cfg.sweep;
    let fixed_activity = parse_activity(&s.activity)?;
    let points: Vec<Point> = s
        .grid
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let seed = derive_seed(s.seed, i as u64);
            if s.variable == "snr" {
                Point { variable: "snr", value: v, snr: v, activity: fixed_activity, seed }
            } else {
                Point { variable: "activity", value: v, snr: s.snr, activity: ActivityModel::FixedN(v as usize), seed }
            }
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(s.workers).build()?;
    let results: Vec<anyhow::Result<(usize, Vec<Outcome>)>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let (d, o) = evaluate_point(run, &phi, net.as_ref(), &algs, p)?;
                log::info!("{} = {} done", p.variable, p.value);
                Ok((d.samples, o))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (p, r) in points.iter().zip(results) {
        let (samples, outcomes) = r?;
        rows.extend(outcomes.iter().map(|o| row(run, p, samples, o)));
    }
    ensure_dir(&run.art.dir)?;
    write_records(&run.art.sweep(), &run.cfg.hash("sweep"), &SWEEP_HEADER, &rows)?;
    println!("sweep: {} rows written to {}", rows.len(), run.art.sweep().display());
    Ok(())
}

pub struct AnalyzeArgs {
    pub predictions: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub bins: usize,
}

/// `probability` and `label` columns of a predictions CSV.
fn read_predictions(path: &PathBuf) -> anyhow::Result<(Vec<f64>, Vec<u8>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| config_err(format!("{} has no '{name}' column", path.display())))
    };
    let (pc, lc) = (col("probability")?, col("label")?);
    let (mut probs, mut labels) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || config_err(format!("{} record {}: malformed value", path.display(), line + 1));
        probs.push(rec.get(pc).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(bad)?);
        labels.push(rec.get(lc).and_then(|v| v.trim().parse::<u8>().ok()).ok_or_else(bad)?);
    }
    Ok((probs, labels))
}

pub fn cmd_analyze(run: &Run, args: &AnalyzeArgs) -> anyhow::Result<()> {
    let (probs, labels) = match (&args.predictions, &args.dataset) {
        (Some(_), Some(_)) => return Err(config_err("pass either --predictions or --dataset, not both")),
        (Some(p), None) => read_predictions(p)?,
        (None, dataset) => {
            let net = load_model(run)?;
            let d = match dataset {
                Some(path) => load_dataset(path).with_context(|| format!("loading {}", path.display()))?,
                None => {
                    let phi = sensing_matrix(run)?;
                    let s = &run.cfg.sweep;
                    let p = Point {
                        variable: "snr",
                        value: s.snr,
                        snr: s.snr,
                        activity: parse_activity(&s.activity)?,
                        seed: s.seed,
                    };
                    test_set(run, &phi, &p)?
                }
            };
            (predict_dataset(&net, &d)?, d.labels)
        }
    };
    let m = compute_metrics_with_scores(&probs, &labels)?;
    let curve = calibration_curve(&probs, &labels, args.bins)?;
    ensure_dir(&run.art.dir)?;
    let hash = run.cfg.hash(&format!(
        "analyze {:?} {:?} {}",
        args.predictions, args.dataset, args.bins
    ));
    write_records(
        &run.art.metrics(),
        &hash,
        &["decisions", "tp", "tn", "fp", "fn", "recall", "misdetection", "precision", "accuracy", "auc"],
        &[vec![
            m.total().to_string(),
            m.tp.to_string(),
            m.tn.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            cell(m.recall),
            cell(m.misdetection),
            cell(m.precision),
            format!("{:.6}", m.accuracy),
            cell(m.auc),
        ]],
    )?;
    let rows: Vec<Vec<String>> = curve
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                i.to_string(),
                format!("{}", b.lower),
                format!("{}", b.upper),
                b.count.to_string(),
                cell(b.mean_predicted),
                cell(b.frequency),
                cell(b.deviation()),
            ]
        })
        .collect();
    write_records(
        &run.art.calibration(),
        &hash,
        &["bin", "lower", "upper", "count", "mean_predicted", "frequency", "deviation"],
        &rows,
    )?;
    println!(
        "analyze: {} decisions, recall {}, precision {}, AUC {}, max calibration deviation (bins >= 100) {}",
        m.total(),
        cell(m.recall),
        cell(m.precision),
        cell(m.auc),
        cell(curve.max_deviation(100))
    );
    Ok(())
}
