use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use mudsim::datagen::{generate_dataset, load_dataset, save_dataset, Dataset, GenerationConfig};
use mudsim::linalg::CMatrix;
use mudsim::neural::{save_checkpoint, train_with, MudNetwork};
use mudsim::rng::{derive_seed, seeded};

use super::{sensing_matrix, Run};
use crate::config::{config_err, parse_activity};
use crate::output::{ensure_dir, open_with_hash};

fn hex(h: [u8; 8]) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

/// Generation settings for the training and validation sets.
fn training_generation(run: &Run) -> anyhow::Result<(GenerationConfig, GenerationConfig)> {
    let t = &run.cfg.train;
    let activity = parse_activity(&t.activity)?;
    let snr = (t.snr_min, t.snr_max);
    let train = run.cfg.generation(t.samples, snr, activity, derive_seed(t.seed, 1))?;
    let val = run.cfg.generation(t.validation_samples, snr, activity, derive_seed(t.seed, 2))?;
    Ok((train, val))
}

fn generate(phi: &CMatrix<f64>, g: &GenerationConfig, path: &Path) -> anyhow::Result<Dataset> {
    let start = Instant::now();
    let d = generate_dataset(phi, g).context("generating dataset")?;
    save_dataset(path, &d).with_context(|| format!("writing {}", path.display()))?;
    log::info!("{} samples -> {} ({:.1} s)", d.samples, path.display(), start.elapsed().as_secs_f64());
    Ok(d)
}

/// Load a stored dataset, refusing one generated from other settings.
fn load_matching(phi: &CMatrix<f64>, g: &GenerationConfig, path: &Path) -> anyhow::Result<Dataset> {
    let d = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    let expect = g.hash(phi);
    if d.config_hash != expect {
        return Err(config_err(format!(
            "{} was generated with config hash {}, the current config gives {}; rerun gen-data",
            path.display(),
            hex(d.config_hash),
            hex(expect)
        )));
    }
    Ok(d)
}

pub fn cmd_gen_data(run: &Run) -> anyhow::Result<()> {
    let phi = sensing_matrix(run)?;
    let (tg, vg) = training_generation(run)?;
    ensure_dir(&run.art.dir)?;
    let train = generate(&phi, &tg, &run.art.train_set())?;
    if vg.samples > 0 {
        generate(&phi, &vg, &run.art.validation_set())?;
    }
    println!(
        "datasets: {} training / {} validation samples, feature length {}, config hash {}",
        train.samples,
        vg.samples,
        train.feature_len,
        hex(train.config_hash)
    );
    Ok(())
}

pub fn cmd_train(run: &Run) -> anyhow::Result<()> {
    let phi = sensing_matrix(run)?;
    let (tg, vg) = training_generation(run)?;
    ensure_dir(&run.art.dir)?;
    let load_or_generate = |g: &GenerationConfig, path: &Path| {
        if path.exists() {
            load_matching(&phi, g, path)
        } else {
            generate(&phi, g, path)
        }
    };
    let train = load_or_generate(&tg, &run.art.train_set())?;
    let val = if vg.samples > 0 { Some(load_or_generate(&vg, &run.art.validation_set())?) } else { None };

    let net_cfg = run.cfg.network_config()?;
    let mut net = MudNetwork::<f32>::new(net_cfg, &mut seeded(derive_seed(run.cfg.train.seed, 3)))?;
    let tc = run.cfg.train_config();
    log::info!("training {} parameters for {} epochs", net.parameter_count(), tc.epochs);
    let start = Instant::now();
    let log = train_with(&mut net, &train, val.as_ref(), &tc, |e| {
        log::info!(
            "epoch {}: loss {:.5} val recall {} ({:.0} s)",
            e.epoch,
            e.loss,
            e.val_recall.map_or("-".into(), |r| format!("{r:.4}")),
            start.elapsed().as_secs_f64()
        );
    })
    .context("training")?;

    save_checkpoint(run.art.model(), &net, None).context("writing checkpoint")?;
    let mut w = open_with_hash(&run.art.training_log(), &run.cfg.hash("train"))?;
    log.write_csv(&mut w)?;
    w.flush()?;
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs in {:.0} s: final loss {:.5}, validation recall {}; model at {}",
        log.epochs.len(),
        start.elapsed().as_secs_f64(),
        last.loss,
        last.val_recall.map_or("-".into(), |r| format!("{r:.4}")),
        run.art.model().display()
    );
    Ok(())
}
