use std::io::Write;

use rand::seq::SliceRandom;

use crate::analysis::compute_metrics_with_scores;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::Scalar;

use super::network::{bce_l2_loss, Mode, MudNetwork};
use super::optim::{Adam, AdamConfig};

const SHUFFLE_TAG: u64 = 0x5348_5546;
const DROPOUT_TAG: u64 = 0x4452_4f50;

/// Optimiser and schedule settings. Dropout and the L2 ratio belong to the
/// network's [`NetworkConfig`](super::NetworkConfig).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 1000,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(a.learning_rate > 0.0) || !(a.eps > 0.0) {
            return Err(Error::invalid("learning rate and Adam epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::invalid("Adam moment decays must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean training loss including the L2 penalty.
    pub loss: f64,
    pub val_recall: Option<f64>,
    pub val_precision: Option<f64>,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,loss,val_recall,val_precision,val_auc";

    /// Writes the log as CSV; undefined validation metrics become empty cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        let cell = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for e in &self.epochs {
            writeln!(
                w,
                "{},{:.8},{},{},{}",
                e.epoch,
                e.loss,
                cell(e.val_recall),
                cell(e.val_precision),
                cell(e.val_auc)
            )?;
        }
        Ok(())
    }
}

fn check_dataset<F: Scalar>(net: &MudNetwork<F>, d: &Dataset) -> Result<()> {
    if d.feature_len != net.inputs() {
        return Err(Error::mismatch("dataset feature length", net.inputs(), d.feature_len));
    }
    if d.devices != net.outputs() {
        return Err(Error::mismatch("dataset device count", net.outputs(), d.devices));
    }
    if d.samples == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(())
}

/// Inference probabilities for every sample of `d`, as `f64`.
pub fn predict_dataset<F: Scalar>(net: &MudNetwork<F>, d: &Dataset) -> Result<Vec<f64>> {
    check_dataset(net, d)?;
    let x: Vec<F> = d.features.iter().map(|&v| F::lit(v as f64)).collect();
    Ok(net.predict(&x, d.samples)?.into_iter().map(|p| p.to_f64_lossy()).collect())
}

/// [`train_with`] without a per-epoch callback.
pub fn train<F: Scalar>(
    net: &mut MudNetwork<F>,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    train_with(net, data, validation, cfg, |_| {})
}

/// Mini-batch Adam on shuffled data. Each epoch's shuffle and dropout masks
/// come from streams derived from `cfg.seed`, so runs are reproducible.
pub fn train_with<F: Scalar>(
    net: &mut MudNetwork<F>,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainingLog> {
    let mut adam = Adam::<F>::new(cfg.adam, net.tensors().iter().map(|t| t.len()));
    train_resume(net, &mut adam, data, validation, cfg, on_epoch)
}

/// Continue training with an existing optimiser state (e.g. restored from a
/// checkpoint). The hyperparameters in `adam.config` take precedence over
/// `cfg.adam`. Epoch numbering restarts at 1.
pub fn train_resume<F: Scalar>(
    net: &mut MudNetwork<F>,
    adam: &mut Adam<F>,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainingLog> {
    cfg.validate()?;
    check_dataset(net, data)?;
    if let Some(v) = validation {
        check_dataset(net, v)?;
    }
    let (d, n) = (net.inputs(), net.outputs());
    let mut order: Vec<usize> = (0..data.samples).collect();
    let mut log = TrainingLog::default();
    let mut x = Vec::with_capacity(cfg.batch_size * d);
    let mut y = Vec::with_capacity(cfg.batch_size * n);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seeded(derive_seed(cfg.seed ^ SHUFFLE_TAG, epoch as u64)));
        let mut drop_rng = seeded(derive_seed(cfg.seed ^ DROPOUT_TAG, epoch as u64));
        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            x.clear();
            y.clear();
            for &i in idx {
                x.extend(data.features_of(i).iter().map(|&v| F::lit(v as f64)));
                y.extend(data.labels_of(i).iter().map(|&l| if l != 0 { F::one() } else { F::zero() }));
            }
            let fwd = net.forward(&x, idx.len(), Mode::Train, Some(&mut drop_rng))?;
            let loss = bce_l2_loss(&fwd.probabilities, &y, net)?;
            if !loss.is_finite() || !fwd.is_finite() {
                return Err(Error::Diverged { epoch, batch: bi, loss });
            }
            loss_sum += loss * idx.len() as f64;
            let grads = net.backward(&fwd, &y)?;
            net.update_running_stats(fwd.trace.as_ref().expect("train mode records a trace"));
            adam.update(net.tensors_mut(), &grads.tensors)?;
        }
        let mut entry = EpochLog {
            epoch,
            loss: loss_sum / data.samples as f64,
            val_recall: None,
            val_precision: None,
            val_auc: None,
        };
        if let Some(v) = validation {
            let p = predict_dataset(net, v)?;
            let m = compute_metrics_with_scores(&p, &v.labels)?;
            entry.val_recall = m.recall;
            entry.val_precision = m.precision;
            entry.val_auc = m.auc;
        }
        log::debug!(
            "epoch {epoch}: loss {:.5} recall {:?} auc {:?}",
            entry.loss,
            entry.val_recall,
            entry.val_auc
        );
        on_epoch(&entry);
        log.epochs.push(entry);
    }
    Ok(log)
}
