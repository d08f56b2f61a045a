use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

use super::network::{bce_l2_loss, Mode, MudNetwork};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    /// Tensor name, flat index, analytic and numeric value at the worst probe.
    pub worst: (String, usize, f64, f64),
}

/// Denominator floor of the relative error, so parameters whose true
/// gradient vanishes (biases feeding batch norm) compare on absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Probe `probes` random parameters of `net` with central differences of
/// step `step` on the train-mode loss of one batch. Dropout masks are drawn
/// from the same seed on every evaluation, so the loss is a fixed function.
pub fn gradient_check(
    net: &MudNetwork<f64>,
    x: &[f64],
    labels: &[f64],
    batch: usize,
    probes: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if probes == 0 || !(step > 0.0) {
        return Err(Error::invalid("need at least one probe and a positive step"));
    }
    let mask_seed = derive_seed(seed, 1);
    let loss = |n: &MudNetwork<f64>| -> Result<f64> {
        let f = n.forward(x, batch, Mode::Train, Some(&mut seeded(mask_seed)))?;
        bce_l2_loss(&f.probabilities, labels, n)
    };
    let fwd = net.forward(x, batch, Mode::Train, Some(&mut seeded(mask_seed)))?;
    let grads = net.backward(&fwd, labels)?;
    let sizes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let names = net.tensor_names();

    let mut rng = seeded(derive_seed(seed, 2));
    let mut probe_net = net.clone();
    let mut report = GradCheckReport {
        probes,
        max_rel_error: 0.0,
        worst: (String::new(), 0, 0.0, 0.0),
    };
    for _ in 0..probes {
        let mut flat = rng.random_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let orig = probe_net.tensors()[t][flat];
        probe_net.tensors_mut()[t][flat] = orig + step;
        let up = loss(&probe_net)?;
        probe_net.tensors_mut()[t][flat] = orig - step;
        let down = loss(&probe_net)?;
        probe_net.tensors_mut()[t][flat] = orig;

        let numeric = (up - down) / (2.0 * step);
        let analytic = grads.tensors[t][flat];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = (names[t].clone(), flat, analytic, numeric);
        }
    }
    Ok(report)
}
