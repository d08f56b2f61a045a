//! Labelled pilot-measurement synthesis for single- and multi-antenna
//! detection, and the `NMUD` dataset container.

mod generate;
mod io;

pub use generate::{
    generate_dataset, generate_sample, ActivityModel, Dataset, GenerationConfig, SampleParts, SnrMode,
};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};

use num_complex::Complex;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::channel::cn01;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Draw an activity vector for `n` devices.
pub fn sample_activity<R: Rng + ?Sized>(n: usize, model: &ActivityModel, rng: &mut R) -> Result<Vec<u8>> {
    model.validate(n)?;
    let mut a = vec![0u8; n];
    match *model {
        ActivityModel::FixedN(k) => {
            for i in sample_indices(rng, n, k) {
                a[i] = 1;
            }
        }
        ActivityModel::UniformN { min, max } => {
            let k = rng.random_range(min..=max);
            for i in sample_indices(rng, n, k) {
                a[i] = 1;
            }
        }
        ActivityModel::Bernoulli { p, require_active } => loop {
            for x in a.iter_mut() {
                *x = u8::from(rng.random::<f64>() < p);
            }
            if !require_active || a.contains(&1) {
                break;
            }
        },
    }
    Ok(a)
}

/// Seeded form of [`sample_activity`].
pub fn sample_activity_seeded(n: usize, model: &ActivityModel, seed: u64) -> Result<Vec<u8>> {
    sample_activity(n, model, &mut seeded(seed))
}

/// `y = Phi (a o h) + w` for one antenna; `noise_var = 0` disables noise.
pub fn synthesize_pilot<F: Scalar, R: Rng + ?Sized>(
    phi: &CMatrix<F>,
    activity: &[u8],
    channel: &[Complex<F>],
    noise_var: F,
    rng: &mut R,
) -> Result<Vec<Complex<F>>> {
    let n = phi.cols();
    if activity.len() != n {
        return Err(Error::mismatch("activity length", n, activity.len()));
    }
    if channel.len() != n {
        return Err(Error::mismatch("channel length", n, channel.len()));
    }
    let zero = Complex::new(F::zero(), F::zero());
    let x: Vec<Complex<F>> = activity
        .iter()
        .zip(channel)
        .map(|(&a, &h)| if a == 1 { h } else { zero })
        .collect();
    let mut y = phi.mul_vec(&x)?;
    if noise_var > F::zero() {
        let s = noise_var.sqrt();
        for v in y.iter_mut() {
            *v += cn01::<F, R>(rng) * s;
        }
    }
    Ok(y)
}

/// Multi-antenna measurement: one column per antenna, each with its own
/// channel and noise, all sharing `activity`.
pub fn synthesize_pilot_mmv<F: Scalar, R: Rng + ?Sized>(
    phi: &CMatrix<F>,
    activity: &[u8],
    channels: &[Vec<Complex<F>>],
    noise_var: F,
    rng: &mut R,
) -> Result<CMatrix<F>> {
    let cols = channels
        .iter()
        .map(|h| synthesize_pilot(phi, activity, h, noise_var, rng))
        .collect::<Result<Vec<_>>>()?;
    CMatrix::from_columns(phi.rows(), &cols)
}

/// `[Re y_1 .. Re y_K, Im y_1 .. Im y_K]`.
pub fn stack_features_smv<F: Scalar>(y: &[Complex<F>]) -> Vec<F> {
    let mut out = Vec::with_capacity(2 * y.len());
    out.extend(y.iter().map(|z| z.re));
    out.extend(y.iter().map(|z| z.im));
    out
}

/// Inverse of [`stack_features_smv`].
pub fn unstack_features_smv<F: Scalar>(x: &[F]) -> Result<Vec<Complex<F>>> {
    if x.len() % 2 != 0 {
        return Err(Error::invalid("feature vector length must be even"));
    }
    let k = x.len() / 2;
    Ok((0..k).map(|i| Complex::new(x[i], x[k + i])).collect())
}

/// Per-antenna stacking, antenna 1 first.
pub fn stack_features_mmv<F: Scalar>(y: &CMatrix<F>) -> Vec<F> {
    let mut out = Vec::with_capacity(2 * y.rows() * y.cols());
    for x in 0..y.cols() {
        out.extend(stack_features_smv(y.column(x)));
    }
    out
}
