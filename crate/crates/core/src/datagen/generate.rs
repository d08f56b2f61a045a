use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{sample_activity, stack_features_mmv};
use crate::channel::{cn01, sample_channel_with, ChannelModel, SampleOptions};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix};
use crate::rng::substream;

/// Distribution of the active set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityModel {
    /// Exactly `n` devices, uniformly chosen.
    FixedN(usize),
    /// `n` uniform on `min..=max`, then a uniform `n`-subset.
    UniformN { min: usize, max: usize },
    /// Independent activity with probability `p`; optionally redrawn until
    /// at least one device is active.
    Bernoulli { p: f64, require_active: bool },
}

impl ActivityModel {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            ActivityModel::FixedN(k) if k > n => {
                Err(Error::invalid(format!("cannot activate {k} of {n} devices")))
            }
            ActivityModel::UniformN { min, max } if min > max || max > n => Err(Error::invalid(
                format!("activity range {min}..={max} is invalid for {n} devices"),
            )),
            ActivityModel::Bernoulli { p, .. } if !(p > 0.0 && p < 1.0) => Err(Error::invalid(
                format!("activity probability must lie in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Expected number of active devices.
    pub fn mean_active(&self, n: usize) -> f64 {
        match *self {
            ActivityModel::FixedN(k) => k as f64,
            ActivityModel::UniformN { min, max } => (min + max) as f64 / 2.0,
            ActivityModel::Bernoulli { p, .. } => p * n as f64,
        }
    }
}

/// How a target SNR maps to channel and noise scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrMode {
    /// Noise variance fixed so that an average device (unit fading power,
    /// reference large-scale gain, mean signature energy) sees the target
    /// SNR per resource.
    #[default]
    Average,
    /// Noise variance set per sample so the realised received energy per
    /// resource per active device is exactly the target.
    PerSample,
    /// Transmit power, pathloss and thermal noise from the channel model;
    /// the target range is ignored and the realised SNR recorded.
    Physical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub samples: usize,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub activity: ActivityModel,
    pub antennas: usize,
    pub snr_mode: SnrMode,
    pub channel: ChannelModel,
    pub noiseless: bool,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            snr_db_min: 0.0,
            snr_db_max: 20.0,
            activity: ActivityModel::UniformN { min: 1, max: 2 },
            antennas: 1,
            snr_mode: SnrMode::Average,
            channel: ChannelModel::Rayleigh,
            noiseless: false,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self, devices: usize) -> Result<()> {
        self.activity.validate(devices)?;
        if self.antennas == 0 {
            return Err(Error::invalid("at least one antenna is required"));
        }
        if !(self.snr_db_min <= self.snr_db_max) {
            return Err(Error::invalid("SNR range is empty"));
        }
        match &self.channel {
            ChannelModel::Rayleigh => Ok(()),
            ChannelModel::Macro(m) => m.validate(),
            ChannelModel::Inf(c) => c.validate(),
        }
    }

    /// Stable 8-byte digest of the configuration and the sensing matrix.
    pub fn hash(&self, phi: &CMatrix<f64>) -> [u8; 8] {
        let mut h = Sha256::new();
        h.update(format!("{self:?}").as_bytes());
        h.update((phi.rows() as u64).to_le_bytes());
        h.update((phi.cols() as u64).to_le_bytes());
        for z in phi.as_col_major() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        let d = h.finalize();
        d[..8].try_into().expect("digest is 32 bytes")
    }
}

/// Linear large-scale gain of a device at the middle of the placement
/// range, without shadowing; the reference for the average SNR mode.
fn reference_gain(model: &ChannelModel) -> Result<f64> {
    let pl = match model {
        ChannelModel::Rayleigh => 0.0,
        ChannelModel::Macro(m) => m.pathloss_db(0.5 * (m.min_distance_km + m.max_distance_km))?,
        ChannelModel::Inf(c) => {
            let s = &c.scenario;
            s.pathloss_nlos_db(s.r3d(0.5 * (s.r2d_min + s.r2d_max)))?
        }
    };
    Ok(10f64.powf(-pl / 10.0))
}

/// One generated sample with signal and noise kept apart.
#[derive(Debug, Clone)]
pub struct SampleParts {
    pub activity: Vec<u8>,
    /// `K x X` noiseless measurement.
    pub signal: CMatrix<f64>,
    /// `K x X` noise.
    pub noise: CMatrix<f64>,
    pub noise_var: f64,
    pub snr_db: f64,
}

impl SampleParts {
    pub fn measurement(&self) -> CMatrix<f64> {
        let data = self
            .signal
            .as_col_major()
            .iter()
            .zip(self.noise.as_col_major())
            .map(|(s, w)| s + w)
            .collect();
        CMatrix::from_col_major(self.signal.rows(), self.signal.cols(), data)
            .expect("same shape")
    }
}

/// Sample `index` of the stream defined by `cfg` (independent of any other
/// index, so generation order does not matter).
pub fn generate_sample(phi: &CMatrix<f64>, cfg: &GenerationConfig, index: u64) -> Result<SampleParts> {
    let (k, n, x) = (phi.rows(), phi.cols(), cfg.antennas);
    let mut rng = substream(cfg.seed, index);
    let activity = sample_activity(n, &cfg.activity, &mut rng)?;
    let target_db = if cfg.snr_db_min == cfg.snr_db_max {
        cfg.snr_db_min
    } else {
        rng.random_range(cfg.snr_db_min..=cfg.snr_db_max)
    };

    let positions: Vec<f64> = (0..n).map(|_| cfg.channel.sample_position(&mut rng)).collect();
    let first = sample_channel_with::<f64>(&cfg.channel, &positions, SampleOptions::default(), &mut rng)?;
    let beta: Vec<f64> = first.iter().map(|d| d.large_scale_gain()).collect();
    let scale: Vec<f64> = match cfg.snr_mode {
        SnrMode::Physical => {
            let noise = cfg.channel.noise_power_w().unwrap_or(1.0);
            let ptx = 10f64.powf((cfg.channel.tx_power_dbm() - 30.0) / 10.0);
            let ptx = if cfg.channel.noise_power_w().is_some() { ptx } else { 1.0 };
            beta.iter().map(|b| (ptx * b / noise).sqrt()).collect()
        }
        _ => {
            let bref = reference_gain(&cfg.channel)?;
            beta.iter().map(|b| (b / bref).sqrt()).collect()
        }
    };

    let mut signal_cols = Vec::with_capacity(x);
    for ant in 0..x {
        let h: Vec<Complex64> = (0..n)
            .map(|i| {
                let small = if ant == 0 { first[i].small_scale } else { cn01(&mut rng) };
                if activity[i] == 1 {
                    small * scale[i]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        signal_cols.push(phi.mul_vec(&h)?);
    }
    let signal = CMatrix::from_columns(k, &signal_cols)?;

    let active = activity.iter().filter(|&&a| a == 1).count();
    let signal_energy: f64 = signal_cols.iter().map(|c| norm_sqr(c)).sum();
    let per_device = |e: f64| e / (x * active.max(1) * k) as f64;
    let mean_col_energy = (0..n).map(|i| norm_sqr(phi.column(i))).sum::<f64>() / n as f64;
    let target = 10f64.powf(target_db / 10.0);
    let average_var = mean_col_energy / (k as f64 * target);
    let (noise_var, snr_db) = match cfg.snr_mode {
        SnrMode::Average => (average_var, target_db),
        SnrMode::PerSample => {
            if active > 0 && signal_energy > 0.0 {
                (per_device(signal_energy) / target, target_db)
            } else {
                (average_var, target_db)
            }
        }
        SnrMode::Physical => {
            let snr = if active > 0 {
                10.0 * per_device(signal_energy).log10()
            } else {
                f64::NEG_INFINITY
            };
            (1.0, snr)
        }
    };

    let mut noise = CMatrix::zeros(k, x);
    if !cfg.noiseless {
        let s = noise_var.sqrt();
        for ant in 0..x {
            for v in noise.column_mut(ant) {
                *v = cn01::<f64, _>(&mut rng) * s;
            }
        }
    }
    Ok(SampleParts {
        activity,
        signal,
        noise,
        noise_var: if cfg.noiseless { 0.0 } else { noise_var },
        snr_db,
    })
}

/// Feature/label arrays for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: usize,
    pub feature_len: usize,
    pub devices: usize,
    pub antennas: usize,
    /// Sample-major `samples x feature_len`.
    pub features: Vec<f32>,
    /// Sample-major `samples x devices` activity bits.
    pub labels: Vec<u8>,
    pub snr_db: Vec<f32>,
    pub config_hash: [u8; 8],
}

impl Dataset {
    pub fn features_of(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_len..(i + 1) * self.feature_len]
    }

    pub fn labels_of(&self, i: usize) -> &[u8] {
        &self.labels[i * self.devices..(i + 1) * self.devices]
    }

    /// Resource count `K`.
    pub fn resources(&self) -> usize {
        self.feature_len / (2 * self.antennas)
    }

    pub fn is_mmv(&self) -> bool {
        self.antennas > 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.samples * self.feature_len {
            return Err(Error::mismatch("feature array", self.samples * self.feature_len, self.features.len()));
        }
        if self.labels.len() != self.samples * self.devices {
            return Err(Error::mismatch("label array", self.samples * self.devices, self.labels.len()));
        }
        if self.snr_db.len() != self.samples {
            return Err(Error::mismatch("snr array", self.samples, self.snr_db.len()));
        }
        if self.antennas == 0 || self.feature_len % (2 * self.antennas) != 0 {
            return Err(Error::invalid("feature length is not 2*K*X"));
        }
        Ok(())
    }

    /// Samples at the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.feature_len);
        let mut labels = Vec::with_capacity(idx.len() * self.devices);
        let mut snr_db = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.features_of(i));
            labels.extend_from_slice(self.labels_of(i));
            snr_db.push(self.snr_db[i]);
        }
        Dataset {
            samples: idx.len(),
            feature_len: self.feature_len,
            devices: self.devices,
            antennas: self.antennas,
            features,
            labels,
            snr_db,
            config_hash: self.config_hash,
        }
    }

    /// First `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.samples);
        let a: Vec<usize> = (0..n).collect();
        let b: Vec<usize> = (n..self.samples).collect();
        (self.subset(&a), self.subset(&b))
    }
}

const CHUNK: usize = 1024;

/// Generate `cfg.samples` labelled samples for sensing matrix `phi`.
pub fn generate_dataset(phi: &CMatrix<f64>, cfg: &GenerationConfig) -> Result<Dataset> {
    cfg.validate(phi.cols())?;
    let (k, n, x) = (phi.rows(), phi.cols(), cfg.antennas);
    let feature_len = 2 * k * x;
    let chunks = cfg.samples.div_ceil(CHUNK);
    let parts: Vec<(Vec<f32>, Vec<u8>, Vec<f32>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.samples);
            let mut f = Vec::with_capacity((hi - lo) * feature_len);
            let mut l = Vec::with_capacity((hi - lo) * n);
            let mut s = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let p = generate_sample(phi, cfg, i as u64)?;
                f.extend(stack_features_mmv(&p.measurement()).into_iter().map(|v| v as f32));
                l.extend_from_slice(&p.activity);
                s.push(p.snr_db as f32);
            }
            Ok((f, l, s))
        })
        .collect::<Result<_>>()?;
    let mut features = Vec::with_capacity(cfg.samples * feature_len);
    let mut labels = Vec::with_capacity(cfg.samples * n);
    let mut snr_db = Vec::with_capacity(cfg.samples);
    for (f, l, s) in parts {
        features.extend(f);
        labels.extend(l);
        snr_db.extend(s);
    }
    Ok(Dataset {
        samples: cfg.samples,
        feature_len,
        devices: n,
        antennas: x,
        features,
        labels,
        snr_db,
        config_hash: cfg.hash(phi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{select_musa_sequences, CodeSet};

    fn musa_phi() -> CMatrix<f64> {
        CodeSet::Musa(select_musa_sequences(14, 21, 0.6, 1).unwrap()).signatures(0)
    }

    #[test]
    fn fixed_sparsity_labels_and_balance() {
        let phi = musa_phi();
        let cfg = GenerationConfig {
            samples: 21_000,
            activity: ActivityModel::FixedN(2),
            ..Default::default()
        };
        let d = generate_dataset(&phi, &cfg).unwrap();
        d.validate().unwrap();
        assert_eq!(d.feature_len, 28);
        let mut per_device = vec![0usize; 21];
        for i in 0..d.samples {
            let l = d.labels_of(i);
            assert_eq!(l.iter().filter(|&&b| b == 1).count(), 2);
            for (j, &b) in l.iter().enumerate() {
                per_device[j] += b as usize;
            }
        }
        let expect = 21_000.0 * 2.0 / 21.0;
        for c in per_device {
            assert!((c as f64 - expect).abs() <= 0.05 * expect, "{c} vs {expect}");
        }
    }

    #[test]
    fn deterministic_and_order_free() {
        let phi = musa_phi();
        let cfg = GenerationConfig {
            samples: 3000,
            antennas: 2,
            seed: 4,
            ..Default::default()
        };
        let a = generate_dataset(&phi, &cfg).unwrap();
        let b = generate_dataset(&phi, &cfg).unwrap();
        assert_eq!(a, b);
        // sample 2500 regenerated alone matches
        let p = generate_sample(&phi, &cfg, 2500).unwrap();
        let f: Vec<f32> = stack_features_mmv(&p.measurement()).into_iter().map(|v| v as f32).collect();
        assert_eq!(&f[..], a.features_of(2500));
        assert_eq!(a.feature_len, 2 * 14 * 2);
    }

    #[test]
    fn noiseless_reconstruction() {
        let phi = musa_phi();
        let cfg = GenerationConfig {
            noiseless: true,
            antennas: 3,
            ..Default::default()
        };
        for idx in 0..50 {
            let p = generate_sample(&phi, &cfg, idx).unwrap();
            let y = p.measurement();
            assert_eq!(y, p.signal);
            assert!(p.noise.as_col_major().iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn per_sample_mode_hits_target_snr() {
        let phi = musa_phi();
        for target in [0.0, 10.0, 20.0] {
            let cfg = GenerationConfig {
                snr_db_min: target,
                snr_db_max: target,
                snr_mode: SnrMode::PerSample,
                ..Default::default()
            };
            let (mut sig, mut noi) = (0.0, 0.0);
            for i in 0..10_000 {
                let p = generate_sample(&phi, &cfg, i).unwrap();
                let active = p.activity.iter().filter(|&&a| a == 1).count() as f64;
                sig += norm_sqr(p.signal.as_col_major()) / active;
                noi += norm_sqr(p.noise.as_col_major());
            }
            let emp = 10.0 * (sig / noi).log10();
            assert!((emp - target).abs() < 0.2, "target {target}, empirical {emp}");
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let phi = musa_phi();
        let cfg = GenerationConfig {
            activity: ActivityModel::FixedN(30),
            ..Default::default()
        };
        assert!(generate_dataset(&phi, &cfg).is_err());
        let cfg = GenerationConfig {
            snr_db_min: 5.0,
            snr_db_max: 1.0,
            ..Default::default()
        };
        assert!(generate_dataset(&phi, &cfg).is_err());
    }

    #[test]
    fn physical_mode_records_realised_snr() {
        use crate::channel::{InfChannelConfig, InfKind};
        let phi = musa_phi();
        let cfg = GenerationConfig {
            snr_mode: SnrMode::Physical,
            channel: ChannelModel::Inf(InfChannelConfig::new(InfKind::Dh)),
            activity: ActivityModel::FixedN(1),
            ..Default::default()
        };
        let p = generate_sample(&phi, &cfg, 0).unwrap();
        let e = norm_sqr(p.signal.as_col_major()) / 14.0;
        assert!((p.snr_db - 10.0 * e.log10()).abs() < 1e-9);
        assert_eq!(p.noise_var, 1.0);
    }
}
