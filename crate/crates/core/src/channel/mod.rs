//! Channel coefficients and noise: Rayleigh fading, the macro-cell
//! pathloss/shadowing model and the indoor-factory mmWave scenarios.

mod inf;
mod macro_cell;

pub use inf::{inf_los_probability, inf_pathloss_db, InfChannelConfig, InfKind, InfScenario, ShadowingRule};
pub use macro_cell::{macro_pathloss_db, MacroChannelConfig};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};
use crate::scalar::Scalar;

/// Thermal noise power in watts over `bandwidth_hz` with the given noise
/// spectral density (dBm/Hz) and noise figure (dB).
pub fn noise_power_w(noise_psd_dbm_hz: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    10f64.powf((noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db - 30.0) / 10.0)
}

/// One circularly-symmetric complex Gaussian draw with unit variance.
pub fn cn01<F: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<F> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(F::lit(re * s), F::lit(im * s))
}

/// `count` i.i.d. `CN(0, 1)` small-scale fading coefficients.
pub fn sample_small_scale<F: Scalar>(count: usize, seed: u64) -> Vec<Complex<F>> {
    let mut rng = seeded(seed);
    (0..count).map(|_| cn01(&mut rng)).collect()
}

/// Propagation model for the device-to-base-station links.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Unit large-scale gain, `CN(0, 1)` fading.
    Rayleigh,
    Macro(MacroChannelConfig),
    Inf(InfChannelConfig),
}

impl ChannelModel {
    /// Draw a device distance (km for the macro cell, metres of 2D distance
    /// for the indoor factory; zero for Rayleigh).
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ChannelModel::Rayleigh => 0.0,
            ChannelModel::Macro(m) => m.sample_distance(rng),
            ChannelModel::Inf(c) => c.scenario.sample_r2d(rng),
        }
    }

    /// Linear noise power in watts, `None` for the normalised Rayleigh model.
    pub fn noise_power_w(&self) -> Option<f64> {
        match self {
            ChannelModel::Rayleigh => None,
            ChannelModel::Macro(m) => Some(m.noise_power_w()),
            ChannelModel::Inf(c) => Some(c.noise_power_w()),
        }
    }

    pub fn tx_power_dbm(&self) -> f64 {
        match self {
            ChannelModel::Rayleigh => 0.0,
            ChannelModel::Macro(m) => m.tx_power_dbm,
            ChannelModel::Inf(c) => c.tx_power_dbm,
        }
    }
}

/// Switches used mainly by tests and probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    pub shadowing: bool,
    /// Replace the small-scale coefficient by `1`.
    pub unit_small_scale: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            shadowing: true,
            unit_small_scale: false,
        }
    }
}

/// Channel of one device, `g = sqrt(beta) * h_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw<F> {
    pub coefficient: Complex<F>,
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    pub small_scale: Complex<F>,
    /// Line-of-sight state, indoor factory only.
    pub los: Option<bool>,
}

impl<F: Scalar> ChannelDraw<F> {
    /// Linear large-scale gain `beta = 10^(-(PL + X) / 10)`.
    pub fn large_scale_gain(&self) -> f64 {
        10f64.powf(-(self.pathloss_db + self.shadowing_db) / 10.0)
    }
}

/// Sample per-device channels at the given positions.
pub fn sample_channel<F: Scalar>(
    model: &ChannelModel,
    positions: &[f64],
    seed: u64,
) -> Result<Vec<ChannelDraw<F>>> {
    let mut rng = seeded(seed);
    sample_channel_with(model, positions, SampleOptions::default(), &mut rng)
}

pub fn sample_channel_with<F: Scalar>(
    model: &ChannelModel,
    positions: &[f64],
    opts: SampleOptions,
    rng: &mut SimRng,
) -> Result<Vec<ChannelDraw<F>>> {
    positions
        .iter()
        .map(|&pos| sample_one(model, pos, opts, rng))
        .collect()
}

fn sample_one<F: Scalar>(
    model: &ChannelModel,
    pos: f64,
    opts: SampleOptions,
    rng: &mut SimRng,
) -> Result<ChannelDraw<F>> {
    let (pathloss_db, shadowing_db, los) = match model {
        ChannelModel::Rayleigh => (0.0, 0.0, None),
        ChannelModel::Macro(m) => {
            let pl = m.pathloss_db(pos)?;
            let sh = if opts.shadowing {
                m.shadowing_std_db * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            (pl, sh, None)
        }
        ChannelModel::Inf(c) => {
            let s = &c.scenario;
            let los = rng.random::<f64>() < s.los_probability(pos)?;
            let r3d = s.r3d(pos);
            let (mean, sh) = s.pathloss_components(r3d, los, opts.shadowing, rng)?;
            (mean, sh, Some(los))
        }
    };
    let small_scale = if opts.unit_small_scale {
        Complex::new(F::one(), F::zero())
    } else {
        cn01(rng)
    };
    let amp = F::lit(10f64.powf(-(pathloss_db + shadowing_db) / 20.0));
    Ok(ChannelDraw {
        coefficient: small_scale * amp,
        pathloss_db,
        shadowing_db,
        small_scale,
        los,
    })
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scale_moments() {
        let h: Vec<Complex<f64>> = sample_small_scale(1_000_000, 5);
        let n = h.len() as f64;
        let mean: Complex<f64> = h.iter().sum::<Complex<f64>>() / n;
        let var = h.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n;
        assert!(mean.norm() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn small_scale_components_are_gaussian() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let h: Vec<Complex<f64>> = sample_small_scale(100_000, 9);
        let norm = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
        for part in [0, 1] {
            let mut x: Vec<f64> = h.iter().map(|z| if part == 0 { z.re } else { z.im }).collect();
            x.sort_by(f64::total_cmp);
            let n = x.len() as f64;
            let d = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let f = norm.cdf(v);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            // Kolmogorov tail: p = 2 exp(-2 n d^2) approximately
            let p = 2.0 * (-2.0 * n * d * d).exp();
            assert!(p > 0.001, "KS statistic {d}, p ~ {p}");
        }
    }

    #[test]
    fn noise_power_hand_computation() {
        // -174 dBm/Hz + 60 dB + 4 dB = -110 dBm = 1e-14 W
        let p = noise_power_w(-174.0, 1e6, 4.0);
        assert!((p / 1e-14 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_small_scale_gives_pathloss_amplitude() {
        let model = ChannelModel::Macro(MacroChannelConfig::default());
        let mut rng = seeded(1);
        let opts = SampleOptions {
            shadowing: false,
            unit_small_scale: true,
        };
        let d: Vec<ChannelDraw<f64>> = sample_channel_with(&model, &[0.1, 0.3], opts, &mut rng).unwrap();
        for (draw, r) in d.iter().zip([0.1, 0.3]) {
            let gain = 10f64.powf(-macro_pathloss_db(r).unwrap() / 10.0);
            assert!((draw.coefficient.norm() / gain.sqrt() - 1.0).abs() < 1e-12);
            assert!((draw.coefficient.norm_sqr() / draw.large_scale_gain() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let model = ChannelModel::Inf(InfChannelConfig::new(InfKind::Dh));
        let pos = [30.0, 100.0, 300.0];
        let a: Vec<ChannelDraw<f64>> = sample_channel(&model, &pos, 3).unwrap();
        let b: Vec<ChannelDraw<f64>> = sample_channel(&model, &pos, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_decomposition_holds() {
        let model = ChannelModel::Inf(InfChannelConfig::new(InfKind::Sl));
        let d: Vec<ChannelDraw<f64>> = sample_channel(&model, &[50.0; 20], 8).unwrap();
        for x in d {
            let expect = x.large_scale_gain() * x.small_scale.norm_sqr();
            assert!((x.coefficient.norm_sqr() / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_los_fraction() {
        let cfg = InfChannelConfig::new(InfKind::Sl);
        let model = ChannelModel::Inf(cfg.clone());
        let r2d = 44.8;
        let n = 100_000;
        let d: Vec<ChannelDraw<f32>> = sample_channel(&model, &vec![r2d; n], 21).unwrap();
        let frac = d.iter().filter(|x| x.los == Some(true)).count() as f64 / n as f64;
        let p = cfg.scenario.los_probability(r2d).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() <= 3.0 * se, "{frac} vs {p}");
    }
}
