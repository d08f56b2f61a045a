use rand::Rng;

use super::{check_positive, noise_power_w};
use crate::error::{Error, Result};

/// Macro-cell link budget.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroChannelConfig {
    pub shadowing_std_db: f64,
    /// Pathloss `intercept + slope * log10(r [km])`.
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    /// Devices are dropped uniformly over the annulus between these radii.
    pub min_distance_km: f64,
    pub max_distance_km: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_dbm: f64,
}

impl Default for MacroChannelConfig {
    fn default() -> Self {
        Self {
            shadowing_std_db: 8.0,
            pathloss_intercept_db: 128.1,
            pathloss_slope_db: 37.6,
            min_distance_km: 0.05,
            max_distance_km: 0.5,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 1e6,
            noise_figure_db: 4.0,
            tx_power_dbm: 23.0,
        }
    }
}

/// `128.1 + 37.6 log10(r)` with `r` in kilometres.
pub fn macro_pathloss_db(r_km: f64) -> Result<f64> {
    MacroChannelConfig::default().pathloss_db(r_km)
}

impl MacroChannelConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("bandwidth", self.bandwidth_hz)?;
        check_positive("minimum distance", self.min_distance_km)?;
        if self.max_distance_km < self.min_distance_km {
            return Err(Error::invalid("maximum distance is below the minimum"));
        }
        if self.shadowing_std_db < 0.0 {
            return Err(Error::invalid("shadowing deviation must be non-negative"));
        }
        Ok(())
    }

    pub fn pathloss_db(&self, r_km: f64) -> Result<f64> {
        check_positive("distance", r_km)?;
        Ok(self.pathloss_intercept_db + self.pathloss_slope_db * r_km.log10())
    }

    pub fn noise_power_w(&self) -> f64 {
        noise_power_w(self.noise_psd_dbm_hz, self.bandwidth_hz, self.noise_figure_db)
    }

    /// Uniform drop over the annulus (density proportional to `r`).
    pub fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b) = (self.min_distance_km, self.max_distance_km);
        let u: f64 = rng.random();
        (a * a + u * (b * b - a * a)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pathloss_reference_points() {
        assert!((macro_pathloss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((macro_pathloss_db(0.1).unwrap() - 90.5).abs() < 1e-12);
        assert!(macro_pathloss_db(0.3).unwrap() > macro_pathloss_db(0.2).unwrap());
        assert!(macro_pathloss_db(0.0).is_err());
        assert!(macro_pathloss_db(-1.0).is_err());
    }

    #[test]
    fn distances_stay_in_annulus() {
        let cfg = MacroChannelConfig::default();
        let mut rng = crate::rng::seeded(4);
        for _ in 0..1000 {
            let r = cfg.sample_distance(&mut rng);
            assert!((cfg.min_distance_km..=cfg.max_distance_km).contains(&r));
        }
    }
}
