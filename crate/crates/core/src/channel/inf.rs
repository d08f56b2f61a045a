use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_positive, noise_power_w};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Indoor-factory scenario: sparse/dense clutter, low/high base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfKind {
    Sl,
    Dl,
    Sh,
    Dh,
}

impl InfKind {
    pub const ALL: [InfKind; 4] = [InfKind::Sl, InfKind::Dl, InfKind::Sh, InfKind::Dh];

    pub fn name(self) -> &'static str {
        match self {
            InfKind::Sl => "InF-SL",
            InfKind::Dl => "InF-DL",
            InfKind::Sh => "InF-SH",
            InfKind::Dh => "InF-DH",
        }
    }

    fn high_bs(self) -> bool {
        matches!(self, InfKind::Sh | InfKind::Dh)
    }
}

impl std::str::FromStr for InfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("inf-").unwrap_or(&t);
        match t {
            "sl" => Ok(InfKind::Sl),
            "dl" => Ok(InfKind::Dl),
            "sh" => Ok(InfKind::Sh),
            "dh" => Ok(InfKind::Dh),
            _ => Err(Error::invalid(format!("unknown indoor-factory scenario '{s}'"))),
        }
    }
}

/// How shadowing enters the NLOS max rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShadowingRule {
    /// Max over the deterministic pathlosses, then one shadowing term with
    /// the deviation of the larger branch.
    #[default]
    WinningBranch,
    /// Each branch carries its own shadowing draw before the max.
    PerBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfScenario {
    pub kind: InfKind,
    pub h_bs: f64,
    pub h_mtd: f64,
    pub clutter_density: f64,
    pub clutter_height: f64,
    pub clutter_size: f64,
    pub r2d_min: f64,
    pub r2d_max: f64,
    pub nlos_a: f64,
    pub nlos_b: f64,
    pub sigma_los: f64,
    pub sigma_nlos: f64,
    pub fc_ghz: f64,
    pub shadowing_rule: ShadowingRule,
}

impl InfScenario {
    pub fn new(kind: InfKind) -> Self {
        let (h_bs, density, hc, rc, rmin, rmax, a, b, snlos) = match kind {
            InfKind::Sl => (1.5, 0.2, 2.0, 10.0, 25.0, 200.0, 33.00, 25.5, 5.7),
            InfKind::Dl => (1.5, 0.6, 6.0, 2.0, 18.0, 108.0, 18.6, 35.7, 7.2),
            InfKind::Sh => (8.0, 0.2, 2.0, 10.0, 40.0, 488.0, 32.4, 23.0, 5.9),
            InfKind::Dh => (8.0, 0.6, 6.0, 2.0, 24.0, 420.0, 33.63, 21.9, 4.0),
        };
        Self {
            kind,
            h_bs,
            h_mtd: 1.5,
            clutter_density: density,
            clutter_height: hc,
            clutter_size: rc,
            r2d_min: rmin,
            r2d_max: rmax,
            nlos_a: a,
            nlos_b: b,
            sigma_los: 4.3,
            sigma_nlos: snlos,
            fc_ghz: 28.0,
            shadowing_rule: ShadowingRule::WinningBranch,
        }
    }

    pub fn r3d(&self, r2d: f64) -> f64 {
        let dh = self.h_bs - self.h_mtd;
        (r2d * r2d + dh * dh).sqrt()
    }

    /// LOS decay length `k_s`.
    pub fn decay_length(&self) -> Result<f64> {
        let s = self.clutter_density;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid(format!(
                "clutter density must lie strictly between 0 and 1, got {s}"
            )));
        }
        let base = -self.clutter_size / (1.0 - s).ln();
        if self.kind.high_bs() {
            Ok(base * (self.h_bs - self.h_mtd) / (self.clutter_height - self.h_mtd))
        } else {
            Ok(base)
        }
    }

    pub fn los_probability(&self, r2d: f64) -> Result<f64> {
        if !(r2d >= 0.0) {
            return Err(Error::invalid(format!("2D distance must be non-negative, got {r2d}")));
        }
        Ok((-r2d / self.decay_length()?).exp())
    }

    fn check_r3d(r3d: f64) -> Result<()> {
        if !(1.0..=600.0).contains(&r3d) {
            return Err(Error::invalid(format!("3D distance {r3d} m outside [1, 600]")));
        }
        Ok(())
    }

    /// Deterministic LOS pathloss.
    pub fn pathloss_los_db(&self, r3d: f64) -> Result<f64> {
        Self::check_r3d(r3d)?;
        Ok(31.84 + 21.5 * r3d.log10() + 19.0 * self.fc_ghz.log10())
    }

    /// Deterministic NLOS candidate before the max rule.
    pub fn pathloss_nlos_candidate_db(&self, r3d: f64) -> Result<f64> {
        Self::check_r3d(r3d)?;
        Ok(self.nlos_a + self.nlos_b * r3d.log10() + 20.0 * self.fc_ghz.log10())
    }

    /// Deterministic NLOS pathloss `max(PL_LOS, PL)`.
    pub fn pathloss_nlos_db(&self, r3d: f64) -> Result<f64> {
        Ok(self.pathloss_los_db(r3d)?.max(self.pathloss_nlos_candidate_db(r3d)?))
    }

    /// Deterministic part and shadowing term of one pathloss draw.
    pub(crate) fn pathloss_components<R: Rng + ?Sized>(
        &self,
        r3d: f64,
        los: bool,
        shadowing: bool,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let pl_los = self.pathloss_los_db(r3d)?;
        let mut chi = |sigma: f64| {
            if shadowing {
                sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        if los {
            return Ok((pl_los, chi(self.sigma_los)));
        }
        let pl = self.pathloss_nlos_candidate_db(r3d)?;
        match self.shadowing_rule {
            ShadowingRule::WinningBranch => {
                if pl >= pl_los {
                    Ok((pl, chi(self.sigma_nlos)))
                } else {
                    Ok((pl_los, chi(self.sigma_los)))
                }
            }
            ShadowingRule::PerBranch => {
                let a = pl_los + chi(self.sigma_los);
                let b = pl + chi(self.sigma_nlos);
                let mean = pl.max(pl_los);
                Ok((mean, a.max(b) - mean))
            }
        }
    }

    pub fn sample_r2d<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.r2d_min..=self.r2d_max)
    }
}

/// LOS probability `exp(-r2D / k_s)`.
pub fn inf_los_probability(scenario: &InfScenario, r2d: f64) -> Result<f64> {
    scenario.los_probability(r2d)
}

/// Pathloss draw in dB at 3D distance `r3d` for the given LOS state.
pub fn inf_pathloss_db(scenario: &InfScenario, r3d: f64, los: bool, shadowing: bool, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let (mean, chi) = scenario.pathloss_components(r3d, los, shadowing, &mut rng)?;
    Ok(mean + chi)
}

/// Indoor-factory link budget.
#[derive(Debug, Clone, PartialEq)]
pub struct InfChannelConfig {
    pub scenario: InfScenario,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_dbm: f64,
}

impl InfChannelConfig {
    pub fn new(kind: InfKind) -> Self {
        Self {
            scenario: InfScenario::new(kind),
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 100e6,
            noise_figure_db: 4.0,
            tx_power_dbm: 23.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("bandwidth", self.bandwidth_hz)?;
        self.scenario.decay_length()?;
        let s = &self.scenario;
        if s.r2d_min < 0.0 || s.r2d_max < s.r2d_min {
            return Err(Error::invalid("invalid 2D distance range"));
        }
        InfScenario::check_r3d(s.r3d(s.r2d_min))?;
        InfScenario::check_r3d(s.r3d(s.r2d_max))
    }

    pub fn noise_power_w(&self) -> f64 {
        noise_power_w(self.noise_psd_dbm_hz, self.bandwidth_hz, self.noise_figure_db)
    }
}
