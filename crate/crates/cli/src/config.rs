//! Experiment configuration: TOML file, named presets and `--set` overrides.
//!
//! Resolution order, lowest first: built-in defaults, the named preset, the
//! config file, then each `--set key=value` in command-line order.

use std::fmt;
use std::path::{Path, PathBuf};

use mudsim::channel::{ChannelModel, InfChannelConfig, InfKind, MacroChannelConfig};
use mudsim::datagen::{ActivityModel, GenerationConfig, SnrMode};
use mudsim::neural::{AdamConfig, Layout, NetworkConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

/// A problem with the configuration or the command line (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Shorthand for returning a [`ConfigError`] through `anyhow`.
pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Scma,
    Musa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    /// Resources `K`.
    pub resources: usize,
    /// Devices `N`.
    pub devices: usize,
    /// SCMA non-zero dimensions per codeword `U`.
    pub dims: usize,
    /// SCMA constellation size `R`.
    pub points: usize,
    /// MUSA cross-correlation cap.
    pub rho: f64,
    /// Receive antennas `X`; more than one selects the MMV model.
    pub antennas: usize,
    /// SCMA codeword index used as the pilot.
    pub pilot_symbol: usize,
    pub seed: u64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            kind: SchemeKind::Musa,
            resources: 14,
            devices: 21,
            dims: 3,
            points: 4,
            rho: 0.6,
            antennas: 1,
            pilot_symbol: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// `rayleigh`, `macro`, or an indoor-factory kind `inf-sl|inf-dl|inf-sh|inf-dh`.
    pub model: String,
    /// `average`, `per-sample` or `physical`.
    pub snr_mode: String,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            model: "rayleigh".into(),
            snr_mode: "average".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub blocks: usize,
    pub width: usize,
    /// `uniform` (every layer `width`), `table` (published widths for the
    /// scheme, overloading and antenna count) or `custom` (`widths`).
    pub layout: String,
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            blocks: 4,
            width: 128,
            layout: "uniform".into(),
            widths: Vec::new(),
            dropout: 0.5,
            l2: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub samples: usize,
    pub validation_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub snr_min: f64,
    pub snr_max: f64,
    /// `fixed:n`, `uniform:min:max` or `bernoulli:p`.
    pub activity: String,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            samples: 200_000,
            validation_samples: 10_000,
            epochs: 50,
            batch_size: 1000,
            learning_rate: 1e-3,
            snr_min: 0.0,
            snr_max: 20.0,
            activity: "uniform:1:2".into(),
            seed: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `snr` or `activity`.
    pub variable: String,
    /// SNR values in dB, or active-device counts.
    pub grid: Vec<f64>,
    /// SNR held fixed during an activity sweep and used by `eval`.
    pub snr: f64,
    /// Activity held fixed during an SNR sweep and used by `eval`.
    pub activity: String,
    pub samples: usize,
    /// Any of `dnn`, `stomp`, `stomp-blind`, `ls-bomp`.
    pub algorithms: Vec<String>,
    pub seed: u64,
    /// Worker threads for grid points; 0 uses every core.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: "snr".into(),
            grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            snr: 20.0,
            activity: "uniform:1:2".into(),
            samples: 10_000,
            algorithms: vec!["dnn".into(), "stomp".into(), "ls-bomp".into()],
            seed: 700,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub output: PathBuf,
    pub scheme: SchemeSection,
    pub channel: ChannelSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            output: PathBuf::from("out"),
            scheme: SchemeSection::default(),
            channel: ChannelSection::default(),
            network: NetworkSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Table for a named preset: `scma-150`, `scma-300`, `musa-150` or
/// `musa-300`, optionally suffixed `-x2` or `-x4` for multiple antennas.
pub fn preset_table(name: &str) -> anyhow::Result<Table> {
    let lower = name.trim().to_ascii_lowercase();
    let (base, antennas) = match lower.rsplit_once("-x") {
        Some((b, x)) if x.chars().all(|c| c.is_ascii_digit()) && !x.is_empty() => {
            (b.to_string(), x.parse::<usize>().unwrap())
        }
        _ => (lower.clone(), 1),
    };
    if ![1, 2, 4].contains(&antennas) {
        return Err(config_err(format!("preset '{name}': antenna count must be 1, 2 or 4")));
    }
    // A regular factor graph needs K | N U, so K=60 takes U=2.
    let (kind, k, n, u) = match base.as_str() {
        "scma-150" => ("scma", 60, 90, 2),
        "scma-300" => ("scma", 30, 90, 3),
        "musa-150" => ("musa", 14, 21, 3),
        "musa-300" => ("musa", 7, 21, 3),
        _ => {
            return Err(config_err(format!(
                "unknown preset '{name}' (expected scma-150, scma-300, musa-150 or musa-300, optionally with -x2/-x4)"
            )))
        }
    };
    let text = format!(
        "[scheme]\nkind = \"{kind}\"\nresources = {k}\ndevices = {n}\ndims = {u}\nantennas = {antennas}\n"
    );
    Ok(text.parse::<Table>().expect("preset table is valid TOML"))
}

/// Published residual-unit widths for a scheme, overloading ratio and
/// antenna count.
pub fn table_widths(kind: SchemeKind, k: usize, n: usize, antennas: usize) -> Option<[usize; 4]> {
    let ratio = (100 * n).checked_div(k)?;
    let x = match antennas {
        1 => 0,
        2 => 1,
        4 => 2,
        _ => return None,
    };
    let w = match (kind, ratio) {
        (SchemeKind::Scma, 150) => [[960, 480, 240, 120], [1920, 960, 480, 240], [3840, 1920, 960, 480]][x],
        (SchemeKind::Scma, 300) => [[480, 240, 120, 60], [960, 480, 240, 120], [1920, 960, 480, 240]][x],
        (SchemeKind::Musa, 150) => [[512, 256, 128, 28], [512, 256, 128, 56], [512, 256, 128, 112]][x],
        (SchemeKind::Musa, 300) => [[512, 256, 128, 14], [512, 256, 128, 28], [512, 256, 128, 56]][x],
        _ => return None,
    };
    Some(w)
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Apply `section.key=value` to a TOML table. The value is read as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("override key '{path}' is malformed")));
    }
    let mut t = table;
    for k in &keys[..keys.len() - 1] {
        let entry = t.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override '{path}': '{k}' is not a section")))?;
    }
    t.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Resolve the configuration from an optional file, an optional preset
    /// name (which wins over the file's `preset` key) and overrides.
    pub fn load(path: Option<&Path>, preset: Option<&str>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut user = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| config_err(format!("config {}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        if let Some(p) = preset {
            user.insert("preset".into(), Value::String(p.into()));
        }
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        let mut table = match user.get("preset") {
            Some(Value::String(name)) => preset_table(name)?,
            Some(_) => return Err(config_err("preset must be a string")),
            None => Table::new(),
        };
        merge(&mut table, user);
        let cfg: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let s = &self.scheme;
        if s.resources == 0 || s.devices == 0 {
            return Err(config_err("scheme.resources and scheme.devices must be positive"));
        }
        if s.antennas == 0 {
            return Err(config_err("scheme.antennas must be at least 1"));
        }
        if s.kind == SchemeKind::Musa && !(s.rho > 0.0 && s.rho <= 1.0) {
            return Err(config_err("scheme.rho must lie in (0, 1]"));
        }
        if let Some(p) = &self.preset {
            let expect: ExperimentConfig = Value::Table(preset_table(p)?).try_into().expect("preset deserialises");
            let e = &expect.scheme;
            if (e.kind, e.resources, e.devices) != (s.kind, s.resources, s.devices) {
                return Err(config_err(format!(
                    "preset '{p}' fixes {:?} K={} N={}, but the config sets {:?} K={} N={}",
                    e.kind, e.resources, e.devices, s.kind, s.resources, s.devices
                )));
            }
        }
        self.channel_model()?;
        self.snr_mode()?;
        parse_activity(&self.train.activity)?;
        parse_activity(&self.sweep.activity)?;
        self.network_config()?;
        if self.train.samples == 0 || self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(config_err("train.samples, train.epochs and train.batch_size must be positive"));
        }
        if !(self.train.snr_min <= self.train.snr_max) {
            return Err(config_err("train.snr_min exceeds train.snr_max"));
        }
        if self.sweep.samples == 0 {
            return Err(config_err("sweep.samples must be positive"));
        }
        if !matches!(self.sweep.variable.as_str(), "snr" | "activity") {
            return Err(config_err(format!("sweep.variable must be 'snr' or 'activity', got '{}'", self.sweep.variable)));
        }
        if self.sweep.grid.is_empty() {
            return Err(config_err("sweep.grid is empty"));
        }
        if self.sweep.variable == "activity" {
            for &v in &self.sweep.grid {
                if v.fract() != 0.0 || v < 1.0 || v > s.devices as f64 {
                    return Err(config_err(format!("activity grid value {v} is not a device count in 1..={}", s.devices)));
                }
            }
        }
        for a in &self.sweep.algorithms {
            Algorithm::parse(a)?;
        }
        Ok(())
    }

    pub fn channel_model(&self) -> anyhow::Result<ChannelModel> {
        match self.channel.model.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(ChannelModel::Rayleigh),
            "macro" => Ok(ChannelModel::Macro(MacroChannelConfig::default())),
            other if other.starts_with("inf") => {
                let kind: InfKind = other
                    .parse()
                    .map_err(|_| config_err(format!("unknown channel model '{}'", self.channel.model)))?;
                Ok(ChannelModel::Inf(InfChannelConfig::new(kind)))
            }
            _ => Err(config_err(format!(
                "unknown channel model '{}' (expected rayleigh, macro or inf-sl/dl/sh/dh)",
                self.channel.model
            ))),
        }
    }

    pub fn snr_mode(&self) -> anyhow::Result<SnrMode> {
        match self.channel.snr_mode.as_str() {
            "average" => Ok(SnrMode::Average),
            "per-sample" => Ok(SnrMode::PerSample),
            "physical" => Ok(SnrMode::Physical),
            m => Err(config_err(format!("unknown snr_mode '{m}' (expected average, per-sample or physical)"))),
        }
    }

    pub fn feature_len(&self) -> usize {
        2 * self.scheme.resources * self.scheme.antennas
    }

    pub fn network_config(&self) -> anyhow::Result<NetworkConfig> {
        let n = &self.network;
        let s = &self.scheme;
        let layout = match n.layout.as_str() {
            "uniform" => Layout::Uniform(n.width),
            "table" => Layout::Tapered(table_widths(s.kind, s.resources, s.devices, s.antennas).ok_or_else(|| {
                config_err(format!(
                    "no published widths for {:?} K={} N={} X={}",
                    s.kind, s.resources, s.devices, s.antennas
                ))
            })?),
            "custom" => Layout::Tapered(
                n.widths
                    .as_slice()
                    .try_into()
                    .map_err(|_| config_err("network.widths must list four widths"))?,
            ),
            l => return Err(config_err(format!("unknown network.layout '{l}' (expected uniform, table or custom)"))),
        };
        let mut cfg = NetworkConfig::new(self.feature_len(), s.devices);
        cfg.blocks = n.blocks;
        cfg.layout = layout;
        cfg.dropout = n.dropout;
        cfg.l2 = n.l2;
        cfg.validate().map_err(|e| config_err(format!("network: {e}")))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            adam: AdamConfig {
                learning_rate: self.train.learning_rate,
                ..Default::default()
            },
            seed: self.train.seed,
        }
    }

    /// Generation settings for a training-style set with SNR drawn from the
    /// training range.
    pub fn generation(&self, samples: usize, snr: (f64, f64), activity: ActivityModel, seed: u64) -> anyhow::Result<GenerationConfig> {
        Ok(GenerationConfig {
            samples,
            snr_db_min: snr.0,
            snr_db_max: snr.1,
            activity,
            antennas: self.scheme.antennas,
            snr_mode: self.snr_mode()?,
            channel: self.channel_model()?,
            noiseless: false,
            seed,
        })
    }

    /// 16 hex digits of SHA-256 over the resolved configuration (excluding
    /// the output directory) and a command-specific suffix.
    pub fn hash(&self, extra: &str) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let text = toml::to_string(&c).expect("config serialises");
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        h.update(b"\n");
        h.update(extra.as_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse `fixed:n`, `uniform:min:max` or `bernoulli:p`.
pub fn parse_activity(spec: &str) -> anyhow::Result<ActivityModel> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let bad = || config_err(format!("activity '{spec}' is not fixed:n, uniform:min:max or bernoulli:p"));
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        ["fixed", n] => Ok(ActivityModel::FixedN(int(n)?)),
        ["uniform", a, b] => Ok(ActivityModel::UniformN { min: int(a)?, max: int(b)? }),
        ["bernoulli", p] => Ok(ActivityModel::Bernoulli {
            p: p.parse().map_err(|_| bad())?,
            require_active: true,
        }),
        _ => Err(bad()),
    }
}

/// Detectors that `eval` and `sweep` can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dnn,
    Stomp,
    StompBlind,
    LsBomp,
}

impl Algorithm {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(Algorithm::Dnn),
            "stomp" => Ok(Algorithm::Stomp),
            "stomp-blind" => Ok(Algorithm::StompBlind),
            "ls-bomp" => Ok(Algorithm::LsBomp),
            _ => Err(config_err(format!("unknown algorithm '{s}' (expected dnn, stomp, stomp-blind or ls-bomp)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dnn => "dnn",
            Algorithm::Stomp => "stomp",
            Algorithm::StompBlind => "stomp-blind",
            Algorithm::LsBomp => "ls-bomp",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_typed_values() {
        let mut t = Table::new();
        apply_override(&mut t, "train.epochs=3").unwrap();
        apply_override(&mut t, "channel.model=inf-dh").unwrap();
        apply_override(&mut t, "sweep.grid=[1, 2]").unwrap();
        assert_eq!(t["train"]["epochs"].as_integer(), Some(3));
        assert_eq!(t["channel"]["model"].as_str(), Some("inf-dh"));
        assert_eq!(t["sweep"]["grid"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "train").is_err());
    }

    #[test]
    fn preset_sets_scheme_and_file_wins_elsewhere() {
        let cfg = ExperimentConfig::load(None, Some("musa-300-x2"), &["train.epochs=2".into()]).unwrap();
        assert_eq!((cfg.scheme.resources, cfg.scheme.devices, cfg.scheme.antennas), (7, 21, 2));
        assert_eq!(cfg.train.epochs, 2);
        let err = ExperimentConfig::load(None, Some("musa-150"), &["scheme.resources=9".into()]).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn table_widths_follow_scheme() {
        assert_eq!(table_widths(SchemeKind::Musa, 14, 21, 1), Some([512, 256, 128, 28]));
        assert_eq!(table_widths(SchemeKind::Scma, 30, 90, 4), Some([1920, 960, 480, 240]));
        assert_eq!(table_widths(SchemeKind::Musa, 10, 21, 1), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::load(None, None, &["train.epoch=3".into()]).unwrap_err();
        assert!(err.to_string().contains("epoch"));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash("x"), b.hash("x"));
        assert_ne!(a.hash("x"), a.hash("y"));
    }
}
