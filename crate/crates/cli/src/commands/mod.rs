mod codes;
mod data;
mod evaluate;
mod tools;

pub use codes::{cmd_gen_codes, sensing_matrix};
pub use data::{cmd_gen_data, cmd_train};
pub use evaluate::{cmd_analyze, cmd_eval, cmd_sweep, AnalyzeArgs};
pub use tools::{cmd_channel_probe, cmd_coverage, cmd_flops, CoverageArgs};

use crate::config::ExperimentConfig;
use crate::output::Artifacts;

/// Shared state for one invocation.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub art: Artifacts,
    /// Zero the wall-clock columns so reruns are byte-identical.
    pub deterministic: bool,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, deterministic: bool) -> Self {
        let art = Artifacts::new(&cfg.output);
        Self { cfg, art, deterministic }
    }
}
