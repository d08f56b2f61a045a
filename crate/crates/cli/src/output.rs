//! CSV output. Every file starts with a `# config_hash=` comment line and a
//! header row.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Open `path` and write the hash comment line.
pub fn open_with_hash(path: &Path, hash: &str) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "# config_hash={hash}")?;
    Ok(w)
}

/// Write a header and pre-formatted records.
pub fn write_records(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let w = open_with_hash(path, hash)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Standard artifact locations inside the output directory.
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn codes(&self) -> PathBuf {
        self.dir.join("codes.nmcs")
    }
    pub fn correlation(&self) -> PathBuf {
        self.dir.join("correlation.csv")
    }
    pub fn code_entries(&self) -> PathBuf {
        self.dir.join("codes.csv")
    }
    pub fn train_set(&self) -> PathBuf {
        self.dir.join("train.nmds")
    }
    pub fn validation_set(&self) -> PathBuf {
        self.dir.join("validation.nmds")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.nmnn")
    }
    pub fn training_log(&self) -> PathBuf {
        self.dir.join("training_log.csv")
    }
    pub fn eval(&self) -> PathBuf {
        self.dir.join("eval.csv")
    }
    pub fn predictions(&self) -> PathBuf {
        self.dir.join("predictions.csv")
    }
    pub fn sweep(&self) -> PathBuf {
        self.dir.join("sweep.csv")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn calibration(&self) -> PathBuf {
        self.dir.join("calibration.csv")
    }
    pub fn flops(&self) -> PathBuf {
        self.dir.join("flops.csv")
    }
    pub fn coverage(&self) -> PathBuf {
        self.dir.join("coverage.csv")
    }
    pub fn channel_probe(&self) -> PathBuf {
        self.dir.join("channel_probe.csv")
    }
}

/// Format an optional rate; undefined values become empty cells.
pub fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}
