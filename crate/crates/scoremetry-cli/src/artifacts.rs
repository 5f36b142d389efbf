//! Artifact layout and provenance stamping.
//!
//! Every file an experiment produces lives under its `output_dir` and is
//! named by the experiment key (seed-free configuration hash) plus the seed,
//! so distinct experiments never collide and re-runs overwrite their own
//! outputs:
//!
//! ```text
//! {out}/checkpoints/{key}-s{seed}-{artifact}.ckpt
//! {out}/train-loss-{key}-s{seed}-{artifact}.csv
//! {out}/{command}-{key}-s{seed}.csv
//! {out}/{command}-{key}-s{seed}-reports.json
//! ```

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use scoremetry::net::{load_checkpoint, ScoreNet, TrainReport};
use scoremetry::numerics::RngStream;
use scoremetry::report::{fmt_g17, git_describe, CsvSink, MetricReport, RunStamp};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Fixed substream labels so every consumer of randomness is independent.
pub mod labels {
    pub const TRAIN_DATA: u64 = 1;
    pub const TRAIN_INIT: u64 = 2;
    pub const TRAIN_LOOP: u64 = 3;
    pub const EVAL_DATA: u64 = 4;
    pub const EVAL_ESTIM: u64 = 5;
    pub const EVAL_MC: u64 = 6;
    pub const MODEL: u64 = 7;
}

pub struct Paths {
    out: PathBuf,
    key: String,
    seed: u64,
}

impl Paths {
    pub fn new(cfg: &ExperimentConfig) -> CliResult<Self> {
        Ok(Paths {
            out: cfg.out_dir(),
            key: cfg.run_key()?,
            seed: cfg.seed,
        })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    /// Provenance stamp appended to every CSV row.
    pub fn stamp(&self) -> RunStamp {
        RunStamp {
            config_hash: self.key.clone(),
            seed: self.seed,
            describe: git_describe(),
        }
    }

    pub fn checkpoint(&self, artifact: &str) -> PathBuf {
        self.out
            .join("checkpoints")
            .join(format!("{}-s{}-{artifact}.ckpt", self.key, self.seed))
    }

    pub fn loss_csv(&self, artifact: &str) -> PathBuf {
        self.out
            .join(format!("train-loss-{}-s{}-{artifact}.csv", self.key, self.seed))
    }

    pub fn table_csv(&self, command: &str) -> PathBuf {
        self.out
            .join(format!("{command}-{}-s{}.csv", self.key, self.seed))
    }

    pub fn reports_json(&self, command: &str) -> PathBuf {
        self.out
            .join(format!("{command}-{}-s{}-reports.json", self.key, self.seed))
    }
}

/// Root randomness of a run; all substreams derive from the master seed.
pub fn base_stream(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed)
}

/// Load a checkpoint that an evaluation command depends on. A missing file
/// is reported as a missing artifact with a hint, never trained implicitly.
pub fn require_checkpoint(path: &Path) -> CliResult<(ScoreNet, serde_json::Value)> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(format!(
            "checkpoint {} not found; run `scoremetry train` with the same configuration and seed first",
            path.display()
        )));
    }
    load_checkpoint(path).map_err(CliError::from)
}

/// Read a float out of checkpoint metadata.
pub fn meta_f64(meta: &serde_json::Value, field: &str) -> CliResult<f64> {
    meta.get(field).and_then(|v| v.as_f64()).ok_or_else(|| {
        CliError::MissingArtifact(format!("checkpoint metadata lacks numeric `{field}`"))
    })
}

/// Read an array of floats out of checkpoint metadata.
pub fn meta_vec(meta: &serde_json::Value, field: &str) -> CliResult<Vec<f64>> {
    let arr = meta.get(field).and_then(|v| v.as_array()).ok_or_else(|| {
        CliError::MissingArtifact(format!("checkpoint metadata lacks array `{field}`"))
    })?;
    arr.iter()
        .map(|v| {
            v.as_f64().ok_or_else(|| {
                CliError::MissingArtifact(format!("`{field}` holds a non-numeric entry"))
            })
        })
        .collect()
}

/// Write the per-epoch loss table: columns `epoch,loss,loss_ma` plus the
/// stamp, where `loss_ma` is the trailing mean of the last (up to) 10 epoch
/// losses.
pub fn write_loss_csv(path: &Path, report: &TrainReport, stamp: &RunStamp) -> CliResult<()> {
    let header = format!("epoch,loss,loss_ma,{}", RunStamp::CSV_COLS);
    let mut sink = CsvSink::create(path, &header)?;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(10);
    for (epoch, &loss) in report.epoch_losses.iter().enumerate() {
        if window.len() == 10 {
            window.pop_front();
        }
        window.push_back(loss);
        let ma = window.iter().sum::<f64>() / window.len() as f64;
        let s = stamp.csv_fields();
        sink.row(&[
            epoch.to_string(),
            fmt_g17(loss),
            fmt_g17(ma),
            s[0].clone(),
            s[1].clone(),
            s[2].clone(),
        ])?;
    }
    Ok(())
}

/// Write the per-point metric reports as a pretty JSON array.
pub fn write_reports(path: &Path, reports: &[MetricReport]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(reports)
        .map_err(|e| CliError::Other(format!("report serialization failed: {e}")))?;
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

/// Append the stamp fields to a row of already-formatted values.
pub fn stamped_row(mut fields: Vec<String>, stamp: &RunStamp) -> Vec<String> {
    fields.extend(stamp.csv_fields());
    fields
}
