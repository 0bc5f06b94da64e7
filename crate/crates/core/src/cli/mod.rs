//! Command-line front end: dataset generation, training, sampling,
//! evaluation and BVH inspection. Every command writes files; output
//! directories also receive a `manifest.json` describing the run.

mod args;
mod commands;
mod dataset;
mod eval;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use args::{run, Cli, Command};
pub use commands::{bvh_info, sample, train, SampleFormat, SampleOptions, TrainOptions, TrainSummary, CHECKPOINT_FILE, LOG_FILE};
pub use dataset::{
    default_style_grid, gendata, load_dataset, parse_style_grid, GendataOptions, LoadedDataset, NamedStyle,
    INDEX_FILE, NORM_FILE, STYLES_FILE,
};
pub use eval::{
    diversity, evaluate, fit_gait, foot_skating, ConditionReport, EvalOptions, EvalReport, FidelityReport, GaitFit,
    EVAL_FILE, FIDELITY_TOLERANCE,
};

use crate::denoiser::DenoiserError;
use crate::motion::MotionError;
use crate::schedule::ScheduleError;
use crate::training::{CheckpointError, ConfigError, TrainError};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: MotionError },
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Checkpoint(CheckpointError::Io(_)) => EXIT_IO,
            CliError::Train(TrainError::Checkpoint(CheckpointError::Io(_))) => EXIT_IO,
            CliError::Train(TrainError::NonFinite { .. }) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// What was run, with every setting materialized, so the run can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: crate::VERSION.to_string(),
            seed,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_train_config(mut self, config: &crate::training::TrainConfig) -> Self {
        for key in crate::training::TrainConfig::KEYS {
            if let Some(v) = config.get(key) {
                self.config.insert(key.to_string(), v);
            }
        }
        self
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_text(&dir.join(MANIFEST_FILE), &text)
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&read_text(&dir.join(MANIFEST_FILE))?)?)
    }
}
