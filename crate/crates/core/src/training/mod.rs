//! Training: configuration, loss terms, the alternating update step and
//! checkpoints.

mod checkpoint;
mod config;
mod losses;
mod step;

use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointError, DataSource, TrainedModel, FORMAT_VERSION, MAGIC};
pub use config::{parse_lines, ConfigError, TrainConfig, TRAIN_BETA_END};
pub use losses::{aux_losses, channel_selector, ddpm_loss, discriminator_loss, generator_adv_loss};
pub use step::{
    median, steps_per_epoch, train, train_step, update_discriminator, AuxSelectors, DenoiserPass, LossReport,
    StepPlan, StepRecord, TrainOutcome, TrainState, TrainingSet,
};

use crate::autodiff::AutodiffError;
use crate::denoiser::DenoiserError;
use crate::motion::MotionError;
use crate::schedule::ScheduleError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite {term} at step {step}")]
    NonFinite { term: &'static str, step: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
