//! Styled walking-motion synthesis with a conditional denoising diffusion model.
//!
//! The crate is split into the pieces a training run touches in order:
//!
//! * [`motion`]: BVH ingestion and export, feature extraction, normalization and a
//!   procedural walk generator used as a verifiable dataset.
//! * [`schedule`]: closed-form diffusion math (noise schedule, forward noising,
//!   reconstruction, reverse steps, the sampling loop).
//! * [`autodiff`]: a small tape-based reverse-mode engine and Adam.
//! * [`denoiser`]: the conditional noise predictor and the discriminator.
//! * [`training`]: losses, the alternating update loop and checkpoints.
//! * [`cli`]: the `stylewalk` command-line front end.
//!
//! Data-parallel loops (batch sampling, gradient checks, dataset generation) go
//! through [`exec::Exec`], which uses rayon when the `parallel` feature is on and
//! runs sequentially otherwise. Results are identical in both modes.

pub mod autodiff;
pub mod cli;
pub mod denoiser;
pub mod exec;
pub mod motion;
pub mod schedule;
pub mod training;

pub use exec::Exec;

/// Toolkit version recorded in run manifests and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
