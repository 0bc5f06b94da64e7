//! Closed-form diffusion mathematics.
//!
//! Steps are indexed `1..=T`. The cumulative product uses the convention
//! `alpha_bar(0) = 1`, so the `t = 1` formulas need no special case.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::denoiser::{ConditionPair, DenoiserError};
use crate::exec::Exec;

/// Default number of diffusion steps.
pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule configuration: {0}")]
    InvalidConfig(String),
    #[error("step {t} outside 1..={total}")]
    StepOutOfRange { t: usize, total: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("reverse step at t=1 must not inject noise")]
    NoiseAtFinalStep,
    #[error(transparent)]
    Predictor(#[from] DenoiserError),
}

/// Precomputed variance tables shared by the forward and reverse processes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear interpolation of the per-step variance from `beta_start` at
    /// `t = 1` to `beta_end` at `t = T`.
    pub fn linear(total_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self, ScheduleError> {
        if total_steps == 0 {
            return Err(ScheduleError::InvalidConfig("total steps must be at least 1".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(ScheduleError::InvalidConfig(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..total_steps)
            .map(|i| {
                if i + 1 == total_steps && total_steps > 1 {
                    beta_end
                } else if total_steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (total_steps - 1) as f64
                }
            })
            .collect();
        Ok(Self::from_betas(betas))
    }

    fn from_betas(betas: Vec<f64>) -> Self {
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Self { betas, alphas, alpha_bars }
    }

    pub fn total_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_step(&self, t: usize) -> Result<(), ScheduleError> {
        if t == 0 || t > self.total_steps() {
            Err(ScheduleError::StepOutOfRange { t, total: self.total_steps() })
        } else {
            Ok(())
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// Cumulative product up to `t`; `alpha_bar(0)` is 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Noises a clean sample to step `t` with the closed-form marginal.
    pub fn q_sample(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>, ScheduleError> {
        self.check_step(t)?;
        same_len(x0, eps)?;
        let ab = self.alpha_bar(t);
        let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| signal * x + noise * e).collect())
    }

    /// Reconstruction of the clean sample implied by `x_t` and a noise estimate.
    pub fn predict_x0(&self, x_t: &[f64], t: usize, eps_hat: &[f64]) -> Result<Vec<f64>, ScheduleError> {
        self.check_step(t)?;
        same_len(x_t, eps_hat)?;
        let ab = self.alpha_bar(t);
        let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x_t.iter().zip(eps_hat).map(|(x, e)| (x - noise * e) / signal).collect())
    }

    /// Mean of the reverse kernel given a noise estimate.
    pub fn posterior_mean(&self, x_t: &[f64], t: usize, eps_hat: &[f64]) -> Result<Vec<f64>, ScheduleError> {
        self.check_step(t)?;
        same_len(x_t, eps_hat)?;
        let coef = self.beta(t) / (1.0 - self.alpha_bar(t)).sqrt();
        let scale = 1.0 / self.alpha(t).sqrt();
        Ok(x_t.iter().zip(eps_hat).map(|(x, e)| scale * (x - coef * e)).collect())
    }

    /// One ancestral step with variance `beta_t`. `z` must be all zeros at `t = 1`.
    pub fn reverse_step(
        &self,
        x_t: &[f64],
        t: usize,
        eps_hat: &[f64],
        z: &[f64],
    ) -> Result<Vec<f64>, ScheduleError> {
        let mut mean = self.posterior_mean(x_t, t, eps_hat)?;
        same_len(x_t, z)?;
        if t == 1 {
            if z.iter().any(|v| *v != 0.0) {
                return Err(ScheduleError::NoiseAtFinalStep);
            }
            return Ok(mean);
        }
        let sigma = self.beta(t).sqrt();
        for (m, zi) in mean.iter_mut().zip(z) {
            *m += sigma * zi;
        }
        Ok(mean)
    }

    /// Full reverse chain from `x_T ~ N(0, I)` down to `x_0`.
    ///
    /// All randomness comes from `seed`; the result is a pure function of the
    /// predictor's weights, the condition and the seed.
    pub fn sample_loop<P: NoisePredictor + ?Sized>(
        &self,
        predictor: &P,
        cond: &ConditionPair,
        seed: u64,
    ) -> Result<Vec<f64>, ScheduleError> {
        let dim = predictor.feature_dim();
        let mut rng = noise_rng(seed);
        let mut x = standard_normal(&mut rng, dim);
        let zeros = vec![0.0; dim];
        for t in (1..=self.total_steps()).rev() {
            let eps_hat = predictor.predict_noise(&x, t, cond)?;
            if eps_hat.len() != dim {
                return Err(ScheduleError::DimensionMismatch { expected: dim, found: eps_hat.len() });
            }
            x = if t > 1 {
                let z = standard_normal(&mut rng, dim);
                self.reverse_step(&x, t, &eps_hat, &z)?
            } else {
                self.reverse_step(&x, t, &eps_hat, &zeros)?
            };
        }
        Ok(x)
    }

    /// Runs [`sample_loop`](Self::sample_loop) once per seed; order follows `seeds`.
    pub fn sample_many<P: NoisePredictor + Sync + ?Sized>(
        &self,
        predictor: &P,
        cond: &ConditionPair,
        seeds: &[u64],
        exec: Exec,
    ) -> Result<Vec<Vec<f64>>, ScheduleError> {
        exec.map(seeds, |&s| self.sample_loop(predictor, cond, s)).into_iter().collect()
    }
}

/// Anything that estimates the noise contained in `x_t`.
pub trait NoisePredictor {
    fn feature_dim(&self) -> usize;
    fn predict_noise(&self, x_t: &[f64], t: usize, cond: &ConditionPair) -> Result<Vec<f64>, DenoiserError>;
}

/// The generator used for every seeded noise draw in the crate.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), ScheduleError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(ScheduleError::DimensionMismatch { expected: a.len(), found: b.len() })
    }
}
