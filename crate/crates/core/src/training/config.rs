//! Training configuration as flat `key = value` text with `#` comments.

use std::fmt::Write as _;

use thiserror::Error;

use crate::motion::{DEFAULT_CLIP_LEN, DEFAULT_FRAME_TIME};
use crate::schedule::{NoiseSchedule, ScheduleError, DEFAULT_BETA_START, DEFAULT_STEPS};

/// Training uses a steeper schedule than the sampler-level default so that
/// `x_T` carries almost no trace of the clip.
pub const TRAIN_BETA_END: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: `{value}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr_denoiser: f64,
    pub lr_discriminator: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_foot: f64,
    pub lambda_root: f64,
    pub lambda_adv: f64,
    /// Reconstruction and adversarial terms only score rows with `ᾱ_t` at or above this.
    pub aux_min_alpha_bar: f64,
    pub seed: u64,
    pub clip_len: usize,
    pub frame_time: f64,
    pub embed_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
    pub disc_hidden: usize,
    /// Adds `sqrt(1 - alpha_bar_t) * x_t` to the noise prediction.
    pub input_skip: bool,
    /// Foot joints tracked when ingesting BVH clips.
    pub foot_joints: Vec<String>,
    pub vel_eps: f64,
    pub height_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            diffusion_steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: TRAIN_BETA_END,
            lr_denoiser: 1e-3,
            lr_discriminator: 1e-4,
            batch_size: 32,
            epochs: 30,
            lambda_foot: 0.1,
            lambda_root: 0.1,
            lambda_adv: 0.01,
            aux_min_alpha_bar: 0.5,
            seed: 0,
            clip_len: DEFAULT_CLIP_LEN,
            frame_time: DEFAULT_FRAME_TIME,
            embed_dim: 16,
            time_dim: 32,
            hidden: 1024,
            disc_hidden: 128,
            input_skip: true,
            foot_joints: vec!["LeftFoot".into(), "RightFoot".into()],
            vel_eps: 15.0,
            height_eps: 3.0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl TrainConfig {
    pub const KEYS: [&'static str; 22] = [
        "diffusion_steps",
        "beta_start",
        "beta_end",
        "lr_denoiser",
        "lr_discriminator",
        "batch_size",
        "epochs",
        "lambda_foot",
        "lambda_root",
        "lambda_adv",
        "aux_min_alpha_bar",
        "seed",
        "clip_len",
        "frame_time",
        "embed_dim",
        "time_dim",
        "hidden",
        "disc_hidden",
        "input_skip",
        "foot_joints",
        "vel_eps",
        "height_eps",
    ];

    pub fn schedule(&self) -> Result<NoiseSchedule, ScheduleError> {
        NoiseSchedule::linear(self.diffusion_steps, self.beta_start, self.beta_end)
    }

    /// Per-timestep skip coefficients for the denoiser, empty when disabled.
    pub fn skip_coefficients(&self) -> Result<Vec<f64>, ScheduleError> {
        if !self.input_skip {
            return Ok(Vec::new());
        }
        let sched = self.schedule()?;
        Ok(sched.alpha_bars().iter().map(|ab| (1.0 - ab).sqrt()).collect())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "diffusion_steps" => self.diffusion_steps = parse_num(key, value)?,
            "beta_start" => self.beta_start = parse_num(key, value)?,
            "beta_end" => self.beta_end = parse_num(key, value)?,
            "lr_denoiser" => self.lr_denoiser = parse_num(key, value)?,
            "lr_discriminator" => self.lr_discriminator = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "lambda_foot" => self.lambda_foot = parse_num(key, value)?,
            "lambda_root" => self.lambda_root = parse_num(key, value)?,
            "lambda_adv" => self.lambda_adv = parse_num(key, value)?,
            "aux_min_alpha_bar" => self.aux_min_alpha_bar = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "clip_len" => self.clip_len = parse_num(key, value)?,
            "frame_time" => self.frame_time = parse_num(key, value)?,
            "embed_dim" => self.embed_dim = parse_num(key, value)?,
            "time_dim" => self.time_dim = parse_num(key, value)?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "disc_hidden" => self.disc_hidden = parse_num(key, value)?,
            "input_skip" => self.input_skip = parse_num(key, value)?,
            "foot_joints" => {
                self.foot_joints =
                    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "vel_eps" => self.vel_eps = parse_num(key, value)?,
            "height_eps" => self.height_eps = parse_num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "diffusion_steps" => self.diffusion_steps.to_string(),
            "beta_start" => self.beta_start.to_string(),
            "beta_end" => self.beta_end.to_string(),
            "lr_denoiser" => self.lr_denoiser.to_string(),
            "lr_discriminator" => self.lr_discriminator.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "lambda_foot" => self.lambda_foot.to_string(),
            "lambda_root" => self.lambda_root.to_string(),
            "lambda_adv" => self.lambda_adv.to_string(),
            "aux_min_alpha_bar" => self.aux_min_alpha_bar.to_string(),
            "seed" => self.seed.to_string(),
            "clip_len" => self.clip_len.to_string(),
            "frame_time" => self.frame_time.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "time_dim" => self.time_dim.to_string(),
            "hidden" => self.hidden.to_string(),
            "disc_hidden" => self.disc_hidden.to_string(),
            "input_skip" => self.input_skip.to_string(),
            "foot_joints" => self.foot_joints.join(","),
            "vel_eps" => self.vel_eps.to_string(),
            "height_eps" => self.height_eps.to_string(),
            _ => return None,
        })
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (key, value, _) in parse_lines(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Every key with its value materialized; floats use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in Self::KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if self.diffusion_steps == 0 {
            return fail("diffusion_steps must be at least 1".into());
        }
        if !(self.beta_start > 0.0 && self.beta_start <= self.beta_end && self.beta_end < 1.0) {
            return fail(format!("need 0 < beta_start <= beta_end < 1, got {} and {}", self.beta_start, self.beta_end));
        }
        if !(self.lr_denoiser > 0.0 && self.lr_discriminator > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        for (name, w) in [("lambda_foot", self.lambda_foot), ("lambda_root", self.lambda_root), ("lambda_adv", self.lambda_adv)] {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(format!("{name} must be a non-negative number, got {w}"));
            }
        }
        if !(0.0..=1.0).contains(&self.aux_min_alpha_bar) {
            return fail(format!("aux_min_alpha_bar must lie in [0, 1], got {}", self.aux_min_alpha_bar));
        }
        if self.clip_len < 2 {
            return fail("clip_len must be at least 2".into());
        }
        if !(self.frame_time > 0.0) {
            return fail("frame_time must be positive".into());
        }
        if self.time_dim % 2 != 0 || self.time_dim == 0 {
            return fail("time_dim must be even and positive".into());
        }
        if self.embed_dim == 0 || self.hidden == 0 || self.disc_hidden == 0 {
            return fail("network widths must be positive".into());
        }
        if !(self.vel_eps > 0.0 && self.height_eps > 0.0) {
            return fail("contact thresholds must be positive".into());
        }
        Ok(())
    }
}

/// Splits `key = value` lines, dropping blank lines and `#` comments.
pub fn parse_lines(text: &str) -> Result<Vec<(String, String, usize)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let mut c = TrainConfig::default();
        c.frame_time = 1.0 / 30.0;
        c.lambda_adv = 0.123456789012345;
        c.seed = u64::MAX;
        c.foot_joints = vec!["L".into(), "R".into()];
        let back = TrainConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = TrainConfig::from_text("# toy run\nepochs = 5   # short\n\nbatch_size=8\n").unwrap();
        assert_eq!(c.epochs, 5);
        assert_eq!(c.batch_size, 8);
        assert_eq!(c.hidden, 1024);
    }

    #[test]
    fn skip_coefficients_follow_the_schedule() {
        let c = TrainConfig::default();
        let sched = c.schedule().unwrap();
        let k = c.skip_coefficients().unwrap();
        assert_eq!(k.len(), c.diffusion_steps);
        assert!((k[9] - (1.0 - sched.alpha_bar(10)).sqrt()).abs() < 1e-15);
        assert!(TrainConfig { input_skip: false, ..c }.skip_coefficients().unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(TrainConfig::from_text("epochs = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(TrainConfig::from_text("nope = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(TrainConfig::from_text("aux_min_alpha_bar = 1.5"), Err(ConfigError::Invalid(_))));
        assert!(matches!(TrainConfig::from_text("epochs"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(TrainConfig::from_text("epochs = x"), Err(ConfigError::BadValue { .. })));
        assert!(TrainConfig::from_text("lambda_adv = -1").is_err());
        assert!(TrainConfig::from_text("batch_size = 0").is_err());
        assert!(TrainConfig::from_text("time_dim = 7").is_err());
    }
}
