//! Training, sampling and BVH inspection commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{create_dir, load_dataset, read_text, write_text, CliError, RunManifest};
use crate::denoiser::ConditionPair;
use crate::exec::Exec;
use crate::motion::{
    parse_bvh, positions_to_channels, synthetic_skeleton, write_bvh, write_feature_csv, MotionClip, Skeleton,
};
use crate::schedule::NoiseSchedule;
use crate::training::{self, DataSource, TrainConfig, TrainedModel};

pub const CHECKPOINT_FILE: &str = "model.swdm";
pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: TrainConfig,
    pub data: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: u64,
    pub epoch_medians: Vec<f64>,
    pub checkpoint: PathBuf,
}

/// Trains on a dataset directory; writes the checkpoint, a JSON-lines step
/// log and a manifest.
pub fn train(opts: &TrainOptions) -> Result<TrainSummary, CliError> {
    opts.config.validate()?;
    let data = load_dataset(&opts.data, &opts.config)?;
    create_dir(&opts.out)?;

    let mut log = String::new();
    let mut log_err = None;
    let outcome = training::train(&opts.config, &data.set, |record| match serde_json::to_string(record) {
        Ok(line) => {
            log.push_str(&line);
            log.push('\n');
        }
        Err(e) => {
            log_err.get_or_insert(e);
        }
    });
    // keep whatever was logged before a failure
    write_text(&opts.out.join(LOG_FILE), &log)?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    let outcome = outcome?;

    let model = TrainedModel {
        config: opts.config.clone(),
        layout: data.set.layout.clone(),
        frames: data.set.frames,
        frame_time: data.frame_time,
        source: data.source,
        style_names: data.style_names,
        content_names: data.content_names,
        denoiser: outcome.state.denoiser,
        disc: outcome.state.disc,
        norm: data.norm,
    };
    let checkpoint = opts.out.join(CHECKPOINT_FILE);
    model.save(&checkpoint).map_err(|e| match e {
        training::CheckpointError::Io(source) => CliError::Io { path: checkpoint.clone(), source },
        other => other.into(),
    })?;

    let mut manifest = RunManifest::new("train", opts.config.seed).with_train_config(&opts.config);
    manifest.inputs = vec![opts.data.display().to_string()];
    manifest.outputs = vec![CHECKPOINT_FILE.into(), LOG_FILE.into()];
    manifest.write(&opts.out)?;
    Ok(TrainSummary { steps: outcome.steps, epoch_medians: outcome.epoch_medians, checkpoint })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SampleFormat {
    Csv,
    Bvh,
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub checkpoint: PathBuf,
    pub content: usize,
    pub style: usize,
    pub count: usize,
    pub seed: u64,
    pub format: SampleFormat,
    pub out: PathBuf,
    pub exec: Exec,
}

fn export_skeleton(model: &TrainedModel) -> Result<Skeleton, CliError> {
    let synthetic = synthetic_skeleton();
    if model.source == DataSource::Synthetic && synthetic.names() == model.layout.joints() {
        Ok(synthetic)
    } else {
        Ok(Skeleton::positional(model.layout.joints())?)
    }
}

/// Draws `count` clips with seeds `seed, seed+1, ...`; returns the written
/// file names, relative to `opts.out`.
pub fn sample(opts: &SampleOptions) -> Result<Vec<String>, CliError> {
    let model = TrainedModel::load(&opts.checkpoint)?;
    let cond = ConditionPair::new(opts.content, opts.style);
    model.denoiser.check_condition(&cond)?;
    if opts.count == 0 {
        return Err(CliError::Invalid("count must be at least 1".into()));
    }
    let sched = NoiseSchedule::linear(model.config.diffusion_steps, model.config.beta_start, model.config.beta_end)?;
    let seeds: Vec<u64> = (0..opts.count as u64).map(|i| opts.seed.wrapping_add(i)).collect();
    let samples = sched.sample_many(&model.denoiser, &cond, &seeds, opts.exec)?;

    create_dir(&opts.out)?;
    let skeleton = match opts.format {
        SampleFormat::Bvh => Some(export_skeleton(&model)?),
        SampleFormat::Csv => None,
    };
    let mut written = Vec::with_capacity(samples.len());
    for (i, mut x) in samples.into_iter().enumerate() {
        model.norm.inverse_flat(&mut x)?;
        let clip = MotionClip::new(model.layout.clone(), model.frame_time, x, false)?;
        let (name, text) = match &skeleton {
            None => (format!("sample_{i:03}.csv"), write_feature_csv(&clip)),
            Some(sk) => {
                let frames = clip
                    .global_positions()
                    .iter()
                    .map(|p| positions_to_channels(sk, p))
                    .collect::<Result<Vec<_>, _>>()?;
                (format!("sample_{i:03}.bvh"), write_bvh(sk, &frames, model.frame_time)?)
            }
        };
        write_text(&opts.out.join(&name), &text)?;
        written.push(name);
    }

    let mut manifest = RunManifest::new("sample", opts.seed).with_train_config(&model.config);
    manifest.config.insert("content".into(), opts.content.to_string());
    manifest.config.insert("style".into(), opts.style.to_string());
    manifest.config.insert("count".into(), opts.count.to_string());
    manifest.config.insert(
        "format".into(),
        match opts.format {
            SampleFormat::Csv => "csv".into(),
            SampleFormat::Bvh => "bvh".into(),
        },
    );
    manifest.inputs = vec![opts.checkpoint.display().to_string()];
    manifest.outputs = written.clone();
    manifest.write(&opts.out)?;
    Ok(written)
}

/// One `key: value` line per fact about a BVH file.
pub fn bvh_info(path: &Path) -> Result<String, CliError> {
    let motion = parse_bvh(&read_text(path)?).map_err(|source| CliError::Data { path: path.to_path_buf(), source })?;
    let mut out = String::new();
    let _ = writeln!(out, "joints: {}", motion.skeleton.joint_count());
    let _ = writeln!(out, "channels: {}", motion.skeleton.channel_count());
    let _ = writeln!(out, "frames: {}", motion.frames.len());
    let _ = writeln!(out, "frame_time: {}", motion.frame_time);
    let _ = writeln!(out, "duration: {}", motion.duration());
    let _ = writeln!(out, "joint_names: {}", motion.skeleton.names().join(" "));
    Ok(out)
}
