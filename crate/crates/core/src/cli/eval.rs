//! Sample-quality metrics: diversity, style fidelity and foot skating.

use std::path::PathBuf;

use serde::Serialize;

use super::{create_dir, load_dataset, write_text, CliError, RunManifest};
use crate::denoiser::ConditionPair;
use crate::exec::Exec;
use crate::motion::MotionClip;
use crate::schedule::NoiseSchedule;
use crate::training::TrainedModel;

pub const EVAL_FILE: &str = "eval.json";
/// Relative error under which a recovered style parameter counts as matching.
pub const FIDELITY_TOLERANCE: f64 = 0.25;
/// Share of samples that must match for a condition to pass.
pub const FIDELITY_PASS_FRACTION: f64 = 0.75;
const REPORT_NOTE: &str = "diversity, fidelity and foot_skating are proxy metrics: mean pairwise L2 distance between \
    generated feature matrices; stride and frequency recovered by least squares from the root trajectory; mean foot \
    speed (cm/s) on frames whose generated contact channel exceeds 0.5";

/// Gait parameters recovered from a root trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaitFit {
    /// Forward speed from a linear fit of root x, cm/s.
    pub speed: f64,
    /// Frequency of the best sinusoid fitted to root height, Hz.
    pub frequency: f64,
    pub amplitude: f64,
    /// Distance per cycle, `speed / frequency`.
    pub stride: f64,
}

const FIT_MIN_HZ: f64 = 0.3;
const FIT_MAX_HZ: f64 = 5.0;
const FIT_STEP_HZ: f64 = 0.002;

/// Solves a symmetric 3x3 system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let p = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..3 {
            let k = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= k * a[col][c];
            }
            b[r] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Residual sum of squares and amplitude of `y ≈ a sin(2πft) + b cos(2πft) + c`.
fn sinusoid_fit(ts: &[f64], ys: &[f64], f: f64) -> Option<(f64, f64)> {
    let basis = |t: f64| {
        let (s, c) = (2.0 * std::f64::consts::PI * f * t).sin_cos();
        [s, c, 1.0]
    };
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&t, &y) in ts.iter().zip(ys) {
        let row = basis(t);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let coef = solve3(ata, aty)?;
    let rss = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let row = basis(t);
            let e = y - (coef[0] * row[0] + coef[1] * row[1] + coef[2]);
            e * e
        })
        .sum();
    Some((rss, coef[0].hypot(coef[1])))
}

/// Least-squares gait fit over a raw-unit clip's root trajectory.
pub fn fit_gait(clip: &MotionClip) -> Option<GaitFit> {
    let root = clip.root_trajectory();
    if root.len() < 4 {
        return None;
    }
    let ts: Vec<f64> = (0..root.len()).map(|i| i as f64 * clip.frame_time).collect();
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let x_mean = root.iter().map(|r| r[0]).sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(&root).map(|(t, r)| (t - t_mean) * (r[0] - x_mean)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - t_mean) * (t - t_mean)).sum();
    let speed = sxy / sxx;

    let ys: Vec<f64> = root.iter().map(|r| r[1]).collect();
    let steps = ((FIT_MAX_HZ - FIT_MIN_HZ) / FIT_STEP_HZ).round() as usize;
    let (mut best_rss, mut frequency, mut amplitude) = (f64::INFINITY, f64::NAN, f64::NAN);
    for k in 0..=steps {
        let f = FIT_MIN_HZ + k as f64 * FIT_STEP_HZ;
        if let Some((rss, amp)) = sinusoid_fit(&ts, &ys, f) {
            if rss < best_rss {
                (best_rss, frequency, amplitude) = (rss, f, amp);
            }
        }
    }
    if !frequency.is_finite() || !speed.is_finite() {
        return None;
    }
    Some(GaitFit { speed, frequency, amplitude, stride: speed / frequency })
}

/// Mean pairwise L2 distance; zero with fewer than two samples.
pub fn diversity(samples: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            total += samples[i].iter().zip(&samples[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Mean foot speed (cm/s) over frames whose contact channel exceeds 0.5, or
/// `None` when no frame is flagged.
pub fn foot_skating(clip: &MotionClip) -> Option<f64> {
    let layout = &clip.layout;
    let feet: Vec<usize> = layout.feet().iter().filter_map(|f| layout.joints().iter().position(|j| j == f)).collect();
    let global = clip.global_positions();
    let contacts = clip.contacts();
    let n = global.len();
    if n < 2 {
        return None;
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (k, &j) in feet.iter().enumerate() {
        for f in 0..n {
            if contacts[f][k] <= 0.5 {
                continue;
            }
            let (a, b) = (f.saturating_sub(1), (f + 1).min(n - 1));
            let dt = (b - a) as f64 * clip.frame_time;
            let d: f64 = (0..3).map(|i| (global[b][j][i] - global[a][j][i]).powi(2)).sum::<f64>().sqrt();
            total += d / dt;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub requested_stride_cm: f64,
    pub requested_frequency_hz: f64,
    pub mean_stride_cm: f64,
    pub mean_frequency_hz: f64,
    pub stride_rel_errors: Vec<f64>,
    pub frequency_rel_errors: Vec<f64>,
    /// Share of samples with both errors under the tolerance.
    pub fraction_within_tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub content_id: usize,
    pub content: String,
    pub style_id: usize,
    pub style: String,
    pub diversity: f64,
    pub foot_skating_cm_s: Option<f64>,
    pub fidelity: Option<FidelityReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub note: String,
    pub samples_per_condition: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub conditions: Vec<ConditionReport>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub exec: Exec,
}

fn rel_err(found: f64, wanted: f64) -> f64 {
    (found - wanted).abs() / wanted.abs()
}

fn fidelity(clips: &[MotionClip], stride: f64, frequency: f64) -> FidelityReport {
    let fits: Vec<Option<GaitFit>> = clips.iter().map(fit_gait).collect();
    let errs = |pick: fn(&GaitFit) -> f64, want: f64| -> Vec<f64> {
        fits.iter().map(|f| f.as_ref().map_or(f64::INFINITY, |g| rel_err(pick(g), want))).collect()
    };
    let stride_rel_errors = errs(|g| g.stride, stride);
    let frequency_rel_errors = errs(|g| g.frequency, frequency);
    let ok = stride_rel_errors
        .iter()
        .zip(&frequency_rel_errors)
        .filter(|(s, f)| **s < FIDELITY_TOLERANCE && **f < FIDELITY_TOLERANCE)
        .count();
    let fraction = ok as f64 / clips.len().max(1) as f64;
    let mean = |pick: fn(&GaitFit) -> f64| {
        let v: Vec<f64> = fits.iter().flatten().map(pick).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    FidelityReport {
        requested_stride_cm: stride,
        requested_frequency_hz: frequency,
        mean_stride_cm: mean(|g| g.stride),
        mean_frequency_hz: mean(|g| g.frequency),
        stride_rel_errors,
        frequency_rel_errors,
        fraction_within_tolerance: fraction,
        pass: fraction >= FIDELITY_PASS_FRACTION,
    }
}

/// Samples every (content, style) pair of the checkpoint and scores the
/// results. Writes `eval.json` and a manifest into `opts.out`.
pub fn evaluate(opts: &EvalOptions) -> Result<EvalReport, CliError> {
    if opts.samples == 0 {
        return Err(CliError::Invalid("need at least one sample per condition".into()));
    }
    let model = TrainedModel::load(&opts.checkpoint)?;
    let data = load_dataset(&opts.data, &model.config)?;
    if data.set.layout != model.layout || data.set.frames != model.frames {
        return Err(CliError::Invalid("dataset layout does not match the checkpoint".into()));
    }
    let sched = NoiseSchedule::linear(model.config.diffusion_steps, model.config.beta_start, model.config.beta_end)?;

    let mut conditions = Vec::new();
    let (nc, ns) = (model.content_names.len(), model.style_names.len());
    for content_id in 0..nc {
        for style_id in 0..ns {
            let cond = ConditionPair::new(content_id, style_id);
            let first = opts.seed.wrapping_add(((content_id * ns + style_id) * opts.samples) as u64);
            let seeds: Vec<u64> = (0..opts.samples as u64).map(|i| first.wrapping_add(i)).collect();
            let mut samples = sched.sample_many(&model.denoiser, &cond, &seeds, opts.exec)?;
            for s in &mut samples {
                model.norm.inverse_flat(s)?;
            }
            let clips = samples
                .iter()
                .map(|s| MotionClip::new(model.layout.clone(), model.frame_time, s.clone(), false))
                .collect::<Result<Vec<_>, _>>()?;

            let mut warnings = Vec::new();
            if opts.samples == 1 {
                warnings.push("one sample per condition: diversity has no pairs and is reported as 0".to_string());
            }
            let skating: Vec<f64> = clips.iter().filter_map(foot_skating).collect();
            let foot_skating_cm_s = if skating.is_empty() {
                warnings.push("no generated frame is flagged as contact".to_string());
                None
            } else {
                Some(skating.iter().sum::<f64>() / skating.len() as f64)
            };
            let fidelity = data.styles.as_ref().map(|st| fidelity(&clips, st[style_id].stride_cm, st[style_id].frequency_hz));
            conditions.push(ConditionReport {
                content_id,
                content: model.content_names[content_id].clone(),
                style_id,
                style: model.style_names[style_id].clone(),
                diversity: diversity(&samples),
                foot_skating_cm_s,
                fidelity,
                warnings,
            });
        }
    }
    let report = EvalReport {
        note: REPORT_NOTE.to_string(),
        samples_per_condition: opts.samples,
        seed: opts.seed,
        tolerance: FIDELITY_TOLERANCE,
        conditions,
    };

    create_dir(&opts.out)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_text(&opts.out.join(EVAL_FILE), &text)?;
    let mut manifest = RunManifest::new("eval", opts.seed).with_train_config(&model.config);
    manifest.config.insert("samples".into(), opts.samples.to_string());
    manifest.inputs = vec![opts.checkpoint.display().to_string(), opts.data.display().to_string()];
    manifest.outputs = vec![EVAL_FILE.into()];
    manifest.write(&opts.out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{synthetic_walk, WalkStyle};

    #[test]
    fn fitter_recovers_generator_parameters() {
        for (stride, freq, bounce) in [(50.0, 1.0, 2.0), (70.0, 1.25, 3.0), (90.0, 1.5, 4.0), (110.0, 1.75, 5.0), (75.0, 1.2, 3.0)] {
            for seed in 0..4 {
                let w = synthetic_walk(WalkStyle::new(stride, freq, 5.0, bounce), 32, 1.0 / 30.0, seed).unwrap();
                let fit = fit_gait(&w.clip).unwrap();
                assert!(rel_err(fit.stride, stride) < 0.05, "{stride} {freq}: {fit:?}");
                assert!(rel_err(fit.frequency, freq) < 0.05, "{stride} {freq}: {fit:?}");
                assert!(rel_err(fit.amplitude, bounce) < 0.1, "{fit:?}");
            }
        }
    }

    #[test]
    fn diversity_of_duplicates_and_singletons_is_zero() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(diversity(&[a.clone()]), 0.0);
        assert_eq!(diversity(&[a.clone(), a.clone(), a]), 0.0);
        assert!((diversity(&[vec![0.0, 0.0], vec![3.0, 4.0]]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn planted_feet_of_ground_truth_barely_move() {
        let w = synthetic_walk(WalkStyle::new(70.0, 1.0, 0.0, 2.0), 32, 1.0 / 30.0, 1).unwrap();
        let skating = foot_skating(&w.clip).unwrap();
        assert!(skating < 10.0, "{skating}");
    }

    #[test]
    fn solve3_matches_known_solution() {
        let x = solve3([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]], [5.0, 5.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(solve3([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [1.0, 1.0, 1.0]).is_none());
    }
}
