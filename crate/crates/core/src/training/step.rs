//! One alternating update: discriminator first, then the noise predictor.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{channel_selector, TrainConfig, TrainError};
use crate::autodiff::{AdamConfig, AdamState, Array, Tape, Var};
use crate::denoiser::{
    ConditionPair, DenoiserConfig, DenoiserParams, DiscriminatorConfig, DiscriminatorParams,
};
use crate::motion::FeatureLayout;
use crate::schedule::{noise_rng, standard_normal, NoiseSchedule};

/// Per-batch loss values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub l_ddpm: f64,
    pub l_foot: f64,
    pub l_root: f64,
    pub l_adv_d: f64,
    pub l_adv_g: f64,
    pub total: f64,
}

impl LossReport {
    /// Weighted total the denoiser minimizes, recomputed from the parts.
    pub fn recompose(&self, config: &TrainConfig) -> f64 {
        self.l_ddpm + config.lambda_foot * self.l_foot + config.lambda_root * self.l_root + config.lambda_adv * self.l_adv_g
    }
}

/// Normalized, flattened training clips with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub layout: FeatureLayout,
    pub frames: usize,
    pub clips: Vec<Vec<f64>>,
    pub conds: Vec<ConditionPair>,
    pub content_count: usize,
    pub style_count: usize,
}

impl TrainingSet {
    pub fn feature_dim(&self) -> usize {
        self.layout.dim() * self.frames
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.clips.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        if self.clips.len() != self.conds.len() {
            return Err(TrainError::DimensionMismatch { expected: self.clips.len(), found: self.conds.len() });
        }
        let d = self.feature_dim();
        if let Some(c) = self.clips.iter().find(|c| c.len() != d) {
            return Err(TrainError::DimensionMismatch { expected: d, found: c.len() });
        }
        Ok(())
    }
}

/// Channel-gathering matrices for the auxiliary losses.
#[derive(Debug, Clone)]
pub struct AuxSelectors {
    root: Array,
    foot: Option<Array>,
    min_alpha_bar: f64,
}

impl AuxSelectors {
    pub fn new(layout: &FeatureLayout, frames: usize) -> Self {
        let d = layout.dim();
        let feet = layout.contact_channels();
        Self {
            root: channel_selector(d, frames, layout.root_channels()),
            foot: (!feet.is_empty()).then(|| channel_selector(d, frames, feet)),
            min_alpha_bar: 0.0,
        }
    }

    /// Restricts the reconstruction terms to batch rows whose `ᾱ_t` is at
    /// least `min_alpha_bar`. The least noisy row is always kept.
    pub fn with_min_alpha_bar(mut self, min_alpha_bar: f64) -> Self {
        self.min_alpha_bar = min_alpha_bar;
        self
    }
}

/// Every mutable piece of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub denoiser: DenoiserParams,
    pub disc: DiscriminatorParams,
    pub denoiser_opt: AdamState,
    pub disc_opt: AdamState,
    pub step: u64,
}

impl TrainState {
    pub fn new(config: &TrainConfig, feature_dim: usize, content_count: usize, style_count: usize) -> Result<Self, TrainError> {
        let dcfg = DenoiserConfig {
            feature_dim,
            content_count,
            style_count,
            embed_dim: config.embed_dim,
            time_dim: config.time_dim,
            hidden: config.hidden,
        };
        let denoiser = DenoiserParams::init(dcfg, config.seed)?.with_input_skip(config.skip_coefficients()?);
        let disc = DiscriminatorParams::init(
            DiscriminatorConfig { feature_dim, hidden: config.disc_hidden },
            config.seed.wrapping_add(1),
        )?;
        Ok(Self {
            denoiser_opt: AdamState::new(AdamConfig::with_lr(config.lr_denoiser), denoiser.store()),
            disc_opt: AdamState::new(AdamConfig::with_lr(config.lr_discriminator), disc.store()),
            denoiser,
            disc,
            step: 0,
        })
    }
}

/// The random draws of one step: a step index and a noise vector per item.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub ts: Vec<usize>,
    pub conds: Vec<ConditionPair>,
    pub x0: Array,
    pub eps: Array,
    pub x_t: Array,
}

impl StepPlan {
    pub fn draw(batch: &[(&[f64], ConditionPair)], sched: &NoiseSchedule, rng: &mut ChaCha8Rng) -> Result<Self, TrainError> {
        let b = batch.len();
        let d = batch.first().map_or(0, |(x, _)| x.len());
        let (mut ts, mut x0, mut eps, mut x_t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (x, _) in batch {
            if x.len() != d {
                return Err(TrainError::DimensionMismatch { expected: d, found: x.len() });
            }
            let t = rng.random_range(1..=sched.total_steps());
            let e = standard_normal(rng, d);
            x_t.extend(sched.q_sample(x, t, &e)?);
            x0.extend_from_slice(x);
            eps.extend(e);
            ts.push(t);
        }
        Ok(Self {
            ts,
            conds: batch.iter().map(|(_, c)| *c).collect(),
            x0: Array::matrix(b, d, x0)?,
            eps: Array::matrix(b, d, eps)?,
            x_t: Array::matrix(b, d, x_t)?,
        })
    }

    /// Rows whose reconstruction is scored, by `ᾱ_t >= min_alpha_bar`,
    /// falling back to the smallest `t` when none qualify.
    pub fn scored_rows(&self, sched: &NoiseSchedule, min_alpha_bar: f64) -> Vec<usize> {
        let rows: Vec<usize> = (0..self.ts.len()).filter(|&r| sched.alpha_bar(self.ts[r]) >= min_alpha_bar).collect();
        if !rows.is_empty() {
            return rows;
        }
        (0..self.ts.len()).min_by_key(|&r| self.ts[r]).into_iter().collect()
    }

    /// Per-row coefficients turning `(x_t, ε̂)` into `x̂0 = x_t/√ᾱ − ε̂·√(1−ᾱ)/√ᾱ`.
    fn reconstruction_terms(&self, sched: &NoiseSchedule) -> (Array, Array) {
        let d = self.x_t.cols();
        let mut scaled_xt = self.x_t.clone();
        let mut eps_coef = Array::zeros(self.x_t.shape());
        for (r, &t) in self.ts.iter().enumerate() {
            let ab = sched.alpha_bar(t);
            let inv = 1.0 / ab.sqrt();
            let k = (1.0 - ab).sqrt() * inv;
            for v in &mut scaled_xt.data_mut()[r * d..(r + 1) * d] {
                *v *= inv;
            }
            eps_coef.data_mut()[r * d..(r + 1) * d].iter_mut().for_each(|v| *v = k);
        }
        (scaled_xt, eps_coef)
    }
}

fn one_hot_rows(rows: &[usize], cols: usize) -> Array {
    let mut data = vec![0.0; rows.len() * cols];
    for (i, &r) in rows.iter().enumerate() {
        data[i * cols + r] = 1.0;
    }
    Array::matrix(rows.len(), cols, data).expect("sized by construction")
}

fn finite(value: f64, term: &'static str, step: u64) -> Result<f64, TrainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(TrainError::NonFinite { term, step })
    }
}

/// Noise-predictor forward pass recorded on a tape, up to the reconstruction
/// and the auxiliary losses.
pub struct DenoiserPass {
    tape: Tape,
    x0_hat: Var,
    real: Array,
    l_ddpm: Var,
    l_foot: Option<Var>,
    l_root: Var,
}

impl DenoiserPass {
    pub fn forward(
        state: &TrainState,
        plan: &StepPlan,
        sched: &NoiseSchedule,
        selectors: &AuxSelectors,
    ) -> Result<Self, TrainError> {
        let mut tape = Tape::new();
        let vars = state.denoiser.register(&mut tape, true)?;
        let x_t = tape.constant(plan.x_t.clone());
        let eps_hat = vars.forward(&mut tape, &state.denoiser, x_t, &plan.ts, &plan.conds)?;
        let eps = tape.constant(plan.eps.clone());
        let l_ddpm = tape.mse(eps_hat, eps)?;

        let (scaled_xt, eps_coef) = plan.reconstruction_terms(sched);
        let scaled_xt = tape.constant(scaled_xt);
        let eps_coef = tape.constant(eps_coef);
        let correction = tape.mul(eps_coef, eps_hat)?;
        let mut x0_hat = tape.sub(scaled_xt, correction)?;
        let mut real = plan.x0.clone();
        let rows = plan.scored_rows(sched, selectors.min_alpha_bar);
        if rows.len() < plan.ts.len() {
            let gather = one_hot_rows(&rows, plan.ts.len());
            real = gather.matmul(&plan.x0)?;
            let gather = tape.constant(gather);
            x0_hat = tape.matmul(gather, x0_hat)?;
        }

        let mut restricted = |sel: &Array| -> Result<Var, TrainError> {
            let target = tape.constant(real.matmul(sel)?);
            let sel = tape.constant(sel.clone());
            let picked = tape.matmul(x0_hat, sel)?;
            Ok(tape.mse(picked, target)?)
        };
        let l_root = restricted(&selectors.root)?;
        let l_foot = selectors.foot.as_ref().map(&mut restricted).transpose()?;
        Ok(Self { tape, x0_hat, real, l_ddpm, l_foot, l_root })
    }

    /// Reconstructed clips `x̂0` of the scored rows, `[k, D]`.
    pub fn x0_hat(&self) -> &Array {
        self.tape.value(self.x0_hat)
    }

    /// Clean clips matching the rows of [`Self::x0_hat`].
    pub fn real(&self) -> &Array {
        &self.real
    }

    /// Adds the generator term against the current discriminator (held
    /// constant), backpropagates the weighted total and steps the optimizer.
    /// Returns `(l_ddpm, l_foot, l_root, l_adv_g, total)`.
    pub fn finish(
        mut self,
        state: &mut TrainState,
        config: &TrainConfig,
    ) -> Result<(f64, f64, f64, f64, f64), TrainError> {
        let tape = &mut self.tape;
        let disc = state.disc.register(tape, false)?;
        let scores = disc.forward(tape, self.x0_hat)?;
        let rows = tape.value(scores).rows();
        let ones = tape.constant(Array::filled(&[rows, 1], 1.0));
        let sq = tape.mse(scores, ones)?;
        let l_g = tape.scale(sq, 0.5)?;

        let mut total = self.l_ddpm;
        let mut weighted = |tape: &mut Tape, term: Var, w: f64| -> Result<(), TrainError> {
            let t = tape.scale(term, w)?;
            total = tape.add(total, t)?;
            Ok(())
        };
        if let Some(f) = self.l_foot {
            weighted(tape, f, config.lambda_foot)?;
        }
        weighted(tape, self.l_root, config.lambda_root)?;
        weighted(tape, l_g, config.lambda_adv)?;

        let item = |v: Var| tape.value(v).item().unwrap_or(f64::NAN);
        let step = state.step;
        let l_ddpm = finite(item(self.l_ddpm), "l_ddpm", step)?;
        let l_foot = finite(self.l_foot.map_or(0.0, item), "l_foot", step)?;
        let l_root = finite(item(self.l_root), "l_root", step)?;
        let l_adv_g = finite(item(l_g), "l_adv_g", step)?;
        let total_value = finite(item(total), "total", step)?;

        let grads = tape.backward(total)?;
        state.denoiser_opt.step(state.denoiser.store_mut(), &grads)?;
        Ok((l_ddpm, l_foot, l_root, l_adv_g, total_value))
    }
}

/// Least-squares discriminator update on real clips and detached
/// reconstructions. Returns the loss before the update.
pub fn update_discriminator(state: &mut TrainState, real: &Array, fake: &Array) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let vars = state.disc.register(&mut tape, true)?;
    let real = tape.constant(real.clone());
    let fake = tape.constant(fake.clone());
    let d_real = vars.forward(&mut tape, real)?;
    let d_fake = vars.forward(&mut tape, fake)?;
    let rows = tape.value(d_real).rows();
    let ones = tape.constant(Array::filled(&[rows, 1], 1.0));
    let zeros = tape.constant(Array::zeros(&[rows, 1]));
    let real_term = tape.mse(d_real, ones)?;
    let fake_term = tape.mse(d_fake, zeros)?;
    let sum = tape.add(real_term, fake_term)?;
    let loss = tape.scale(sum, 0.5)?;
    let value = finite(tape.value(loss).item().unwrap_or(f64::NAN), "l_adv_d", state.step)?;
    let grads = tape.backward(loss)?;
    state.disc_opt.step(state.disc.store_mut(), &grads)?;
    Ok(value)
}

/// Draws noise, updates the discriminator, then the noise predictor.
pub fn train_step(
    state: &mut TrainState,
    batch: &[(&[f64], ConditionPair)],
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
    selectors: &AuxSelectors,
) -> Result<LossReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let plan = StepPlan::draw(batch, sched, rng)?;
    let pass = DenoiserPass::forward(state, &plan, sched, selectors)?;
    let fake = pass.x0_hat().clone();
    let l_adv_d = update_discriminator(state, pass.real(), &fake)?;
    let (l_ddpm, l_foot, l_root, l_adv_g, total) = pass.finish(state, config)?;
    state.step += 1;
    Ok(LossReport { l_ddpm, l_foot, l_root, l_adv_d, l_adv_g, total })
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: u64,
    #[serde(flatten)]
    pub losses: LossReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Median `l_ddpm` of every epoch, in order.
    pub epoch_medians: Vec<f64>,
    pub steps: u64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Steps per epoch: every clip is visited once; the last batch may be short.
pub fn steps_per_epoch(clips: usize, batch_size: usize) -> usize {
    clips.div_ceil(batch_size)
}

/// Runs every epoch of `config` over `set`, single-threaded and bitwise
/// reproducible for a given seed.
pub fn train(
    config: &TrainConfig,
    set: &TrainingSet,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    set.validate()?;
    let sched = config.schedule()?;
    let mut state = TrainState::new(config, set.feature_dim(), set.content_count, set.style_count)?;
    let selectors = AuxSelectors::new(&set.layout, set.frames).with_min_alpha_bar(config.aux_min_alpha_bar);
    let mut rng = noise_rng(config.seed.wrapping_add(2));
    let mut order: Vec<usize> = (0..set.clips.len()).collect();
    let mut epoch_medians = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], ConditionPair)> =
                chunk.iter().map(|&i| (set.clips[i].as_slice(), set.conds[i])).collect();
            let report = train_step(&mut state, &batch, &sched, &mut rng, config, &selectors)?;
            losses.push(report.l_ddpm);
            on_step(&StepRecord { epoch, step: state.step - 1, losses: report });
        }
        epoch_medians.push(median(&losses));
    }
    let steps = state.step;
    Ok(TrainOutcome { state, epoch_medians, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{aux_losses, ddpm_loss};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            diffusion_steps: 20,
            batch_size: 4,
            epochs: 2,
            embed_dim: 4,
            time_dim: 8,
            hidden: 16,
            disc_hidden: 8,
            seed: 3,
            aux_min_alpha_bar: 0.0,
            ..TrainConfig::default()
        }
    }

    fn tiny_set(n: usize) -> TrainingSet {
        let layout = FeatureLayout::new(vec!["Root".into(), "Foot".into()], vec!["Foot".into()]).unwrap();
        let frames = 4;
        let d = layout.dim() * frames;
        let mut rng = noise_rng(11);
        TrainingSet {
            layout,
            frames,
            clips: (0..n).map(|_| standard_normal(&mut rng, d)).collect(),
            conds: (0..n).map(|i| ConditionPair::new(0, i % 2)).collect(),
            content_count: 1,
            style_count: 2,
        }
    }

    fn setup() -> (TrainConfig, TrainingSet, TrainState, NoiseSchedule, AuxSelectors) {
        let config = tiny_config();
        let set = tiny_set(6);
        let state = TrainState::new(&config, set.feature_dim(), 1, 2).unwrap();
        let sched = config.schedule().unwrap();
        let sel = AuxSelectors::new(&set.layout, set.frames);
        (config, set, state, sched, sel)
    }

    fn batch(set: &TrainingSet) -> Vec<(&[f64], ConditionPair)> {
        set.clips.iter().zip(&set.conds).take(4).map(|(c, k)| (c.as_slice(), *k)).collect()
    }

    #[test]
    fn gating_scores_only_clean_rows() {
        let (_, set, state, sched, sel) = setup();
        let mut plan = StepPlan::draw(&batch(&set), &sched, &mut noise_rng(1)).unwrap();
        plan.ts = vec![20, 2, 15, 1];
        let cut = sched.alpha_bar(10);
        assert_eq!(plan.scored_rows(&sched, cut), vec![1, 3]);
        assert_eq!(plan.scored_rows(&sched, 1.0), vec![3]);
        assert_eq!(plan.scored_rows(&sched, 0.0), vec![0, 1, 2, 3]);

        let full = DenoiserPass::forward(&state, &plan, &sched, &sel).unwrap();
        let gated = DenoiserPass::forward(&state, &plan, &sched, &sel.with_min_alpha_bar(cut)).unwrap();
        let d = set.feature_dim();
        assert_eq!(gated.x0_hat().shape(), &[2, d]);
        for (k, r) in [1, 3].into_iter().enumerate() {
            assert_eq!(&gated.x0_hat().data()[k * d..(k + 1) * d], &full.x0_hat().data()[r * d..(r + 1) * d]);
            assert_eq!(&gated.real().data()[k * d..(k + 1) * d], &plan.x0.data()[r * d..(r + 1) * d]);
        }
    }

    #[test]
    fn reported_terms_match_direct_evaluation() {
        let (config, set, mut state, sched, sel) = setup();
        let plan = StepPlan::draw(&batch(&set), &sched, &mut noise_rng(5)).unwrap();
        let eps_hat = state.denoiser.predict_batch(&plan.x_t, &plan.ts, &plan.conds).unwrap();
        let pass = DenoiserPass::forward(&state, &plan, &sched, &sel).unwrap();

        let d = set.feature_dim();
        let mut x0_hat = Vec::new();
        for (r, &t) in plan.ts.iter().enumerate() {
            let rows = r * d..(r + 1) * d;
            x0_hat.extend(sched.predict_x0(&plan.x_t.data()[rows.clone()], t, &eps_hat.data()[rows]).unwrap());
        }
        for (a, b) in pass.x0_hat().data().iter().zip(&x0_hat) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
        let expect_ddpm = ddpm_loss(plan.eps.data(), eps_hat.data()).unwrap();
        let (expect_foot, expect_root) = aux_losses(plan.x0.data(), &x0_hat, &set.layout).unwrap();

        let fake = pass.x0_hat().clone();
        update_discriminator(&mut state, &plan.x0, &fake).unwrap();
        let (l_ddpm, l_foot, l_root, l_g, total) = pass.finish(&mut state, &config).unwrap();
        assert!((l_ddpm - expect_ddpm).abs() < 1e-12);
        assert!((l_foot - expect_foot).abs() < 1e-9 * expect_foot.max(1.0));
        assert!((l_root - expect_root).abs() < 1e-9 * expect_root.max(1.0));
        let report = LossReport { l_ddpm, l_foot, l_root, l_adv_d: 0.0, l_adv_g: l_g, total };
        assert!((report.recompose(&config) - total).abs() < 1e-12);
    }

    #[test]
    fn each_phase_only_moves_its_own_network() {
        let (config, set, mut state, sched, sel) = setup();
        let plan = StepPlan::draw(&batch(&set), &sched, &mut noise_rng(5)).unwrap();
        let pass = DenoiserPass::forward(&state, &plan, &sched, &sel).unwrap();
        let fake = pass.x0_hat().clone();

        let eps_before = state.denoiser.store().clone();
        let disc_before = state.disc.store().clone();
        update_discriminator(&mut state, &plan.x0, &fake).unwrap();
        assert_eq!(state.denoiser.store(), &eps_before);
        assert_ne!(state.disc.store(), &disc_before);

        let disc_mid = state.disc.store().clone();
        pass.finish(&mut state, &config).unwrap();
        assert_eq!(state.disc.store(), &disc_mid);
        assert_ne!(state.denoiser.store(), &eps_before);
    }

    #[test]
    fn generator_term_reaches_the_denoiser() {
        let (mut config, set, state, sched, sel) = setup();
        config.lambda_foot = 0.0;
        config.lambda_root = 0.0;
        let plan = StepPlan::draw(&batch(&set), &sched, &mut noise_rng(5)).unwrap();

        let run = |lambda_adv: f64| {
            let mut s = state.clone();
            let c = TrainConfig { lambda_adv, ..config.clone() };
            let pass = DenoiserPass::forward(&s, &plan, &sched, &sel).unwrap();
            pass.finish(&mut s, &c).unwrap();
            s.denoiser.store().clone()
        };
        assert_ne!(run(0.0), run(1.0));
    }

    #[test]
    fn steps_are_reproducible() {
        let (config, set, state, sched, sel) = setup();
        let go = || {
            let mut s = state.clone();
            let mut rng = noise_rng(9);
            let r = train_step(&mut s, &batch(&set), &sched, &mut rng, &config, &sel).unwrap();
            (r, s.denoiser.store().clone(), s.step)
        };
        let (a, b) = (go(), go());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, 1);
    }

    #[test]
    fn full_run_counts_steps_and_logs_each() {
        let config = tiny_config();
        let set = tiny_set(6);
        let mut seen = Vec::new();
        let out = train(&config, &set, |r| seen.push(r.step)).unwrap();
        assert_eq!(steps_per_epoch(6, 4), 2);
        assert_eq!(out.steps, 4);
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(out.epoch_medians.len(), 2);
        assert_eq!(out.state.denoiser_opt.step_count(), 4);
    }

    #[test]
    fn learns_on_a_tiny_problem() {
        let config = TrainConfig { epochs: 150, lr_denoiser: 3e-3, ..tiny_config() };
        let set = tiny_set(8);
        let out = train(&config, &set, |_| {}).unwrap();
        let head = median(&out.epoch_medians[..10]);
        let tail = median(&out.epoch_medians[out.epoch_medians.len() - 10..]);
        assert!(tail < head, "{head} -> {tail}");
    }

    #[test]
    fn rejects_bad_sets() {
        let config = tiny_config();
        let mut set = tiny_set(2);
        set.clips[1].pop();
        assert!(matches!(train(&config, &set, |_| {}), Err(TrainError::DimensionMismatch { .. })));
        set.clips.clear();
        set.conds.clear();
        assert!(matches!(train(&config, &set, |_| {}), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
