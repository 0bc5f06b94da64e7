//! The conditional noise predictor and the motion discriminator.
//!
//! Both are small MLPs over flattened clips. The noise predictor sees
//! `[x_t, timestep embedding, content embedding, style embedding]`; the
//! discriminator sees only the motion.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::autodiff::{Array, AutodiffError, ParamStore, Tape, Var};
use crate::schedule::NoisePredictor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenoiserError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what} id {id} out of range (valid: 0..{count})")]
    IdOutOfRange { what: &'static str, id: usize, count: usize },
    #[error("timestep embedding dimension must be even, got {0}")]
    OddTimeDim(usize),
    #[error("timestep {0} has no skip coefficient")]
    TimestepOutOfRange(usize),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Content and style labels selecting rows of the embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionPair {
    pub content_id: usize,
    pub style_id: usize,
}

impl ConditionPair {
    pub fn new(content_id: usize, style_id: usize) -> Self {
        Self { content_id, style_id }
    }
}

/// Sinusoidal encoding of a step index: even slots hold `sin`, odd slots `cos`.
pub fn timestep_embedding(t: usize, dim: usize) -> Result<Vec<f64>, DenoiserError> {
    if dim % 2 != 0 {
        return Err(DenoiserError::OddTimeDim(dim));
    }
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(2.0 * i as f64 / dim as f64);
        let arg = t as f64 / freq;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub feature_dim: usize,
    pub content_count: usize,
    pub style_count: usize,
    pub embed_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
}

impl DenoiserConfig {
    pub fn new(feature_dim: usize, content_count: usize, style_count: usize) -> Self {
        Self { feature_dim, content_count, style_count, embed_dim: 16, time_dim: 32, hidden: 256 }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.time_dim + 2 * self.embed_dim
    }

    fn validate(&self) -> Result<(), DenoiserError> {
        if self.time_dim % 2 != 0 {
            return Err(DenoiserError::OddTimeDim(self.time_dim));
        }
        let dims = [self.feature_dim, self.content_count, self.style_count, self.embed_dim, self.hidden];
        if dims.contains(&0) {
            return Err(DenoiserError::InvalidConfig(format!("zero-sized dimension in {self:?}")));
        }
        Ok(())
    }

    fn layer_dims(&self) -> [(usize, usize); 3] {
        [(self.input_dim(), self.hidden), (self.hidden, self.hidden), (self.hidden, self.feature_dim)]
    }
}

pub const CONTENT_TABLE: &str = "eps.content";
pub const STYLE_TABLE: &str = "eps.style";
const EPS_PREFIX: &str = "eps";
const DISC_PREFIX: &str = "disc";

fn layer_names(prefix: &str, i: usize) -> (String, String) {
    (format!("{prefix}.l{i}.w"), format!("{prefix}.l{i}.b"))
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect();
    Array::matrix(fan_in, fan_out, data).expect("sized by construction")
}

fn init_layers(store: &mut ParamStore, prefix: &str, dims: &[(usize, usize)], rng: &mut ChaCha8Rng) {
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let (w, b) = layer_names(prefix, i);
        store.insert(w, glorot(rng, fan_in, fan_out));
        store.insert(b, Array::zeros(&[1, fan_out]));
    }
}

fn check_shapes(store: &ParamStore, expected: &[(String, Vec<usize>)]) -> Result<(), DenoiserError> {
    for (name, shape) in expected {
        let a = store.get(name)?;
        if a.shape() != shape.as_slice() {
            return Err(DenoiserError::InvalidConfig(format!(
                "`{name}` has shape {:?}, expected {shape:?}",
                a.shape()
            )));
        }
    }
    Ok(())
}

fn layer_shapes(prefix: &str, dims: &[(usize, usize)]) -> Vec<(String, Vec<usize>)> {
    dims.iter()
        .enumerate()
        .flat_map(|(i, &(a, b))| {
            let (w, bias) = layer_names(prefix, i);
            [(w, vec![a, b]), (bias, vec![1, b])]
        })
        .collect()
}

/// Layer handles of an MLP registered on a tape.
#[derive(Debug, Clone)]
struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl MlpVars {
    fn register(
        tape: &mut Tape,
        store: &ParamStore,
        prefix: &str,
        n: usize,
        trainable: bool,
    ) -> Result<Self, AutodiffError> {
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let (w, b) = layer_names(prefix, i);
            layers.push((leaf(tape, store, &w, trainable)?, leaf(tape, store, &b, trainable)?));
        }
        Ok(Self { layers })
    }

    fn forward(&self, tape: &mut Tape, mut h: Var) -> Result<Var, AutodiffError> {
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul(h, w)?;
            h = tape.add(z, b)?;
            if i < last {
                h = tape.silu(h)?;
            }
        }
        Ok(h)
    }
}

fn leaf(tape: &mut Tape, store: &ParamStore, name: &str, trainable: bool) -> Result<Var, AutodiffError> {
    let a = store.get(name)?.clone();
    if trainable {
        tape.param(name, a)
    } else {
        Ok(tape.constant(a))
    }
}

fn mlp_values(store: &ParamStore, prefix: &str, n: usize, x: &Array) -> Result<Array, AutodiffError> {
    let mut h = x.clone();
    for i in 0..n {
        let (w, b) = layer_names(prefix, i);
        h = h.matmul(store.get(&w)?)?.add_row(store.get(&b)?);
        if i + 1 < n {
            h = h.silu();
        }
    }
    Ok(h)
}

fn one_hot(ids: impl Iterator<Item = usize>, rows: usize, count: usize) -> Array {
    let mut data = vec![0.0; rows * count];
    for (r, id) in ids.enumerate() {
        data[r * count + id] = 1.0;
    }
    Array::matrix(rows, count, data).expect("sized by construction")
}

/// Weights of the noise predictor, including both embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    config: DenoiserConfig,
    store: ParamStore,
    input_skip: Vec<f64>,
}

impl DenoiserParams {
    pub fn init(config: DenoiserConfig, seed: u64) -> Result<Self, DenoiserError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let mut table = |rows: usize| {
            let data = (0..rows * config.embed_dim).map(|_| normal.sample(&mut rng)).collect();
            Array::matrix(rows, config.embed_dim, data).expect("sized by construction")
        };
        let mut store = ParamStore::new();
        store.insert(CONTENT_TABLE, table(config.content_count));
        store.insert(STYLE_TABLE, table(config.style_count));
        init_layers(&mut store, EPS_PREFIX, &config.layer_dims(), &mut rng);
        Ok(Self { config, store, input_skip: Vec::new() })
    }

    /// Wraps an existing store after checking every expected array is present
    /// with the right shape.
    pub fn from_store(config: DenoiserConfig, store: ParamStore) -> Result<Self, DenoiserError> {
        config.validate()?;
        let mut expected = vec![
            (CONTENT_TABLE.to_string(), vec![config.content_count, config.embed_dim]),
            (STYLE_TABLE.to_string(), vec![config.style_count, config.embed_dim]),
        ];
        expected.extend(layer_shapes(EPS_PREFIX, &config.layer_dims()));
        check_shapes(&store, &expected)?;
        if store.len() != expected.len() {
            return Err(DenoiserError::InvalidConfig("unexpected extra arrays".into()));
        }
        Ok(Self { config, store, input_skip: Vec::new() })
    }

    /// Adds `coeffs[t - 1] * x_t` to the network output at timestep `t`.
    /// An empty vector disables the skip path.
    pub fn with_input_skip(mut self, coeffs: Vec<f64>) -> Self {
        self.input_skip = coeffs;
        self
    }

    pub fn input_skip(&self) -> &[f64] {
        &self.input_skip
    }

    fn skip_rows(&self, ts: &[usize]) -> Result<Option<Array>, DenoiserError> {
        if self.input_skip.is_empty() {
            return Ok(None);
        }
        let d = self.config.feature_dim;
        let mut data = Vec::with_capacity(ts.len() * d);
        for &t in ts {
            let c = *self.input_skip.get(t.wrapping_sub(1)).ok_or(DenoiserError::TimestepOutOfRange(t))?;
            data.extend(std::iter::repeat_n(c, d));
        }
        Ok(Some(Array::matrix(ts.len(), d, data)?))
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn check_condition(&self, cond: &ConditionPair) -> Result<(), DenoiserError> {
        if cond.content_id >= self.config.content_count {
            return Err(DenoiserError::IdOutOfRange {
                what: "content",
                id: cond.content_id,
                count: self.config.content_count,
            });
        }
        if cond.style_id >= self.config.style_count {
            return Err(DenoiserError::IdOutOfRange {
                what: "style",
                id: cond.style_id,
                count: self.config.style_count,
            });
        }
        Ok(())
    }

    /// The `(content, style)` embedding vectors a condition resolves to.
    pub fn embeddings(&self, cond: &ConditionPair) -> Result<(Vec<f64>, Vec<f64>), DenoiserError> {
        self.check_condition(cond)?;
        let e = self.config.embed_dim;
        let row = |name: &str, id: usize| -> Result<Vec<f64>, DenoiserError> {
            Ok(self.store.get(name)?.data()[id * e..(id + 1) * e].to_vec())
        };
        Ok((row(CONTENT_TABLE, cond.content_id)?, row(STYLE_TABLE, cond.style_id)?))
    }

    /// Registers the weights on `tape`; `trainable = false` records them as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Result<DenoiserVars, DenoiserError> {
        Ok(DenoiserVars {
            config: self.config,
            content: leaf(tape, &self.store, CONTENT_TABLE, trainable)?,
            style: leaf(tape, &self.store, STYLE_TABLE, trainable)?,
            mlp: MlpVars::register(tape, &self.store, EPS_PREFIX, 3, trainable)?,
        })
    }

    fn conditioning_inputs(
        &self,
        rows: usize,
        ts: &[usize],
        conds: &[ConditionPair],
    ) -> Result<(Array, Array, Array), DenoiserError> {
        if ts.len() != rows || conds.len() != rows {
            return Err(DenoiserError::DimensionMismatch { expected: rows, found: ts.len().min(conds.len()) });
        }
        for c in conds {
            self.check_condition(c)?;
        }
        let mut temb = Vec::with_capacity(rows * self.config.time_dim);
        for &t in ts {
            temb.extend(timestep_embedding(t, self.config.time_dim)?);
        }
        Ok((
            Array::matrix(rows, self.config.time_dim, temb)?,
            one_hot(conds.iter().map(|c| c.content_id), rows, self.config.content_count),
            one_hot(conds.iter().map(|c| c.style_id), rows, self.config.style_count),
        ))
    }

    /// Batched noise prediction without recording a tape. `x` is `[B, D]`.
    pub fn predict_batch(&self, x: &Array, ts: &[usize], conds: &[ConditionPair]) -> Result<Array, DenoiserError> {
        if x.shape().len() != 2 || x.cols() != self.config.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.config.feature_dim, found: x.cols() });
        }
        let (temb, c_hot, s_hot) = self.conditioning_inputs(x.rows(), ts, conds)?;
        let c = c_hot.matmul(self.store.get(CONTENT_TABLE)?)?;
        let s = s_hot.matmul(self.store.get(STYLE_TABLE)?)?;
        let mut tape = Tape::new();
        let parts = [x.clone(), temb, c, s].map(|a| tape.constant(a));
        let joined = tape.concat(&parts, 1)?;
        let input = tape.value(joined).clone();
        let mut out = mlp_values(&self.store, EPS_PREFIX, 3, &input)?;
        if let Some(skip) = self.skip_rows(ts)? {
            for ((o, c), xv) in out.data_mut().iter_mut().zip(skip.data()).zip(x.data()) {
                *o += c * xv;
            }
        }
        Ok(out)
    }

    /// Single-sample noise prediction.
    pub fn denoise(&self, x_t: &[f64], t: usize, cond: &ConditionPair) -> Result<Vec<f64>, DenoiserError> {
        if x_t.len() != self.config.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.config.feature_dim, found: x_t.len() });
        }
        let x = Array::row(x_t.to_vec());
        Ok(self.predict_batch(&x, &[t], &[*cond])?.into_data())
    }
}

impl NoisePredictor for DenoiserParams {
    fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn predict_noise(&self, x_t: &[f64], t: usize, cond: &ConditionPair) -> Result<Vec<f64>, DenoiserError> {
        self.denoise(x_t, t, cond)
    }
}

/// Denoiser weights registered on a tape.
#[derive(Debug, Clone)]
pub struct DenoiserVars {
    config: DenoiserConfig,
    content: Var,
    style: Var,
    mlp: MlpVars,
}

impl DenoiserVars {
    /// Taped batched forward; `x_t` is a `[B, D]` node. Gradients flow into
    /// the embedding tables through one-hot selection.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &DenoiserParams,
        x_t: Var,
        ts: &[usize],
        conds: &[ConditionPair],
    ) -> Result<Var, DenoiserError> {
        let x = tape.value(x_t);
        if x.shape().len() != 2 || x.cols() != self.config.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.config.feature_dim, found: x.cols() });
        }
        let (temb, c_hot, s_hot) = params.conditioning_inputs(x.rows(), ts, conds)?;
        let temb = tape.constant(temb);
        let c_hot = tape.constant(c_hot);
        let s_hot = tape.constant(s_hot);
        let c = tape.matmul(c_hot, self.content)?;
        let s = tape.matmul(s_hot, self.style)?;
        let input = tape.concat(&[x_t, temb, c, s], 1)?;
        let out = self.mlp.forward(tape, input)?;
        match params.skip_rows(ts)? {
            Some(skip) => {
                let skip = tape.constant(skip);
                let direct = tape.mul(skip, x_t)?;
                Ok(tape.add(out, direct)?)
            }
            None => Ok(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    pub feature_dim: usize,
    pub hidden: usize,
}

impl DiscriminatorConfig {
    pub fn new(feature_dim: usize) -> Self {
        Self { feature_dim, hidden: 128 }
    }

    fn layer_dims(&self) -> [(usize, usize); 3] {
        [(self.feature_dim, self.hidden), (self.hidden, self.hidden), (self.hidden, 1)]
    }
}

/// Unconditional scalar critic over flattened clips.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    config: DiscriminatorConfig,
    store: ParamStore,
}

impl DiscriminatorParams {
    pub fn init(config: DiscriminatorConfig, seed: u64) -> Result<Self, DenoiserError> {
        if config.feature_dim == 0 || config.hidden == 0 {
            return Err(DenoiserError::InvalidConfig(format!("zero-sized dimension in {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        init_layers(&mut store, DISC_PREFIX, &config.layer_dims(), &mut rng);
        Ok(Self { config, store })
    }

    pub fn from_store(config: DiscriminatorConfig, store: ParamStore) -> Result<Self, DenoiserError> {
        let expected = layer_shapes(DISC_PREFIX, &config.layer_dims());
        check_shapes(&store, &expected)?;
        if store.len() != expected.len() {
            return Err(DenoiserError::InvalidConfig("unexpected extra arrays".into()));
        }
        Ok(Self { config, store })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Result<DiscriminatorVars, DenoiserError> {
        Ok(DiscriminatorVars {
            feature_dim: self.config.feature_dim,
            mlp: MlpVars::register(tape, &self.store, DISC_PREFIX, 3, trainable)?,
        })
    }

    /// Scores for a `[B, D]` batch, one per row.
    pub fn score_batch(&self, x: &Array) -> Result<Vec<f64>, DenoiserError> {
        if x.shape().len() != 2 || x.cols() != self.config.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.config.feature_dim, found: x.cols() });
        }
        Ok(mlp_values(&self.store, DISC_PREFIX, 3, x)?.into_data())
    }

    pub fn discriminate(&self, x: &[f64]) -> Result<f64, DenoiserError> {
        if x.len() != self.config.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.config.feature_dim, found: x.len() });
        }
        Ok(self.score_batch(&Array::row(x.to_vec()))?[0])
    }
}

#[derive(Debug, Clone)]
pub struct DiscriminatorVars {
    feature_dim: usize,
    mlp: MlpVars,
}

impl DiscriminatorVars {
    /// `[B, D]` node in, `[B, 1]` scores out.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, DenoiserError> {
        let cols = tape.value(x).cols();
        if cols != self.feature_dim {
            return Err(DenoiserError::DimensionMismatch { expected: self.feature_dim, found: cols });
        }
        Ok(self.mlp.forward(tape, x)?)
    }
}
