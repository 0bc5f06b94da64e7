//! Binary checkpoint: magic `SWDM`, a version, the configuration and model
//! metadata as `key = value` text, then named little-endian f64 arrays.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{parse_lines, ConfigError, TrainConfig};
use crate::autodiff::{Array, ParamStore};
use crate::denoiser::{
    DenoiserConfig, DenoiserError, DenoiserParams, DiscriminatorConfig, DiscriminatorParams,
};
use crate::motion::{FeatureLayout, MotionError, NormStats};
use crate::schedule::ScheduleError;

pub const MAGIC: &[u8; 4] = b"SWDM";
pub const FORMAT_VERSION: u32 = 1;
const META_PREFIX: &str = "model.";
const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub meta: BTreeMap<String, String>,
    pub arrays: ParamStore,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<(), CheckpointError> {
    let v = u32::try_from(n).map_err(|_| CheckpointError::Malformed(format!("length {n} exceeds u32")))?;
    put_u32(out, v);
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| CheckpointError::Malformed("string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>, CheckpointError> {
        let mut text = self.config.to_text();
        for (k, v) in &self.meta {
            if v.contains('\n') || v.contains('#') {
                return Err(CheckpointError::Malformed(format!("metadata value for `{k}` is not single-line")));
            }
            let _ = writeln!(text, "{META_PREFIX}{k} = {v}");
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_len(&mut out, text.len())?;
        out.extend_from_slice(text.as_bytes());
        put_len(&mut out, self.arrays.len())?;
        for (name, a) in self.arrays.iter() {
            put_len(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_len(&mut out, a.shape().len())?;
            for &e in a.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for &v in a.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch { expected: FORMAT_VERSION, found: version });
        }
        let text = r.string()?;
        let mut config = TrainConfig::default();
        let mut meta = BTreeMap::new();
        for (k, v, _) in parse_lines(&text)? {
            match k.strip_prefix(META_PREFIX) {
                Some(m) => {
                    meta.insert(m.to_string(), v);
                }
                None => config.set(&k, &v)?,
            }
        }
        config.validate()?;

        let count = r.u32()?;
        let mut arrays = ParamStore::new();
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(usize::try_from(r.u64()?).map_err(|_| CheckpointError::Malformed("extent overflows".into()))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .filter(|n| n.checked_mul(8).is_some())
                .ok_or_else(|| CheckpointError::Malformed(format!("array `{name}` is too large")))?;
            let raw = r.take(n * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let array = Array::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            if arrays.insert(name.clone(), array).is_some() {
                return Err(CheckpointError::Malformed(format!("duplicate array `{name}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { config, meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::decode(&std::fs::read(path)?)
    }
}

/// Where the training clips came from, kept so samples can be exported the
/// same way.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    Bvh,
}

/// Everything needed to sample from a trained model.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub layout: FeatureLayout,
    pub frames: usize,
    pub frame_time: f64,
    pub source: DataSource,
    /// Style names by id.
    pub style_names: Vec<String>,
    pub content_names: Vec<String>,
    pub denoiser: DenoiserParams,
    pub disc: DiscriminatorParams,
    pub norm: NormStats,
}

fn meta<'a>(m: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, CheckpointError> {
    m.get(key).map(String::as_str).ok_or_else(|| CheckpointError::Malformed(format!("missing metadata `{key}`")))
}

fn meta_num<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str) -> Result<T, CheckpointError> {
    let v = meta(m, key)?;
    v.parse().map_err(|_| CheckpointError::Malformed(format!("metadata `{key}` = `{v}` is not a number")))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("joints".into(), self.layout.joints().join(","));
        meta.insert("feet".into(), self.layout.feet().join(","));
        meta.insert("frames".into(), self.frames.to_string());
        meta.insert("frame_time".into(), format!("{:?}", self.frame_time));
        meta.insert(
            "source".into(),
            match self.source {
                DataSource::Synthetic => "synthetic".into(),
                DataSource::Bvh => "bvh".into(),
            },
        );
        meta.insert("styles".into(), self.style_names.join(","));
        meta.insert("contents".into(), self.content_names.join(","));
        let mut arrays = self.denoiser.store().clone();
        arrays.extend(self.disc.store().clone());
        arrays.insert(NORM_MEAN, Array::row(self.norm.mean.clone()));
        arrays.insert(NORM_STD, Array::row(self.norm.std.clone()));
        Checkpoint { config: self.config.clone(), meta, arrays }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, CheckpointError> {
        let m = &ckpt.meta;
        let layout = FeatureLayout::new(split_list(meta(m, "joints")?), split_list(meta(m, "feet")?))?;
        let frames: usize = meta_num(m, "frames")?;
        let frame_time: f64 = meta_num(m, "frame_time")?;
        let source = match meta(m, "source")? {
            "synthetic" => DataSource::Synthetic,
            "bvh" => DataSource::Bvh,
            other => return Err(CheckpointError::Malformed(format!("unknown data source `{other}`"))),
        };
        let style_names = split_list(meta(m, "styles")?);
        let content_names = split_list(meta(m, "contents")?);

        let mut eps = ParamStore::new();
        let mut disc = ParamStore::new();
        let mut norm = (None, None);
        for (name, a) in ckpt.arrays.iter() {
            match name {
                NORM_MEAN => norm.0 = Some(a.data().to_vec()),
                NORM_STD => norm.1 = Some(a.data().to_vec()),
                n if n.starts_with("disc.") => {
                    disc.insert(n, a.clone());
                }
                n => {
                    eps.insert(n, a.clone());
                }
            }
        }
        let (Some(mean), Some(std)) = norm else {
            return Err(CheckpointError::Malformed("normalization statistics missing".into()));
        };
        if mean.len() != layout.dim() || std.len() != layout.dim() {
            return Err(CheckpointError::Malformed("normalization statistics do not match the layout".into()));
        }
        let c = &ckpt.config;
        let feature_dim = layout.dim() * frames;
        let dcfg = DenoiserConfig {
            feature_dim,
            content_count: content_names.len(),
            style_count: style_names.len(),
            embed_dim: c.embed_dim,
            time_dim: c.time_dim,
            hidden: c.hidden,
        };
        let denoiser = DenoiserParams::from_store(dcfg, eps)?.with_input_skip(c.skip_coefficients()?);
        let disc = DiscriminatorParams::from_store(DiscriminatorConfig { feature_dim, hidden: c.disc_hidden }, disc)?;
        Ok(Self {
            config: ckpt.config,
            layout,
            frames,
            frame_time,
            source,
            style_names,
            content_names,
            denoiser,
            disc,
            norm: NormStats { mean, std },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
