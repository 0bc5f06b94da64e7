//! Synthetic dataset generation and dataset loading for training.

use std::path::{Path, PathBuf};

use super::{create_dir, read_text, write_text, CliError, RunManifest};
use crate::denoiser::ConditionPair;
use crate::exec::Exec;
use crate::motion::{
    compute_norm_stats, normalize, parse_bvh, read_feature_csv, synthetic_walk, to_features, write_contact_csv,
    write_feature_csv, ContactThresholds, Direction, FeatureOptions, MotionClip, MotionError, NormStats, WalkStyle,
};
use crate::training::{DataSource, TrainConfig, TrainingSet};

pub const INDEX_FILE: &str = "index.csv";
pub const STYLES_FILE: &str = "styles.csv";
pub const NORM_FILE: &str = "norm_stats.csv";
const CLIP_DIR: &str = "clips";
const DEFAULT_CONTENT: &str = "walk";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedStyle {
    pub name: String,
    pub style: WalkStyle,
}

/// Four walks that differ in pace, cadence, posture and bounce.
pub fn default_style_grid() -> Vec<NamedStyle> {
    let s = |name: &str, stride, freq, lean, bounce| NamedStyle {
        name: name.to_string(),
        style: WalkStyle::new(stride, freq, lean, bounce),
    };
    vec![
        s("stroll", 50.0, 1.0, 0.0, 2.0),
        s("brisk", 70.0, 1.25, 5.0, 3.0),
        s("march", 90.0, 1.5, -4.0, 4.0),
        s("bound", 110.0, 1.75, 10.0, 5.0),
    ]
}

/// Parses `name:stride,frequency,lean,bounce;name:...`.
pub fn parse_style_grid(spec: &str) -> Result<Vec<NamedStyle>, CliError> {
    let mut out: Vec<NamedStyle> = Vec::new();
    for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || CliError::Invalid(format!("style `{item}` is not `name:stride,frequency,lean,bounce`"));
        let (name, params) = item.split_once(':').ok_or_else(bad)?;
        let name = name.trim();
        if name.is_empty() || name.contains(',') {
            return Err(bad());
        }
        let v = params.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
        let [stride, freq, lean, bounce] = v[..] else { return Err(bad()) };
        let style = WalkStyle::new(stride, freq, lean, bounce);
        style.validate()?;
        if out.iter().any(|s| s.name == name) {
            return Err(CliError::Invalid(format!("style `{name}` listed twice")));
        }
        out.push(NamedStyle { name: name.to_string(), style });
    }
    if out.is_empty() {
        return Err(CliError::Invalid("style grid is empty".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GendataOptions {
    pub styles: Vec<NamedStyle>,
    pub per_style: usize,
    pub seed: u64,
    pub clip_len: usize,
    pub frame_time: f64,
    pub out: PathBuf,
    pub exec: Exec,
}

fn clip_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Writes `clips/clip_NNNN.csv` with a matching `_contacts.csv`, the index,
/// the style table and normalization statistics. Returns the clip count.
pub fn gendata(opts: &GendataOptions) -> Result<usize, CliError> {
    if opts.styles.is_empty() {
        return Err(CliError::Invalid("style grid is empty".into()));
    }
    if opts.per_style == 0 {
        return Err(CliError::Invalid("need at least one clip per style".into()));
    }
    let clip_dir = opts.out.join(CLIP_DIR);
    create_dir(&clip_dir)?;

    let n = opts.styles.len() * opts.per_style;
    let walks = opts.exec.try_map_range(n, |i| {
        let style = opts.styles[i / opts.per_style].style;
        synthetic_walk(style, opts.clip_len, opts.frame_time, clip_seed(opts.seed, i))
    })?;

    let mut manifest = RunManifest::new("gendata", opts.seed);
    manifest.config.insert("styles".into(), style_spec(&opts.styles));
    manifest.config.insert("per_style".into(), opts.per_style.to_string());
    manifest.config.insert("clip_len".into(), opts.clip_len.to_string());
    manifest.config.insert("frame_time".into(), format!("{:?}", opts.frame_time));

    let mut index = String::from("clip,features,contacts,content_id,content,style_id,style\n");
    let mut reparsed = Vec::with_capacity(n);
    for (i, w) in walks.iter().enumerate() {
        let style_id = i / opts.per_style;
        let features = format!("{CLIP_DIR}/clip_{i:04}.csv");
        let contacts = format!("{CLIP_DIR}/clip_{i:04}_contacts.csv");
        let text = write_feature_csv(&w.clip);
        write_text(&opts.out.join(&features), &text)?;
        write_text(&opts.out.join(&contacts), &write_contact_csv(w.clip.layout.feet(), &w.contacts))?;
        index.push_str(&format!("{i},{features},{contacts},0,{DEFAULT_CONTENT},{style_id},{}\n", opts.styles[style_id].name));
        // statistics come from what was written, so they re-derive exactly from the files
        reparsed.push(read_feature_csv(&text, opts.frame_time)?);
        manifest.outputs.extend([features, contacts]);
    }
    write_text(&opts.out.join(INDEX_FILE), &index)?;

    let mut styles = String::from("style_id,name,stride_cm,frequency_hz,lean_deg,bounce_cm\n");
    for (i, s) in opts.styles.iter().enumerate() {
        let w = s.style;
        styles.push_str(&format!(
            "{i},{},{:?},{:?},{:?},{:?}\n",
            s.name, w.stride_cm, w.frequency_hz, w.lean_deg, w.bounce_cm
        ));
    }
    write_text(&opts.out.join(STYLES_FILE), &styles)?;
    write_text(&opts.out.join(NORM_FILE), &norm_text(&reparsed[0], &compute_norm_stats(&reparsed)?))?;

    manifest.outputs.extend([INDEX_FILE.into(), STYLES_FILE.into(), NORM_FILE.into()]);
    manifest.write(&opts.out)?;
    Ok(n)
}

fn style_spec(styles: &[NamedStyle]) -> String {
    styles
        .iter()
        .map(|s| {
            let w = s.style;
            format!("{}:{:?},{:?},{:?},{:?}", s.name, w.stride_cm, w.frequency_hz, w.lean_deg, w.bounce_cm)
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn norm_text(sample: &MotionClip, stats: &NormStats) -> String {
    let mut out = String::from("channel,mean,std\n");
    for ((name, m), s) in sample.layout.channel_names().iter().zip(&stats.mean).zip(&stats.std) {
        out.push_str(&format!("{name},{m:?},{s:?}\n"));
    }
    out
}

fn parse_norm(path: &Path) -> Result<NormStats, CliError> {
    let mut stats = NormStats { mean: Vec::new(), std: Vec::new() };
    for (line, cols) in csv_rows(path, 3)? {
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Data { path: path.to_path_buf(), source: MotionError::Csv { line, message: format!("bad number `{s}`") } })
        };
        stats.mean.push(num(&cols[1])?);
        stats.std.push(num(&cols[2])?);
    }
    Ok(stats)
}

/// Data rows (after the header) split on commas, with 1-based line numbers.
fn csv_rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, l) in text.lines().enumerate().skip(1) {
        if l.trim().is_empty() {
            continue;
        }
        let cols: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
        if cols.len() != width {
            return Err(CliError::Data {
                path: path.to_path_buf(),
                source: MotionError::Csv { line: i + 1, message: format!("expected {width} columns, found {}", cols.len()) },
            });
        }
        rows.push((i + 1, cols));
    }
    Ok(rows)
}

fn parse_usize(path: &Path, line: usize, s: &str) -> Result<usize, CliError> {
    s.parse().map_err(|_| CliError::Data {
        path: path.to_path_buf(),
        source: MotionError::Csv { line, message: format!("bad integer `{s}`") },
    })
}

/// A training set plus what is needed to interpret it.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub set: TrainingSet,
    /// Raw-unit clips, aligned with `set.clips`.
    pub raw: Vec<MotionClip>,
    pub norm: NormStats,
    pub frame_time: f64,
    pub source: DataSource,
    pub content_names: Vec<String>,
    pub style_names: Vec<String>,
    /// Generator parameters by style id; synthetic data only.
    pub styles: Option<Vec<WalkStyle>>,
}

/// Reads a generated dataset (a directory with `index.csv`) or, failing
/// that, every `.bvh` file in the directory. BVH clips take their style from
/// the file name up to the first `_` and share one content label.
pub fn load_dataset(dir: &Path, config: &TrainConfig) -> Result<LoadedDataset, CliError> {
    if dir.join(INDEX_FILE).is_file() {
        load_generated(dir, config)
    } else {
        load_bvh_dir(dir, config)
    }
}

fn intern(names: &mut Vec<String>, name: &str) -> usize {
    names.iter().position(|n| n == name).unwrap_or_else(|| {
        names.push(name.to_string());
        names.len() - 1
    })
}

fn load_generated(dir: &Path, config: &TrainConfig) -> Result<LoadedDataset, CliError> {
    let index_path = dir.join(INDEX_FILE);
    let mut raw = Vec::new();
    let mut conds = Vec::new();
    let mut content_names: Vec<String> = Vec::new();
    let mut style_names: Vec<String> = Vec::new();
    for (line, cols) in csv_rows(&index_path, 7)? {
        let content_id = parse_usize(&index_path, line, &cols[3])?;
        let style_id = parse_usize(&index_path, line, &cols[5])?;
        for (names, id, name) in [(&mut content_names, content_id, &cols[4]), (&mut style_names, style_id, &cols[6])] {
            if names.len() <= id {
                names.resize(id + 1, String::new());
            }
            names[id] = name.clone();
        }
        let path = dir.join(&cols[1]);
        let clip = read_feature_csv(&read_text(&path)?, config.frame_time)
            .map_err(|source| CliError::Data { path: path.clone(), source })?;
        raw.push(clip);
        conds.push(ConditionPair::new(content_id, style_id));
    }
    if raw.is_empty() {
        return Err(CliError::Motion(MotionError::EmptyDataset));
    }
    if let Some(id) = style_names.iter().chain(&content_names).position(String::is_empty) {
        return Err(CliError::Invalid(format!("{}: label ids are not contiguous (gap near id {id})", index_path.display())));
    }

    let styles_path = dir.join(STYLES_FILE);
    let styles = if styles_path.is_file() {
        let mut by_id = vec![None; style_names.len()];
        for (line, cols) in csv_rows(&styles_path, 6)? {
            let id = parse_usize(&styles_path, line, &cols[0])?;
            let v = cols[2..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Invalid(format!("{}:{line}: bad style parameters", styles_path.display())))?;
            if let Some(slot) = by_id.get_mut(id) {
                *slot = Some(WalkStyle::new(v[0], v[1], v[2], v[3]));
            }
        }
        by_id.into_iter().collect::<Option<Vec<_>>>()
    } else {
        None
    };

    let norm = parse_norm(&dir.join(NORM_FILE))?;
    finish(raw, conds, norm, config.frame_time, DataSource::Synthetic, content_names, style_names, styles, config)
}

fn load_bvh_dir(dir: &Path, config: &TrainConfig) -> Result<LoadedDataset, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("bvh")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Invalid(format!("{}: neither {INDEX_FILE} nor any .bvh file found", dir.display())));
    }
    let options = FeatureOptions {
        clip_len: Some(config.clip_len),
        contacts: ContactThresholds { vel_eps: config.vel_eps, height_eps: config.height_eps },
    };
    let mut raw = Vec::new();
    let mut conds = Vec::new();
    let mut style_names = Vec::new();
    for path in &paths {
        let data_err = |source| CliError::Data { path: path.clone(), source };
        let motion = parse_bvh(&read_text(path)?).map_err(data_err)?;
        let clip = to_features(&motion.skeleton, &motion.frames, motion.frame_time, &config.foot_joints, &options)
            .map_err(data_err)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("clip");
        let style = stem.split('_').next().filter(|s| !s.is_empty()).unwrap_or(stem);
        conds.push(ConditionPair::new(0, intern(&mut style_names, style)));
        raw.push(clip);
    }
    let frame_time = raw[0].frame_time;
    let norm = compute_norm_stats(&raw)?;
    finish(raw, conds, norm, frame_time, DataSource::Bvh, vec![DEFAULT_CONTENT.into()], style_names, None, config)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    raw: Vec<MotionClip>,
    conds: Vec<ConditionPair>,
    norm: NormStats,
    frame_time: f64,
    source: DataSource,
    content_names: Vec<String>,
    style_names: Vec<String>,
    styles: Option<Vec<WalkStyle>>,
    config: &TrainConfig,
) -> Result<LoadedDataset, CliError> {
    let layout = raw[0].layout.clone();
    let frames = raw[0].frames();
    if frames != config.clip_len {
        return Err(CliError::Invalid(format!("clips have {frames} frames but clip_len is {}", config.clip_len)));
    }
    let mut clips = Vec::with_capacity(raw.len());
    for c in &raw {
        if c.layout != layout || c.frames() != frames {
            return Err(CliError::Invalid("clips do not share one feature layout and length".into()));
        }
        clips.push(normalize(c, &norm, Direction::Forward)?.into_flat());
    }
    let set = TrainingSet {
        layout,
        frames,
        clips,
        conds,
        content_count: content_names.len(),
        style_count: style_names.len(),
    };
    Ok(LoadedDataset { set, raw, norm, frame_time, source, content_names, style_names, styles })
}
