//! BVH (Biovision Hierarchy) reading and writing.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Channel, Joint, MotionError, Skeleton};

/// Parse failures; every variant names the offending line (1-based).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhError {
    #[error("line {line}: malformed hierarchy: {message}")]
    Hierarchy { line: usize, message: String },
    #[error("line {line}: missing MOTION section")]
    MissingMotion { line: usize },
    #[error("line {line}: malformed motion header: {message}")]
    MotionHeader { line: usize, message: String },
    #[error("line {line}: frame {frame} has {found} values, expected {expected}")]
    ChannelCount { line: usize, frame: usize, expected: usize, found: usize },
    #[error("line {line}: non-numeric value `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: header declares {declared} frames, file has {found}")]
    FrameCount { line: usize, declared: usize, found: usize },
    #[error("frame {frame} has {found} values, skeleton has {expected} channels")]
    WidthMismatch { frame: usize, expected: usize, found: usize },
}

impl BvhError {
    pub fn line(&self) -> Option<usize> {
        match self {
            BvhError::Hierarchy { line, .. }
            | BvhError::MissingMotion { line }
            | BvhError::MotionHeader { line, .. }
            | BvhError::ChannelCount { line, .. }
            | BvhError::NonNumeric { line, .. }
            | BvhError::FrameCount { line, .. } => Some(*line),
            BvhError::WidthMismatch { .. } => None,
        }
    }
}

/// A parsed BVH file: hierarchy plus raw channel values per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BvhMotion {
    pub skeleton: Skeleton,
    /// `frames[f]` holds every channel of frame `f`, in skeleton order.
    pub frames: Vec<Vec<f64>>,
    pub frame_time: f64,
}

impl BvhMotion {
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.frame_time
    }
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(&'a str, usize)> {
        let t = self.items.get(self.pos).copied();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.items.get(self.pos).copied()
    }

    fn line(&self) -> usize {
        self.peek().map_or(self.last_line, |(_, l)| l)
    }

    fn expect(&mut self, want: &str) -> Result<usize, BvhError> {
        match self.next() {
            Some((t, l)) if t == want => Ok(l),
            Some((t, l)) => Err(hier(l, format!("expected `{want}`, found `{t}`"))),
            None => Err(hier(self.last_line, format!("expected `{want}`, found end of file"))),
        }
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        match self.next() {
            Some((t, l)) => t.parse().map_err(|_| BvhError::NonNumeric { line: l, token: t.to_string() }),
            None => Err(hier(self.last_line, "expected a number, found end of file".into())),
        }
    }

    fn vec3(&mut self) -> Result<[f64; 3], BvhError> {
        Ok([self.number()?, self.number()?, self.number()?])
    }
}

fn hier(line: usize, message: String) -> BvhError {
    BvhError::Hierarchy { line, message }
}

/// Parses BVH text. Rotation channel order is kept exactly as declared.
pub fn parse_bvh(text: &str) -> Result<BvhMotion, MotionError> {
    let lines: Vec<&str> = text.lines().collect();
    let last_line = lines.len().max(1);
    let mut items = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        items.extend(l.split_whitespace().map(|t| (t, i + 1)));
    }
    let mut toks = Tokens { items, pos: 0, last_line };

    toks.expect("HIERARCHY")?;
    let root_line = toks.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut toks, &mut joints, None, root_line)?;

    match toks.next() {
        Some(("MOTION", _)) => {}
        Some((t, l)) => return Err(hier(l, format!("unexpected `{t}` after hierarchy")).into()),
        None => return Err(BvhError::MissingMotion { line: last_line }.into()),
    }
    let header = |l: usize, m: &str| BvhError::MotionHeader { line: l, message: m.to_string() };
    let frames_line = toks.line();
    match toks.next() {
        Some(("Frames:", _)) => {}
        _ => return Err(header(frames_line, "expected `Frames:`").into()),
    }
    let declared = match toks.next() {
        Some((t, l)) => t.parse::<usize>().map_err(|_| BvhError::NonNumeric { line: l, token: t.to_string() })?,
        None => return Err(header(last_line, "missing frame count").into()),
    };
    let time_line = toks.line();
    if !matches!((toks.next(), toks.next()), (Some(("Frame", _)), Some(("Time:", _)))) {
        return Err(header(time_line, "expected `Frame Time:`").into());
    }
    let (ft_tok, ft_line) = toks.next().ok_or_else(|| header(last_line, "missing frame time"))?;
    let frame_time: f64 =
        ft_tok.parse().map_err(|_| BvhError::NonNumeric { line: ft_line, token: ft_tok.to_string() })?;

    let skeleton = Skeleton::new(joints).map_err(|e| hier(root_line, e.to_string()))?;
    let width = skeleton.channel_count();
    let mut frames = Vec::with_capacity(declared);
    for (idx, raw) in lines.iter().enumerate().skip(ft_line) {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        if frames.len() == declared {
            return Err(BvhError::FrameCount { line, declared, found: frames.len() + 1 }.into());
        }
        let values = raw
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| BvhError::NonNumeric { line, token: t.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != width {
            return Err(BvhError::ChannelCount { line, frame: frames.len(), expected: width, found: values.len() }.into());
        }
        frames.push(values);
    }
    if frames.len() != declared {
        return Err(BvhError::FrameCount { line: last_line, declared, found: frames.len() }.into());
    }
    Ok(BvhMotion { skeleton, frames, frame_time })
}

fn parse_joint(
    toks: &mut Tokens<'_>,
    joints: &mut Vec<Joint>,
    parent: Option<usize>,
    line: usize,
) -> Result<(), BvhError> {
    let mut name_parts = Vec::new();
    loop {
        match toks.peek() {
            Some(("{", _)) => break,
            Some((t, _)) => {
                name_parts.push(t);
                toks.next();
            }
            None => return Err(hier(line, "unterminated joint declaration".into())),
        }
    }
    if name_parts.is_empty() {
        return Err(hier(line, "joint without a name".into()));
    }
    toks.expect("{")?;
    let index = joints.len();
    joints.push(Joint {
        name: name_parts.join(" "),
        parent,
        offset: [0.0; 3],
        channels: Vec::new(),
        end_site: None,
    });
    let mut saw_offset = false;
    loop {
        let Some((tok, l)) = toks.next() else {
            return Err(hier(toks.last_line, format!("unclosed block for `{}`", joints[index].name)));
        };
        match tok {
            "OFFSET" => {
                joints[index].offset = toks.vec3()?;
                saw_offset = true;
            }
            "CHANNELS" => {
                let n_tok = toks.next().ok_or_else(|| hier(l, "missing channel count".into()))?;
                let n: usize = n_tok
                    .0
                    .parse()
                    .map_err(|_| hier(n_tok.1, format!("bad channel count `{}`", n_tok.0)))?;
                let mut channels = Vec::with_capacity(n);
                for _ in 0..n {
                    let (c, cl) = toks.next().ok_or_else(|| hier(l, "missing channel name".into()))?;
                    channels.push(Channel::parse(c).ok_or_else(|| hier(cl, format!("unknown channel `{c}`")))?);
                }
                joints[index].channels = channels;
            }
            "JOINT" => parse_joint(toks, joints, Some(index), l)?,
            "End" => {
                toks.expect("Site")?;
                toks.expect("{")?;
                toks.expect("OFFSET")?;
                joints[index].end_site = Some(toks.vec3()?);
                toks.expect("}")?;
            }
            "}" => break,
            other => return Err(hier(l, format!("unexpected token `{other}`"))),
        }
    }
    if !saw_offset {
        return Err(hier(line, format!("joint `{}` has no OFFSET", joints[index].name)));
    }
    Ok(())
}

/// Serializes to BVH with six decimal places.
pub fn write_bvh(skeleton: &Skeleton, frames: &[Vec<f64>], frame_time: f64) -> Result<String, MotionError> {
    let width = skeleton.channel_count();
    if let Some((frame, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != width) {
        return Err(BvhError::WidthMismatch { frame, expected: width, found: f.len() }.into());
    }
    let joints = skeleton.joints();
    let mut children = vec![Vec::new(); joints.len()];
    for (i, j) in joints.iter().enumerate() {
        if let Some(p) = j.parent {
            children[p].push(i);
        }
    }
    let mut out = String::from("HIERARCHY\n");
    let mut order = Vec::with_capacity(joints.len());
    write_joint(&mut out, joints, &children, 0, 0, &mut order);
    let mut starts = Vec::with_capacity(joints.len());
    let mut next = 0;
    for j in joints {
        starts.push(next);
        next += j.channels.len();
    }
    // The file lists channels in hierarchy (depth-first) order, which need
    // not match the skeleton's storage order.
    let columns: Vec<usize> =
        order.iter().flat_map(|&i| starts[i]..starts[i] + joints[i].channels.len()).collect();
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", frames.len());
    let _ = writeln!(out, "Frame Time: {frame_time:.6}");
    for f in frames {
        let row: Vec<String> = columns.iter().map(|&c| format!("{:.6}", f[c])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

fn write_joint(out: &mut String, joints: &[Joint], children: &[Vec<usize>], i: usize, depth: usize, order: &mut Vec<usize>) {
    order.push(i);
    let pad = "\t".repeat(depth);
    let j = &joints[i];
    let kind = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let vec3 = |v: &[f64; 3]| format!("{:.6} {:.6} {:.6}", v[0], v[1], v[2]);
    let _ = writeln!(out, "{pad}{kind} {}", j.name);
    let _ = writeln!(out, "{pad}{{");
    let _ = writeln!(out, "{pad}\tOFFSET {}", vec3(&j.offset));
    let names: Vec<&str> = j.channels.iter().map(|c| c.name()).collect();
    if names.is_empty() {
        let _ = writeln!(out, "{pad}\tCHANNELS 0");
    } else {
        let _ = writeln!(out, "{pad}\tCHANNELS {} {}", names.len(), names.join(" "));
    }
    for &c in &children[i] {
        write_joint(out, joints, children, c, depth + 1, order);
    }
    if let Some(end) = &j.end_site {
        let _ = writeln!(out, "{pad}\tEnd Site");
        let _ = writeln!(out, "{pad}\t{{");
        let _ = writeln!(out, "{pad}\t\tOFFSET {}", vec3(end));
        let _ = writeln!(out, "{pad}\t}}");
    }
    let _ = writeln!(out, "{pad}}}");
}
