//! Motion data: skeletons, BVH text, per-frame features and the synthetic
//! walk dataset.
//!
//! Coordinates are centimeters with +Y up and +X the walking direction.

mod bvh;
mod csv;
mod kinematics;
mod norm;
mod synthetic;

pub use bvh::{parse_bvh, write_bvh, BvhError, BvhMotion};
pub use csv::{read_contact_csv, read_feature_csv, write_contact_csv, write_feature_csv};
pub use kinematics::{
    detect_foot_contacts, forward_kinematics, positions_to_channels, to_features, ContactThresholds, FeatureOptions,
};
pub use norm::{compute_norm_stats, normalize, Direction, NormStats, STD_FLOOR};
pub use synthetic::{synthetic_layout, synthetic_skeleton, synthetic_walk, SyntheticWalk, WalkStyle, SYNTHETIC_FEET, SYNTHETIC_JOINTS};

use std::ops::Range;

use thiserror::Error;

/// Default fixed clip length in frames.
pub const DEFAULT_CLIP_LEN: usize = 32;
/// Default frame duration in seconds.
pub const DEFAULT_FRAME_TIME: f64 = 1.0 / 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error(transparent)]
    Bvh(#[from] BvhError),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("need at least {needed} frames, got {found}")]
    TooFewFrames { needed: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid walk style: {0}")]
    InvalidStyle(String),
    #[error("invalid feature layout: {0}")]
    InvalidLayout(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    /// Axis index (0 = X) the channel acts along or about.
    pub fn axis(self) -> usize {
        match self {
            Channel::Xposition | Channel::Xrotation => 0,
            Channel::Yposition | Channel::Yrotation => 1,
            Channel::Zposition | Channel::Zrotation => 2,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }
}

/// The full six-channel layout written for generated skeletons.
pub const FULL_CHANNELS: [Channel; 6] = [
    Channel::Xposition,
    Channel::Yposition,
    Channel::Zposition,
    Channel::Zrotation,
    Channel::Xrotation,
    Channel::Yrotation,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    /// Offset of a terminating `End Site`, if the joint has one.
    pub end_site: Option<[f64; 3]>,
}

/// Joint hierarchy in file (topological) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    /// Validates a single root at index 0, parents preceding children and
    /// finite offsets.
    pub fn new(joints: Vec<Joint>) -> Result<Self, MotionError> {
        if joints.is_empty() {
            return Err(MotionError::InvalidSkeleton("no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(MotionError::InvalidSkeleton("first joint must be the root".into())),
                (_, None) => return Err(MotionError::InvalidSkeleton(format!("second root `{}`", j.name))),
                (_, Some(p)) if p >= i => {
                    return Err(MotionError::InvalidSkeleton(format!("joint `{}` precedes its parent", j.name)))
                }
                _ => {}
            }
            let finite = j.offset.iter().chain(j.end_site.iter().flatten()).all(|v| v.is_finite());
            if !finite {
                return Err(MotionError::InvalidSkeleton(format!("non-finite offset on `{}`", j.name)));
            }
        }
        Ok(Self { joints })
    }

    /// Root plus direct children, every joint carrying all six channels and a
    /// zero offset. Used to export positions when no real hierarchy is known.
    pub fn positional(names: &[String]) -> Result<Self, MotionError> {
        let joints = names
            .iter()
            .enumerate()
            .map(|(i, n)| Joint {
                name: n.clone(),
                parent: (i > 0).then_some(0),
                offset: [0.0; 3],
                channels: FULL_CHANNELS.to_vec(),
                end_site: None,
            })
            .collect();
        Self::new(joints)
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }
}

/// Which channels of a per-frame feature vector hold what.
///
/// Order: root position (3), root-relative position of each non-root joint
/// (3 each), one contact flag per tracked foot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    joints: Vec<String>,
    feet: Vec<String>,
}

impl FeatureLayout {
    pub fn new(joints: Vec<String>, feet: Vec<String>) -> Result<Self, MotionError> {
        if joints.is_empty() {
            return Err(MotionError::InvalidLayout("at least the root joint is required".into()));
        }
        Ok(Self { joints, feet })
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn feet(&self) -> &[String] {
        &self.feet
    }

    pub fn dim(&self) -> usize {
        3 * self.joints.len() + self.feet.len()
    }

    pub fn root_channels(&self) -> Range<usize> {
        0..3
    }

    /// Channels of joint `j` (`j >= 1`; the root uses [`root_channels`](Self::root_channels)).
    pub fn joint_channels(&self, j: usize) -> Range<usize> {
        let start = 3 * j;
        start..start + 3
    }

    pub fn contact_channels(&self) -> Range<usize> {
        let start = 3 * self.joints.len();
        start..start + self.feet.len()
    }

    /// CSV header names: `<joint>_x/_y/_z` per joint (root first), then
    /// `contact_<foot>` per foot.
    pub fn channel_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for j in &self.joints {
            for axis in ["x", "y", "z"] {
                names.push(format!("{j}_{axis}"));
            }
        }
        names.extend(self.feet.iter().map(|f| format!("contact_{f}")));
        names
    }

    /// Inverse of [`channel_names`](Self::channel_names).
    pub fn from_channel_names(names: &[String]) -> Result<Self, MotionError> {
        let bad = |m: String| MotionError::InvalidLayout(m);
        let mut joints = Vec::new();
        let mut i = 0;
        while i < names.len() && !names[i].starts_with("contact_") {
            let base = names[i]
                .strip_suffix("_x")
                .ok_or_else(|| bad(format!("expected an _x channel, got `{}`", names[i])))?;
            if names.get(i + 1).map(String::as_str) != Some(&format!("{base}_y"))
                || names.get(i + 2).map(String::as_str) != Some(&format!("{base}_z"))
            {
                return Err(bad(format!("incomplete channel triple for `{base}`")));
            }
            joints.push(base.to_string());
            i += 3;
        }
        let mut feet = Vec::new();
        for n in &names[i..] {
            let foot = n
                .strip_prefix("contact_")
                .ok_or_else(|| bad(format!("unexpected channel `{n}` after contacts")))?;
            feet.push(foot.to_string());
        }
        Self::new(joints, feet)
    }
}

/// Fixed-length sequence of per-frame feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub layout: FeatureLayout,
    pub frame_time: f64,
    /// Whether `data` is in normalized units rather than raw centimeters.
    pub normalized: bool,
    data: Vec<f64>,
}

impl MotionClip {
    pub fn new(layout: FeatureLayout, frame_time: f64, data: Vec<f64>, normalized: bool) -> Result<Self, MotionError> {
        let d = layout.dim();
        if d == 0 || data.len() % d != 0 {
            return Err(MotionError::DimensionMismatch { expected: d, found: data.len() });
        }
        Ok(Self { layout, frame_time, normalized, data })
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.layout.dim()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    /// All frames concatenated; this is the vector the diffusion model sees.
    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Global positions of every layout joint per frame (raw units only).
    pub fn global_positions(&self) -> Vec<Vec<[f64; 3]>> {
        (0..self.frames())
            .map(|f| {
                let row = self.frame(f);
                let root = [row[0], row[1], row[2]];
                let mut out = vec![root];
                for j in 1..self.layout.joints.len() {
                    let c = self.layout.joint_channels(j);
                    out.push([root[0] + row[c.start], root[1] + row[c.start + 1], root[2] + row[c.start + 2]]);
                }
                out
            })
            .collect()
    }

    /// Root trajectory per frame.
    pub fn root_trajectory(&self) -> Vec<[f64; 3]> {
        (0..self.frames()).map(|f| {
            let r = self.frame(f);
            [r[0], r[1], r[2]]
        }).collect()
    }

    /// Contact channel values per frame.
    pub fn contacts(&self) -> Vec<Vec<f64>> {
        let c = self.layout.contact_channels();
        (0..self.frames()).map(|f| self.frame(f)[c.clone()].to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(j: usize, feet: usize) -> FeatureLayout {
        FeatureLayout::new((0..j).map(|i| format!("j{i}")).collect(), (0..feet).map(|i| format!("f{i}")).collect())
            .unwrap()
    }

    proptest! {
        #[test]
        fn layout_indices_partition_the_vector(j in 1usize..12, feet in 0usize..5) {
            let l = layout(j, feet);
            let mut all: Vec<usize> = l.root_channels().collect();
            for k in 1..j {
                all.extend(l.joint_channels(k));
            }
            all.extend(l.contact_channels());
            prop_assert_eq!(all, (0..l.dim()).collect::<Vec<_>>());
            prop_assert_eq!(l.dim(), 3 + 3 * (j - 1) + feet);
        }
    }

    #[test]
    fn channel_names_round_trip() {
        let l = FeatureLayout::new(
            vec!["root".into(), "LeftFoot".into(), "Head".into()],
            vec!["LeftFoot".into()],
        )
        .unwrap();
        let names = l.channel_names();
        assert_eq!(names.len(), l.dim());
        assert_eq!(FeatureLayout::from_channel_names(&names).unwrap(), l);
        assert!(FeatureLayout::from_channel_names(&["root_x".into()]).is_err());
        assert!(FeatureLayout::from_channel_names(&[]).is_err());
    }

    #[test]
    fn skeleton_invariants() {
        let j = |name: &str, parent| Joint {
            name: name.into(),
            parent,
            offset: [0.0; 3],
            channels: vec![],
            end_site: None,
        };
        assert!(Skeleton::new(vec![j("a", None), j("b", Some(0))]).is_ok());
        assert!(Skeleton::new(vec![j("a", None), j("b", None)]).is_err());
        assert!(Skeleton::new(vec![j("a", Some(0))]).is_err());
        assert!(Skeleton::new(vec![j("a", None), j("b", Some(1))]).is_err());
        let mut bad = j("c", Some(0));
        bad.offset[1] = f64::NAN;
        assert!(Skeleton::new(vec![j("a", None), bad]).is_err());
    }
}
