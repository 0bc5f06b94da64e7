//! Procedural walking clips with exact contact labels.
//!
//! Six joints: pelvis root, two hips, two feet and the head. The root moves
//! along +X at `stride * frequency` cm/s and bobs vertically with
//! `bounce * sin(2π f t)`. Each foot is planted for the first half of its gait
//! cycle and swings forward by one stride during the second half; the feet are
//! half a cycle apart. Swing lift is `8 * sin(πs)^1.5` over swing progress `s`,
//! which keeps the foot low and slow near lift-off and landing so a
//! speed-and-height contact detector flips within a frame of the true label.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FeatureLayout, Joint, MotionClip, MotionError, Skeleton, FULL_CHANNELS};

pub const SYNTHETIC_JOINTS: [&str; 6] = ["Hips", "LeftHip", "LeftFoot", "RightHip", "RightFoot", "Head"];
pub const SYNTHETIC_FEET: [&str; 2] = ["LeftFoot", "RightFoot"];

const PELVIS_HEIGHT: f64 = 90.0;
const HIP_DROP: f64 = 8.0;
const HIP_HALF_WIDTH: f64 = 10.0;
const HEAD_HEIGHT: f64 = 60.0;
const SWING_LIFT: f64 = 8.0;
const JITTER_CM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStyle {
    /// Forward distance covered per gait cycle, cm.
    pub stride_cm: f64,
    pub frequency_hz: f64,
    /// Forward tilt of the head about the pelvis, degrees.
    pub lean_deg: f64,
    /// Amplitude of the vertical root oscillation, cm.
    pub bounce_cm: f64,
}

impl WalkStyle {
    pub fn new(stride_cm: f64, frequency_hz: f64, lean_deg: f64, bounce_cm: f64) -> Self {
        Self { stride_cm, frequency_hz, lean_deg, bounce_cm }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let bad = |m: &str| Err(MotionError::InvalidStyle(format!("{m} in {self:?}")));
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad("frequency must be positive");
        }
        if !(self.stride_cm >= 0.0 && self.stride_cm.is_finite()) {
            return bad("stride must be non-negative");
        }
        if !(self.bounce_cm >= 0.0 && self.bounce_cm.is_finite()) {
            return bad("bounce must be non-negative");
        }
        if !(self.lean_deg.abs() < 90.0) {
            return bad("lean must lie in (-90, 90) degrees");
        }
        Ok(())
    }
}

/// A generated clip plus the generator's own contact labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWalk {
    pub clip: MotionClip,
    /// `contacts[f][k]` is 1.0 while foot `k` is in stance.
    pub contacts: Vec<Vec<f64>>,
    /// Global joint positions per frame, [`SYNTHETIC_JOINTS`] order.
    pub positions: Vec<Vec<[f64; 3]>>,
}

/// The hierarchy used when exporting synthetic motion as BVH.
pub fn synthetic_skeleton() -> Skeleton {
    let joint = |name: &str, parent: Option<usize>, offset: [f64; 3]| Joint {
        name: name.to_string(),
        parent,
        offset,
        channels: FULL_CHANNELS.to_vec(),
        end_site: None,
    };
    let leg = PELVIS_HEIGHT - HIP_DROP;
    Skeleton::new(vec![
        joint("Hips", None, [0.0, 0.0, 0.0]),
        joint("LeftHip", Some(0), [0.0, -HIP_DROP, HIP_HALF_WIDTH]),
        joint("LeftFoot", Some(1), [0.0, -leg, 0.0]),
        joint("RightHip", Some(0), [0.0, -HIP_DROP, -HIP_HALF_WIDTH]),
        joint("RightFoot", Some(3), [0.0, -leg, 0.0]),
        joint("Head", Some(0), [0.0, HEAD_HEIGHT, 0.0]),
    ])
    .expect("static skeleton is valid")
}

pub fn synthetic_layout() -> FeatureLayout {
    FeatureLayout::new(
        SYNTHETIC_JOINTS.iter().map(|s| s.to_string()).collect(),
        SYNTHETIC_FEET.iter().map(|s| s.to_string()).collect(),
    )
    .expect("static layout is valid")
}

/// Foot progress in strides and stance flag at gait phase `u` (cycles).
fn foot_progress(u: f64) -> (f64, bool) {
    let k = u.floor();
    let p = u - k;
    if p < 0.5 {
        (k, true)
    } else {
        let s = (p - 0.5) * 2.0;
        // Minimum-jerk profile: zero velocity and acceleration at lift-off and landing.
        (k + s * s * s * (10.0 - 15.0 * s + 6.0 * s * s), false)
    }
}

pub fn synthetic_walk(style: WalkStyle, frames: usize, frame_time: f64, seed: u64) -> Result<SyntheticWalk, MotionError> {
    style.validate()?;
    if frames < 8 {
        return Err(MotionError::TooFewFrames { needed: 8, found: frames });
    }
    if !(frame_time > 0.0) {
        return Err(MotionError::InvalidStyle(format!("frame time must be positive, got {frame_time}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, JITTER_CM).expect("valid std");
    let WalkStyle { stride_cm, frequency_hz: f, lean_deg, bounce_cm } = style;
    let (lean_sin, lean_cos) = lean_deg.to_radians().sin_cos();

    let layout = synthetic_layout();
    let mut positions = Vec::with_capacity(frames);
    let mut contacts = Vec::with_capacity(frames);
    let mut data = Vec::with_capacity(frames * layout.dim());
    for i in 0..frames {
        let t = i as f64 * frame_time;
        let g = f * t;
        let root = [stride_cm * f * t, PELVIS_HEIGHT + bounce_cm * (2.0 * PI * g).sin(), 0.0];
        let mut feet = [[0.0; 3]; 2];
        let mut planted = [0.0; 2];
        for (k, (phase, side)) in [(0.0, 1.0), (0.5, -1.0)].into_iter().enumerate() {
            let (progress, stance) = foot_progress(g + phase);
            let height = if stance {
                0.0
            } else {
                let s = ((g + phase).fract() - 0.5) * 2.0;
                SWING_LIFT * (PI * s).sin().powf(1.5)
            };
            feet[k] = [stride_cm * (progress - phase + 0.25), height, side * HIP_HALF_WIDTH];
            planted[k] = if stance { 1.0 } else { 0.0 };
        }
        let mut joints = [
            root,
            [root[0], root[1] - HIP_DROP, HIP_HALF_WIDTH],
            feet[0],
            [root[0], root[1] - HIP_DROP, -HIP_HALF_WIDTH],
            feet[1],
            [root[0] + HEAD_HEIGHT * lean_sin, root[1] + HEAD_HEIGHT * lean_cos, 0.0],
        ];
        for p in joints.iter_mut() {
            for v in p.iter_mut() {
                *v += jitter.sample(&mut rng);
            }
        }
        let r = joints[0];
        data.extend_from_slice(&r);
        for p in &joints[1..] {
            data.extend([p[0] - r[0], p[1] - r[1], p[2] - r[2]]);
        }
        data.extend_from_slice(&planted);
        positions.push(joints.to_vec());
        contacts.push(planted.to_vec());
    }
    let clip = MotionClip::new(layout, frame_time, data, false)?;
    Ok(SyntheticWalk { clip, contacts, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{detect_foot_contacts, forward_kinematics, positions_to_channels, ContactThresholds};

    const DT: f64 = 1.0 / 30.0;

    #[test]
    fn flat_walk_keeps_root_height_up_to_jitter() {
        let w = synthetic_walk(WalkStyle::new(60.0, 1.0, 0.0, 0.0), 32, DT, 1).unwrap();
        for r in w.clip.root_trajectory() {
            assert!((r[1] - PELVIS_HEIGHT).abs() < 0.6);
        }
    }

    #[test]
    fn root_covers_stride_times_frequency() {
        let w = synthetic_walk(WalkStyle::new(60.0, 1.0, 0.0, 2.0), 31, DT, 2).unwrap();
        let traj = w.clip.root_trajectory();
        let dist = traj[30][0] - traj[0][0];
        assert!((dist - 60.0).abs() < 1.0, "{dist}");
    }

    #[test]
    fn each_foot_stands_half_of_every_cycle() {
        // 1 Hz at 40 fps: 40 frames per cycle, two full cycles
        let w = synthetic_walk(WalkStyle::new(70.0, 1.0, 0.0, 2.0), 80, 1.0 / 40.0, 3).unwrap();
        for k in 0..2 {
            for cycle in 0..2 {
                let stance: f64 = (cycle * 40..(cycle + 1) * 40).map(|f| w.contacts[f][k]).sum();
                assert_eq!(stance, 20.0);
            }
        }
        // feet alternate
        assert!(w.contacts.iter().all(|c| c[0] + c[1] == 1.0));
    }

    #[test]
    fn planted_feet_do_not_slide() {
        let w = synthetic_walk(WalkStyle::new(80.0, 1.2, 5.0, 3.0), 64, DT, 4).unwrap();
        for f in 1..64 {
            for k in 0..2 {
                if w.contacts[f][k] == 1.0 && w.contacts[f - 1][k] == 1.0 {
                    let (a, b) = (w.positions[f - 1][2 + 2 * k], w.positions[f][2 + 2 * k]);
                    assert!((a[0] - b[0]).abs() < 1.0);
                }
            }
        }
    }

    #[test]
    fn lean_moves_head_forward() {
        let upright = synthetic_walk(WalkStyle::new(60.0, 1.0, 0.0, 2.0), 16, DT, 5).unwrap();
        let leaning = synthetic_walk(WalkStyle::new(60.0, 1.0, 20.0, 2.0), 16, DT, 5).unwrap();
        let head_x = |w: &SyntheticWalk| w.clip.frame(0)[15];
        assert!(head_x(&leaning) - head_x(&upright) > 15.0);
    }

    #[test]
    fn seeded_and_validated() {
        let s = WalkStyle::new(60.0, 1.0, 0.0, 2.0);
        assert_eq!(synthetic_walk(s, 16, DT, 7).unwrap(), synthetic_walk(s, 16, DT, 7).unwrap());
        assert_ne!(synthetic_walk(s, 16, DT, 7).unwrap(), synthetic_walk(s, 16, DT, 8).unwrap());
        assert!(synthetic_walk(WalkStyle::new(60.0, 0.0, 0.0, 2.0), 16, DT, 0).is_err());
        assert!(synthetic_walk(WalkStyle::new(-1.0, 1.0, 0.0, 2.0), 16, DT, 0).is_err());
        assert!(synthetic_walk(s, 7, DT, 0).is_err());
    }

    #[test]
    fn skeleton_export_reproduces_positions() {
        let w = synthetic_walk(WalkStyle::new(60.0, 1.0, 10.0, 2.0), 12, DT, 9).unwrap();
        let sk = synthetic_skeleton();
        for pos in &w.positions {
            let ch = positions_to_channels(&sk, pos).unwrap();
            let back = forward_kinematics(&sk, &ch).unwrap();
            for (a, b) in back.iter().zip(pos) {
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn detector_agrees_with_labels() {
        let w = synthetic_walk(WalkStyle::new(60.0, 1.0, 0.0, 2.0), 64, DT, 10).unwrap();
        let feet: Vec<Vec<[f64; 3]>> = w.positions.iter().map(|p| vec![p[2], p[4]]).collect();
        let flags = detect_foot_contacts(&feet, DT, ContactThresholds::default()).unwrap();
        let agree = flags.iter().flatten().zip(w.contacts.iter().flatten()).filter(|(a, b)| a == b).count();
        assert!(agree as f64 / 128.0 >= 0.95, "{agree}/128");
    }
}
