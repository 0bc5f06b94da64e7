//! Forward kinematics, feature extraction and foot-contact detection.

use super::{FeatureLayout, MotionClip, MotionError, Skeleton, DEFAULT_CLIP_LEN};

type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

fn axis_rotation(axis: usize, degrees: f64) -> Mat3 {
    let (s, c) = degrees.to_radians().sin_cos();
    match axis {
        0 => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        1 => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        _ => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

/// Global joint positions for one frame of raw channel values.
///
/// Each joint's local transform is a translation by `offset + position
/// channels` followed by its rotation channels composed in declaration order
/// (so the last declared rotation acts on vectors first). Angles are degrees.
pub fn forward_kinematics(skeleton: &Skeleton, frame: &[f64]) -> Result<Vec<[f64; 3]>, MotionError> {
    if frame.len() != skeleton.channel_count() {
        return Err(MotionError::DimensionMismatch { expected: skeleton.channel_count(), found: frame.len() });
    }
    let joints = skeleton.joints();
    let mut rotations: Vec<Mat3> = Vec::with_capacity(joints.len());
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(joints.len());
    let mut cursor = 0;
    for j in joints {
        let mut translation = j.offset;
        let mut local = IDENTITY;
        for &ch in &j.channels {
            let v = frame[cursor];
            cursor += 1;
            if ch.is_rotation() {
                local = mat_mul(&local, &axis_rotation(ch.axis(), v));
            } else {
                translation[ch.axis()] += v;
            }
        }
        let (pos, rot) = match j.parent {
            None => (translation, local),
            Some(p) => {
                let moved = mat_vec(&rotations[p], &translation);
                let base = positions[p];
                ([base[0] + moved[0], base[1] + moved[1], base[2] + moved[2]], mat_mul(&rotations[p], &local))
            }
        };
        positions.push(pos);
        rotations.push(rot);
    }
    Ok(positions)
}

/// Inverse of zero-rotation forward kinematics: the channel values that place
/// every joint at the given global position. Requires all three position
/// channels on every joint; rotation channels are written as zero.
pub fn positions_to_channels(skeleton: &Skeleton, positions: &[[f64; 3]]) -> Result<Vec<f64>, MotionError> {
    let joints = skeleton.joints();
    if positions.len() != joints.len() {
        return Err(MotionError::DimensionMismatch { expected: joints.len(), found: positions.len() });
    }
    let mut out = Vec::with_capacity(skeleton.channel_count());
    for (i, j) in joints.iter().enumerate() {
        let base = j.parent.map_or([0.0; 3], |p| positions[p]);
        let local = [0, 1, 2].map(|a| positions[i][a] - base[a] - j.offset[a]);
        let mut covered = [false; 3];
        for ch in &j.channels {
            if ch.is_rotation() {
                out.push(0.0);
            } else {
                covered[ch.axis()] = true;
                out.push(local[ch.axis()]);
            }
        }
        if covered != [true; 3] {
            return Err(MotionError::InvalidSkeleton(format!("joint `{}` lacks position channels", j.name)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactThresholds {
    /// Speed below which a foot may be planted, cm/s.
    pub vel_eps: f64,
    /// Height above the clip's lowest foot sample below which a foot may be planted, cm.
    pub height_eps: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        Self { vel_eps: 15.0, height_eps: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    /// Output frame count; `None` keeps the source frame count.
    pub clip_len: Option<usize>,
    pub contacts: ContactThresholds,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { clip_len: Some(DEFAULT_CLIP_LEN), contacts: ContactThresholds::default() }
    }
}

/// Contact flags (1.0 planted, 0.0 not) per frame per foot.
///
/// `feet[f][k]` is the global position of foot `k` at frame `f`. Speed uses a
/// central difference, one-sided at the ends.
pub fn detect_foot_contacts(
    feet: &[Vec<[f64; 3]>],
    frame_time: f64,
    thresholds: ContactThresholds,
) -> Result<Vec<Vec<f64>>, MotionError> {
    let n = feet.len();
    if n < 2 {
        return Err(MotionError::TooFewFrames { needed: 2, found: n });
    }
    let floor = feet.iter().flatten().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let speed = |f: usize, k: usize| {
        let (a, b) = match f {
            0 => (0, 1),
            f if f == n - 1 => (n - 2, n - 1),
            f => (f - 1, f + 1),
        };
        let dt = (b - a) as f64 * frame_time;
        let (p, q) = (feet[a][k], feet[b][k]);
        let d2: f64 = (0..3).map(|i| (q[i] - p[i]).powi(2)).sum();
        d2.sqrt() / dt
    };
    Ok((0..n)
        .map(|f| {
            (0..feet[f].len())
                .map(|k| {
                    let planted = speed(f, k) < thresholds.vel_eps && feet[f][k][1] - floor < thresholds.height_eps;
                    if planted {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

fn resample(positions: &[Vec<[f64; 3]>], len: usize) -> Vec<Vec<[f64; 3]>> {
    let src = positions.len();
    if len == src {
        return positions.to_vec();
    }
    (0..len)
        .map(|i| {
            let u = if len == 1 { 0.0 } else { i as f64 * (src - 1) as f64 / (len - 1) as f64 };
            let lo = (u.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            let w = u - lo as f64;
            positions[lo]
                .iter()
                .zip(&positions[hi])
                .map(|(a, b)| [0, 1, 2].map(|k| a[k] + w * (b[k] - a[k])))
                .collect()
        })
        .collect()
}

/// Raw-unit feature clip from BVH channel data.
///
/// The root position is copied, other joints are expressed relative to the
/// root translation (orientation stays global) and contact flags come from
/// [`detect_foot_contacts`]. With `clip_len` set, joint trajectories are
/// linearly resampled to that many frames before contacts are detected.
pub fn to_features(
    skeleton: &Skeleton,
    frames: &[Vec<f64>],
    frame_time: f64,
    foot_names: &[String],
    options: &FeatureOptions,
) -> Result<MotionClip, MotionError> {
    if frames.len() < 2 {
        return Err(MotionError::TooFewFrames { needed: 2, found: frames.len() });
    }
    let foot_idx = foot_names
        .iter()
        .map(|n| skeleton.find(n).ok_or_else(|| MotionError::UnknownJoint(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let global = frames.iter().map(|f| forward_kinematics(skeleton, f)).collect::<Result<Vec<_>, _>>()?;

    let out_len = options.clip_len.unwrap_or(frames.len());
    if out_len < 2 {
        return Err(MotionError::TooFewFrames { needed: 2, found: out_len });
    }
    let global = resample(&global, out_len);
    let out_time = frame_time * (frames.len() - 1) as f64 / (out_len - 1) as f64;

    let feet: Vec<Vec<[f64; 3]>> = global.iter().map(|g| foot_idx.iter().map(|&i| g[i]).collect()).collect();
    let contacts = detect_foot_contacts(&feet, out_time, options.contacts)?;

    let layout = FeatureLayout::new(skeleton.names(), foot_names.to_vec())?;
    let mut data = Vec::with_capacity(out_len * layout.dim());
    for (g, c) in global.iter().zip(&contacts) {
        let root = g[0];
        data.extend_from_slice(&root);
        for p in &g[1..] {
            data.extend([p[0] - root[0], p[1] - root[1], p[2] - root[2]]);
        }
        data.extend_from_slice(c);
    }
    MotionClip::new(layout, out_time, data, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{Channel, Joint, FULL_CHANNELS};

    fn chain() -> Skeleton {
        let rot = vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation];
        Skeleton::new(vec![
            Joint { name: "root".into(), parent: None, offset: [0.0; 3], channels: FULL_CHANNELS.to_vec(), end_site: None },
            Joint { name: "mid".into(), parent: Some(0), offset: [0.0, 5.0, 0.0], channels: rot.clone(), end_site: None },
            Joint { name: "tip".into(), parent: Some(1), offset: [2.0, 0.0, 1.0], channels: rot, end_site: None },
        ])
        .unwrap()
    }

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn zero_rotation_is_cumulative_offsets() {
        let s = chain();
        let mut frame = vec![0.0; s.channel_count()];
        frame[..3].copy_from_slice(&[10.0, 20.0, 30.0]);
        let g = forward_kinematics(&s, &frame).unwrap();
        assert!(close(g[1], [10.0, 25.0, 30.0]));
        assert!(close(g[2], [12.0, 25.0, 31.0]));
    }

    #[test]
    fn quarter_turn_about_z() {
        let s = chain();
        let mut frame = vec![0.0; s.channel_count()];
        frame[3] = 90.0; // root Zrotation
        let g = forward_kinematics(&s, &frame).unwrap();
        assert!(close(g[1], [-5.0, 0.0, 0.0]));
    }

    #[test]
    fn rotation_order_follows_declaration() {
        // Z then X declared: the X rotation acts on the offset first.
        let s = chain();
        let mut frame = vec![0.0; s.channel_count()];
        frame[6] = 90.0; // mid Zrotation
        frame[7] = 90.0; // mid Xrotation
        let g = forward_kinematics(&s, &frame).unwrap();
        // Rx(90)·(2,0,1) = (2,-1,0); Rz(90)·(2,-1,0) = (1,2,0); plus mid at (0,5,0).
        assert!(close(g[2], [1.0, 7.0, 0.0]), "{:?}", g[2]);
    }

    #[test]
    fn identity_pose_features_and_translation_invariance() {
        let s = chain();
        let base: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; s.channel_count()]).collect();
        let opts = FeatureOptions { clip_len: None, ..Default::default() };
        let clip = to_features(&s, &base, 0.1, &["tip".into()], &opts).unwrap();
        assert_eq!(&clip.frame(0)[3..9], &[0.0, 5.0, 0.0, 2.0, 5.0, 1.0]);

        let shifted: Vec<Vec<f64>> = base
            .iter()
            .map(|f| {
                let mut f = f.clone();
                f[0] += 10.0;
                f
            })
            .collect();
        let moved = to_features(&s, &shifted, 0.1, &["tip".into()], &opts).unwrap();
        for i in 0..clip.frames() {
            assert_eq!(&moved.frame(i)[3..], &clip.frame(i)[3..]);
            assert_eq!(moved.frame(i)[0], clip.frame(i)[0] + 10.0);
        }
    }

    #[test]
    fn to_features_errors_and_resampling() {
        let s = chain();
        let frames: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                let mut f = vec![0.0; s.channel_count()];
                f[0] = i as f64;
                f
            })
            .collect();
        let opts = FeatureOptions { clip_len: Some(9), ..Default::default() };
        let clip = to_features(&s, &frames, 0.1, &["tip".into()], &opts).unwrap();
        assert_eq!(clip.frames(), 9);
        assert!((clip.frame_time - 0.05).abs() < 1e-15);
        assert!((clip.frame(3)[0] - 1.5).abs() < 1e-12);
        assert_eq!(
            to_features(&s, &frames, 0.1, &["nope".into()], &opts),
            Err(MotionError::UnknownJoint("nope".into()))
        );
        assert!(matches!(
            to_features(&s, &frames[..1], 0.1, &[], &opts),
            Err(MotionError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn contact_detection_extremes() {
        let th = ContactThresholds::default();
        let still: Vec<Vec<[f64; 3]>> = (0..10).map(|_| vec![[1.0, 0.0, 2.0]]).collect();
        let flags = detect_foot_contacts(&still, 1.0 / 30.0, th).unwrap();
        assert!(flags.iter().all(|f| f[0] == 1.0));

        let dt = 1.0 / 30.0;
        let moving: Vec<Vec<[f64; 3]>> =
            (0..10).map(|i| vec![[2.0 * th.vel_eps * dt * i as f64, 0.0, 0.0]]).collect();
        let flags = detect_foot_contacts(&moving, dt, th).unwrap();
        assert!(flags.iter().all(|f| f[0] == 0.0));

        assert!(detect_foot_contacts(&still[..1], dt, th).is_err());
    }

    #[test]
    fn positions_round_trip_through_channels() {
        let s = Skeleton::positional(&["a".into(), "b".into(), "c".into()]).unwrap();
        let pos = vec![[1.0, 2.0, 3.0], [-4.0, 5.5, 0.0], [7.0, 8.0, -9.0]];
        let ch = positions_to_channels(&s, &pos).unwrap();
        let back = forward_kinematics(&s, &ch).unwrap();
        for (a, b) in back.iter().zip(&pos) {
            assert!(close(*a, *b));
        }
        assert!(positions_to_channels(&chain(), &pos).is_err());
    }
}
