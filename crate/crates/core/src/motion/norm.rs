use super::{MotionClip, MotionError};

/// Lower bound applied to every per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension mean and (population) standard deviation, raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes a flat run of frames in place.
    pub fn forward_flat(&self, values: &mut [f64]) -> Result<(), MotionError> {
        self.check(values.len())?;
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            *v = (*v - self.mean[i % d]) / self.std[i % d];
        }
        Ok(())
    }

    /// Undoes [`forward_flat`](Self::forward_flat) in place.
    pub fn inverse_flat(&self, values: &mut [f64]) -> Result<(), MotionError> {
        self.check(values.len())?;
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            *v = *v * self.std[i % d] + self.mean[i % d];
        }
        Ok(())
    }

    fn check(&self, len: usize) -> Result<(), MotionError> {
        if self.dim() == 0 || len % self.dim() != 0 {
            return Err(MotionError::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }
}

/// Pools every frame of every clip; single pass (Welford).
pub fn compute_norm_stats(dataset: &[MotionClip]) -> Result<NormStats, MotionError> {
    let first = dataset.first().ok_or(MotionError::EmptyDataset)?;
    let d = first.dim();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut count = 0usize;
    for clip in dataset {
        if clip.dim() != d {
            return Err(MotionError::DimensionMismatch { expected: d, found: clip.dim() });
        }
        for f in 0..clip.frames() {
            count += 1;
            for (k, &x) in clip.frame(f).iter().enumerate() {
                let delta = x - mean[k];
                mean[k] += delta / count as f64;
                m2[k] += delta * (x - mean[k]);
            }
        }
    }
    if count == 0 {
        return Err(MotionError::EmptyDataset);
    }
    let std = m2.iter().map(|s| (s / count as f64).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

pub fn normalize(clip: &MotionClip, stats: &NormStats, direction: Direction) -> Result<MotionClip, MotionError> {
    if stats.dim() != clip.dim() {
        return Err(MotionError::DimensionMismatch { expected: clip.dim(), found: stats.dim() });
    }
    let mut data = clip.flat().to_vec();
    match direction {
        Direction::Forward => stats.forward_flat(&mut data)?,
        Direction::Inverse => stats.inverse_flat(&mut data)?,
    }
    MotionClip::new(clip.layout.clone(), clip.frame_time, data, direction == Direction::Forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::FeatureLayout;
    use rand::{Rng, SeedableRng};

    fn layout() -> FeatureLayout {
        FeatureLayout::new(vec!["r".into()], vec!["f".into()]).unwrap()
    }

    fn clip(data: Vec<f64>) -> MotionClip {
        MotionClip::new(layout(), 0.1, data, false).unwrap()
    }

    fn random_dataset(seed: u64) -> Vec<MotionClip> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..5).map(|_| clip((0..4 * 7).map(|_| rng.random_range(-50.0..80.0)).collect())).collect()
    }

    // independent two-pass reference
    fn two_pass(ds: &[MotionClip]) -> NormStats {
        let d = ds[0].dim();
        let rows: Vec<&[f64]> = ds.iter().flat_map(|c| (0..c.frames()).map(move |f| c.frame(f))).collect();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|k| (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt().max(STD_FLOOR))
            .collect();
        NormStats { mean, std }
    }

    #[test]
    fn matches_two_pass_reference() {
        let ds = random_dataset(9);
        let a = compute_norm_stats(&ds).unwrap();
        let b = two_pass(&ds);
        for k in 0..a.dim() {
            assert!((a.mean[k] - b.mean[k]).abs() < 1e-10);
            assert!((a.std[k] - b.std[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn standardized_dataset_has_unit_moments() {
        let ds = random_dataset(3);
        let stats = compute_norm_stats(&ds).unwrap();
        let normed: Vec<MotionClip> = ds.iter().map(|c| normalize(c, &stats, Direction::Forward).unwrap()).collect();
        let again = two_pass(&normed);
        for k in 0..stats.dim() {
            assert!(again.mean[k].abs() < 1e-9);
            assert!((again.std[k] - 1.0).abs() < 1e-6);
        }
        for (c, n) in ds.iter().zip(&normed) {
            let back = normalize(n, &stats, Direction::Inverse).unwrap();
            for (x, y) in back.flat().iter().zip(c.flat()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_and_symmetric_channels() {
        let stats = compute_norm_stats(&[clip(vec![5.0; 12])]).unwrap();
        assert_eq!(stats.mean, vec![5.0; 4]);
        assert_eq!(stats.std, vec![STD_FLOOR; 4]);
        let n = normalize(&clip(vec![5.0; 12]), &stats, Direction::Forward).unwrap();
        assert!(n.flat().iter().all(|v| *v == 0.0));

        let sym = compute_norm_stats(&[clip(vec![-1.0; 4]), clip(vec![1.0; 4])]).unwrap();
        assert_eq!(sym.mean, vec![0.0; 4]);
        assert_eq!(sym.std, vec![1.0; 4]);
    }

    #[test]
    fn errors() {
        assert_eq!(compute_norm_stats(&[]), Err(MotionError::EmptyDataset));
        let stats = NormStats { mean: vec![0.0; 3], std: vec![1.0; 3] };
        assert!(normalize(&clip(vec![0.0; 4]), &stats, Direction::Forward).is_err());
    }
}
