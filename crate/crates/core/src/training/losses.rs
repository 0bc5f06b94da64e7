//! Loss terms, evaluated directly on values.
//!
//! The training step builds the same quantities on a tape; these plain
//! versions are what reports and tests check against. Every reduction is a
//! mean over both batch and feature entries.

use std::ops::Range;

use super::TrainError;
use crate::autodiff::Array;
use crate::motion::FeatureLayout;

fn mismatch(expected: usize, found: usize) -> TrainError {
    TrainError::DimensionMismatch { expected, found }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    s / a.len().max(1) as f64
}

/// Mean squared error between true and predicted noise.
pub fn ddpm_loss(eps: &[f64], eps_hat: &[f64]) -> Result<f64, TrainError> {
    if eps.len() != eps_hat.len() {
        return Err(mismatch(eps.len(), eps_hat.len()));
    }
    Ok(mean_sq_diff(eps, eps_hat))
}

fn restricted(x0: &[f64], x0_hat: &[f64], dim: usize, channels: Range<usize>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (i, (a, b)) in x0.iter().zip(x0_hat).enumerate() {
        if channels.contains(&(i % dim)) {
            s += (a - b) * (a - b);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// `(l_foot, l_root)`: squared error restricted to contact and root-position
/// channels. Inputs are flattened frames (any number of clips back to back).
pub fn aux_losses(x0: &[f64], x0_hat: &[f64], layout: &FeatureLayout) -> Result<(f64, f64), TrainError> {
    let d = layout.dim();
    if x0.len() != x0_hat.len() {
        return Err(mismatch(x0.len(), x0_hat.len()));
    }
    if x0.len() % d != 0 {
        return Err(mismatch(d, x0.len() % d));
    }
    Ok((
        restricted(x0, x0_hat, d, layout.contact_channels()),
        restricted(x0, x0_hat, d, layout.root_channels()),
    ))
}

/// Batch mean of `½(D(x0) − 1)² + ½ D(x̂0)²`.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64, TrainError> {
    if d_real.len() != d_fake.len() {
        return Err(mismatch(d_real.len(), d_fake.len()));
    }
    let n = d_real.len().max(1) as f64;
    Ok(d_real.iter().zip(d_fake).map(|(r, f)| 0.5 * (r - 1.0).powi(2) + 0.5 * f * f).sum::<f64>() / n)
}

/// Batch mean of `½(D(x̂0) − 1)²`.
pub fn generator_adv_loss(d_fake: &[f64]) -> f64 {
    let n = d_fake.len().max(1) as f64;
    d_fake.iter().map(|f| 0.5 * (f - 1.0).powi(2)).sum::<f64>() / n
}

/// `[F·D, F·k]` 0/1 matrix picking `channels` out of every frame of a
/// flattened clip. Multiplying a `[B, F·D]` batch by it gathers those channels.
pub fn channel_selector(dim: usize, frames: usize, channels: Range<usize>) -> Array {
    let k = channels.len();
    let mut data = vec![0.0; frames * dim * frames * k];
    for f in 0..frames {
        for (j, c) in channels.clone().enumerate() {
            let row = f * dim + c;
            let col = f * k + j;
            data[row * frames * k + col] = 1.0;
        }
    }
    Array::matrix(frames * dim, frames * k, data).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> FeatureLayout {
        FeatureLayout::new(vec!["root".into(), "Head".into()], vec!["L".into(), "R".into()]).unwrap()
    }

    #[test]
    fn ddpm_examples() {
        assert_eq!(ddpm_loss(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(ddpm_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        let (a, b) = ([0.1, 2.0, -0.7], [1.5, -0.2, 0.0]);
        assert_eq!(ddpm_loss(&a, &b).unwrap(), ddpm_loss(&b, &a).unwrap());
        assert!(ddpm_loss(&a, &b[..2]).is_err());
    }

    #[test]
    fn aux_examples() {
        let l = layout();
        let x0: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(aux_losses(&x0, &x0, &l).unwrap(), (0.0, 0.0));

        let mut head = x0.clone();
        head[4] += 3.0; // Head_y, frame 0
        assert_eq!(aux_losses(&x0, &head, &l).unwrap(), (0.0, 0.0));

        let mut root = x0.clone();
        for f in 0..2 {
            for c in 0..3 {
                root[f * 8 + c] += 2.0;
            }
        }
        assert_eq!(aux_losses(&x0, &root, &l).unwrap(), (0.0, 4.0));

        let mut foot = x0.clone();
        foot[6] += 1.0;
        assert_eq!(aux_losses(&x0, &foot, &l).unwrap(), (0.25, 0.0));
        assert!(aux_losses(&x0, &x0[..15], &l).is_err());
    }

    #[test]
    fn adversarial_examples() {
        assert_eq!(discriminator_loss(&[1.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(discriminator_loss(&[0.5], &[0.5]).unwrap(), 0.25);
        assert_eq!(discriminator_loss(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(discriminator_loss(&[0.0, 1.0], &[1.0]).is_err());
        assert_eq!(generator_adv_loss(&[1.0]), 0.0);
        assert_eq!(generator_adv_loss(&[0.0]), 0.5);
        assert_eq!(generator_adv_loss(&[0.5]), 0.125);
    }

    #[test]
    fn selector_gathers_channels() {
        let s = channel_selector(4, 2, 1..3);
        let x = Array::row(vec![0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(x.matmul(&s).unwrap().data(), &[1.0, 2.0, 11.0, 12.0]);
    }
}
