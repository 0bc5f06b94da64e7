use super::{Array, AutodiffError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Moment estimates for every parameter of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: ParamStore,
    second: ParamStore,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |p: &ParamStore| {
            let mut z = ParamStore::new();
            for (name, a) in p.iter() {
                z.insert(name, Array::zeros(a.shape()));
            }
            z
        };
        Self { config, first: zeros(params), second: zeros(params), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<(), AutodiffError> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            let missing = params
                .names()
                .chain(self.first.names())
                .find(|n| !grads.contains(n))
                .or_else(|| grads.names().find(|n| !params.contains(n)))
                .unwrap_or("<unknown>");
            return Err(AutodiffError::UnknownParameter(missing.to_string()));
        }
        for (name, p) in params.iter() {
            let g = grads.get(name)?;
            let m = self.first.get(name)?;
            if g.shape() != p.shape() || m.shape() != p.shape() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, epsilon } = self.config;
        let k = self.step as i32;
        let c1 = 1.0 - beta1.powi(k);
        let c2 = 1.0 - beta2.powi(k);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?;
            let m = self.first.get_mut(name)?;
            let v = self.second.get_mut(name)?;
            for (((pi, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[(&str, Vec<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, v) in values {
            s.insert(*n, Array::row(v.clone()));
        }
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = store(&[("a", vec![1.0, -2.0])]);
        let before = p.clone();
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &store(&[("a", vec![0.0, 0.0])])).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_magnitude() {
        let mut p = store(&[("a", vec![0.0])]);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &store(&[("a", vec![1.0])])).unwrap();
        let delta = p.get("a").unwrap().data()[0];
        assert!((delta - (-1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = store(&[("a", vec![0.5]), ("b", vec![0.5])]);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        for g in [0.3, -1.0, 2.0] {
            st.step(&mut p, &store(&[("a", vec![g]), ("b", vec![g])])).unwrap();
        }
        assert_eq!(p.get("a").unwrap(), p.get("b").unwrap());
    }

    #[test]
    fn mismatches_rejected() {
        let mut p = store(&[("a", vec![0.5])]);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        assert!(st.step(&mut p, &store(&[("b", vec![1.0])])).is_err());
        assert!(st.step(&mut p, &store(&[("a", vec![1.0, 2.0])])).is_err());
        assert_eq!(st.step_count(), 0);
    }
}
