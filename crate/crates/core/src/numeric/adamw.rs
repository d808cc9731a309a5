use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamWState {
    pub step: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamWState {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            step: 0,
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Applies one update. Parameters are first shrunk by `1 - lr * weight_decay`,
    /// then moved along the bias-corrected Adam direction.
    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.to_flat();
        let n = params.num_params();
        if g.len() != n {
            return Err(Error::shape(format!(
                "AdamW: {n} parameters but {} gradient entries",
                g.len()
            )));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "AdamW: non-finite gradient at index {i} (step {})",
                self.step + 1
            )));
        }
        if self.m.is_empty() {
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
        } else if self.m.len() != n {
            return Err(Error::shape(format!(
                "AdamW: moments sized for {} parameters, got {n}",
                self.m.len()
            )));
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        params.visit_mut(&mut |slice| {
            for p in slice.iter_mut() {
                let gi = g[idx];
                m[idx] = b1 * m[idx] + (1.0 - b1) * gi;
                v[idx] = b2 * v[idx] + (1.0 - b2) * gi * gi;
                let m_hat = m[idx] / bc1;
                let v_hat = v[idx] / bc2;
                *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
                idx += 1;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Flat(Vec<f64>);

    impl Parameters for Flat {
        fn visit(&self, f: &mut dyn FnMut(&[f64])) {
            f(&self.0)
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
            f(&mut self.0)
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_fixed_point() {
        let mut opt = AdamWState::new(1e-2, 0.0);
        let mut p = Flat(vec![1.0, -2.0, 0.5]);
        for _ in 0..5 {
            opt.update(&mut p, &Flat(vec![0.0; 3])).unwrap();
        }
        assert_eq!(p.0, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step, 5);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let lr = 1e-3;
        let mut opt = AdamWState::new(lr, 0.0);
        let grads = [0.3, -4.0, 1e-3];
        let mut p = Flat(vec![0.0; 3]);
        opt.update(&mut p, &Flat(grads.to_vec())).unwrap();
        for (pi, g) in p.0.iter().zip(grads) {
            // Bias correction makes m_hat = g and v_hat = g^2 exactly.
            let expected = -lr * g / (g.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi + lr * g.signum()).abs() < lr * 1e-4);
        }
    }

    #[test]
    fn decay_is_decoupled() {
        let (lr, wd) = (1e-2, 1e-3);
        let mut opt = AdamWState::new(lr, wd);
        let mut p = Flat(vec![2.0]);
        for k in 1..=4 {
            opt.update(&mut p, &Flat(vec![0.0])).unwrap();
            let expected = 2.0 * (1.0 - lr * wd).powi(k);
            assert!((p.0[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut opt = AdamWState::new(1e-3, 0.0);
        let mut p = Flat(vec![0.0]);
        assert!(matches!(
            opt.update(&mut p, &Flat(vec![f64::NAN])),
            Err(Error::Numeric(_))
        ));
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn rejects_shape_change() {
        let mut opt = AdamWState::new(1e-3, 0.0);
        let mut p = Flat(vec![0.0]);
        opt.update(&mut p, &Flat(vec![1.0])).unwrap();
        let mut q = Flat(vec![0.0, 0.0]);
        assert!(matches!(
            opt.update(&mut q, &Flat(vec![1.0, 1.0])),
            Err(Error::Shape(_))
        ));
    }
}
