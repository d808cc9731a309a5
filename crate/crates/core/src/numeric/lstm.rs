//! Single-layer LSTM cell with manual backpropagation through time.
//!
//! Gate blocks are stacked row-wise in the order input, forget, cell, output:
//! rows `[0, H)` belong to the input gate, `[H, 2H)` to the forget gate and so on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::sigmoid;
use super::params::Parameters;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Input weights, `4H x input_dim`.
    pub w: Matrix,
    /// Recurrent weights, `4H x H`.
    pub u: Matrix,
    /// Gate biases, `4H`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i | f | g | o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let g = 4 * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            w: Matrix::from_vec(g, input_dim, draw(g * input_dim)).expect("sized"),
            u: Matrix::from_vec(g, hidden_dim, draw(g * hidden_dim)).expect("sized"),
            b: draw(g),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            w: Matrix::zeros(g, input_dim),
            u: Matrix::zeros(g, hidden_dim),
            b: vec![0.0; g],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = 4 * self.hidden_dim;
        if self.w.rows != g
            || self.w.cols != self.input_dim
            || self.u.rows != g
            || self.u.cols != self.hidden_dim
            || self.b.len() != g
        {
            return Err(Error::shape(format!(
                "LSTM weights inconsistent with input_dim={} hidden_dim={}",
                self.input_dim, self.hidden_dim
            )));
        }
        Ok(())
    }

    /// One time step. Returns the new hidden and cell states plus a cache for the backward pass.
    pub fn step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
        let h = self.hidden_dim;
        if x.len() != self.input_dim || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::shape(format!(
                "LSTM step expects x[{}], h[{h}], c[{h}]; got x[{}], h[{}], c[{}]",
                self.input_dim,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let mut z = self.b.clone();
        self.w.matvec_acc(x, &mut z);
        self.u.matvec_acc(h_prev, &mut z);
        for v in &mut z[..2 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * h..3 * h] {
            *v = v.tanh();
        }
        for v in &mut z[3 * h..] {
            *v = sigmoid(*v);
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for k in 0..h {
            c[k] = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
            tanh_c[k] = c[k].tanh();
            h_new[k] = z[3 * h + k] * tanh_c[k];
        }
        if !c.iter().chain(&h_new).all(|v| v.is_finite()) {
            return Err(Error::numeric("non-finite LSTM state"));
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates: z,
            tanh_c,
        };
        Ok((h_new, c, cache))
    }

    /// Backward through one step. `dh`/`dc` are gradients w.r.t. this step's
    /// outputs; returns `(dx, dh_prev, dc_prev)` and accumulates into `grads`.
    pub fn step_backward(
        &self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmParams,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dct * gg * i * (1.0 - i);
            dz[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dct * i * (1.0 - gg * gg);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
        grads.w.add_outer(1.0, &dz, &cache.x);
        grads.u.add_outer(1.0, &dz, &cache.h_prev);
        for (b, d) in grads.b.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.input_dim];
        self.w.matvec_t_acc(&dz, &mut dx);
        let mut dh_prev = vec![0.0; h];
        self.u.matvec_t_acc(&dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }

    /// Runs the cell over a sequence from zero state; returns the final hidden
    /// state and the per-step caches.
    pub fn forward_sequence(&self, xs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<LstmStepCache>)> {
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut caches = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            let (h2, c2, cache) = self.step(x, &h, &c).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("{m} at step {t}")),
                other => other,
            })?;
            h = h2;
            c = c2;
            caches.push(cache);
        }
        Ok((h, caches))
    }

    /// Backpropagates a gradient on the final hidden state through the whole
    /// sequence. Returns the per-step input gradients.
    pub fn backward_sequence(
        &self,
        caches: &[LstmStepCache],
        dh_last: &[f64],
        grads: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; self.hidden_dim];
        let mut dxs = vec![Vec::new(); caches.len()];
        for (t, cache) in caches.iter().enumerate().rev() {
            let (dx, dh_prev, dc_prev) = self.step_backward(cache, &dh, &dc, grads);
            dxs[t] = dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        dxs
    }
}

impl Parameters for LstmParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(&self.w.data);
        f(&self.u.data);
        f(&self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.w.data);
        f(&mut self.u.data);
        f(&mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gradcheck::{check_gradient, rel_err};
    use crate::numeric::params::zeros_like;
    use crate::rng::seeded;

    fn random_seq(rng: &mut impl Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_weights_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let (h, c, _) = p.step(&[0.0; 3], &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(h.iter().chain(&c).all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_state_is_bounded_and_deterministic() {
        let mut rng = seeded(5);
        let p = LstmParams::new(3, 8, &mut rng);
        let xs = random_seq(&mut rng, 30, 3);
        let (h1, _) = p.forward_sequence(&xs).unwrap();
        let (h2, _) = p.forward_sequence(&xs).unwrap();
        assert_eq!(h1, h2);
        assert!(h1.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn nan_input_reports_step() {
        let mut rng = seeded(6);
        let p = LstmParams::new(2, 3, &mut rng);
        let mut xs = random_seq(&mut rng, 5, 2);
        xs[3][1] = f64::NAN;
        let err = p.forward_sequence(&xs).unwrap_err();
        assert!(matches!(&err, Error::Numeric(m) if m.contains("step 3")), "{err}");
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = seeded(7);
        let p = LstmParams::new(3, 5, &mut rng);
        let xs = random_seq(&mut rng, 6, 3);
        let head: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |q: &LstmParams, xs: &[Vec<f64>]| -> f64 {
            let (h, _) = q.forward_sequence(xs).unwrap();
            h.iter().zip(&head).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, caches) = p.forward_sequence(&xs).unwrap();
        let mut grads = zeros_like(&p);
        let dxs = p.backward_sequence(&caches, &head, &mut grads);
        check_gradient(&p, &grads, |q| loss(q, &xs), 1e-5, 1e-4);
        for t in 0..xs.len() {
            for i in 0..3 {
                let mut up = xs.clone();
                let mut dn = xs.clone();
                up[t][i] += 1e-5;
                dn[t][i] -= 1e-5;
                let fd = (loss(&p, &up) - loss(&p, &dn)) / 2e-5;
                assert!(rel_err(dxs[t][i], fd) < 1e-4);
            }
        }
    }
}
