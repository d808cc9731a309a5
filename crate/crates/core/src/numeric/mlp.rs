//! Fully connected networks with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
    Softmax,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Identity => {}
            Activation::Softmax => {
                let s = softmax(z);
                z.copy_from_slice(&s);
            }
        }
    }

    /// Maps dL/dy to dL/dz given the activation output `y`.
    fn backward(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &yi) in grad.iter_mut().zip(y) {
                    if yi <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &yi) in grad.iter_mut().zip(y) {
                    *g *= yi * (1.0 - yi);
                }
            }
            Activation::Tanh => {
                for (g, &yi) in grad.iter_mut().zip(y) {
                    *g *= 1.0 - yi * yi;
                }
            }
            Activation::Identity => {}
            Activation::Softmax => {
                let gy: f64 = grad.iter().zip(y).map(|(g, yi)| g * yi).sum();
                for (g, &yi) in grad.iter_mut().zip(y) {
                    *g = yi * (*g - gy);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out_dim x in_dim`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and outputs recorded by [`MlpParams::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map_or(&[], Vec::as_slice)
    }
}

impl MlpParams {
    /// Builds a network with layer widths `dims` (input first), `hidden`
    /// activation on all but the last layer and `output` on the last.
    /// Weights are drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("an MLP needs at least an input and an output width"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            let activation = if i + 2 == dims.len() { output } else { hidden };
            layers.push(Layer {
                weight: Matrix::from_vec(fan_out, fan_in, data)?,
                bias,
                activation,
            });
        }
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    /// Same architecture with every weight and bias zero.
    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
                activation: if i + 2 == dims.len() { output } else { hidden },
            })
            .collect();
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("MLP has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() || l.weight.data.len() != l.weight.rows * l.weight.cols {
                return Err(Error::shape(format!("layer {i} has inconsistent bias/weight sizes")));
            }
            if l.activation == Activation::Softmax && i + 1 != self.layers.len() {
                return Err(Error::shape(format!(
                    "softmax is only allowed on the final layer (found on layer {i})"
                )));
            }
            if i > 0 && self.layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::shape(format!(
                    "layer {} outputs {} values but layer {i} expects {}",
                    i - 1,
                    self.layers[i - 1].out_dim(),
                    l.in_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "MLP expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.bias.clone();
            layer.weight.matvec_acc(&x, &mut z);
            layer.activation.apply(&mut z);
            inputs.push(std::mem::replace(&mut x, z.clone()));
            outputs.push(z);
        }
        Ok((x, MlpCache { inputs, outputs }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_output: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let mut grads = super::params::zeros_like(self);
        let gi = self.backward_acc(cache, grad_output, &mut grads)?;
        Ok((grads, gi))
    }

    /// Like [`backward`](Self::backward) but adds into an existing gradient buffer.
    pub fn backward_acc(
        &self,
        cache: &MlpCache,
        grad_output: &[f64],
        grads: &mut MlpParams,
    ) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.layers.len()
            || self
                .layers
                .iter()
                .zip(&cache.inputs)
                .any(|(l, x)| x.len() != l.in_dim())
        {
            return Err(Error::shape("MLP cache does not match these parameters"));
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "MLP output gradient has {} entries, expected {}",
                grad_output.len(),
                self.output_dim()
            )));
        }
        let mut g = grad_output.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backward(&cache.outputs[li], &mut g);
            let gl = &mut grads.layers[li];
            gl.weight.add_outer(1.0, &g, &cache.inputs[li]);
            for (b, gi) in gl.bias.iter_mut().zip(&g) {
                *b += gi;
            }
            let mut gin = vec![0.0; layer.in_dim()];
            layer.weight.matvec_t_acc(&g, &mut gin);
            g = gin;
        }
        Ok(g)
    }
}

impl Parameters for MlpParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(&l.weight.data);
            f(&l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(&mut l.weight.data);
            f(&mut l.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gradcheck::{check_gradient, rel_err};
    use crate::rng::seeded;

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[3, 4, 2], Activation::Relu, Activation::Identity).unwrap();
        assert_eq!(p.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_relu_layer() {
        let p = MlpParams {
            layers: vec![Layer {
                weight: Matrix::identity(2),
                bias: vec![0.0; 2],
                activation: Activation::Relu,
            }],
        };
        assert_eq!(p.predict(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn softmax_head_normalises() {
        let mut rng = seeded(3);
        let p = MlpParams::new(&[2, 64, 64, 3], Activation::Relu, Activation::Softmax, &mut rng).unwrap();
        let y = p.predict(&[0.3, -1.7]).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(y.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn softmax_must_be_last() {
        let mut rng = seeded(1);
        assert!(MlpParams::new(&[2, 3], Activation::Relu, Activation::Softmax, &mut rng).is_ok());
        let bad = MlpParams {
            layers: vec![
                Layer {
                    weight: Matrix::zeros(2, 2),
                    bias: vec![0.0; 2],
                    activation: Activation::Softmax,
                },
                Layer {
                    weight: Matrix::zeros(1, 2),
                    bias: vec![0.0],
                    activation: Activation::Identity,
                },
            ],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let p = MlpParams::zeros(&[3, 1], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = seeded(2);
        let a = MlpParams::new(&[3, 4, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let b = MlpParams::new(&[2, 4, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let (_, cache) = b.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(a.backward(&cache, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = seeded(4);
        let p = MlpParams::new(&[3, 5, 2], Activation::Tanh, Activation::Sigmoid, &mut rng).unwrap();
        let (_, cache) = p.forward(&[0.5, -0.1, 0.9]).unwrap();
        let (g, gi) = p.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(gi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let p = MlpParams {
            layers: vec![Layer {
                weight: Matrix::identity(2),
                bias: vec![0.0; 2],
                activation: Activation::Identity,
            }],
        };
        let x = [0.7, -1.3];
        let (_, cache) = p.forward(&x).unwrap();
        // loss = output[1]
        let (g, _) = p.backward(&cache, &[0.0, 1.0]).unwrap();
        assert_eq!(g.layers[0].weight.data, vec![0.0, 0.0, 0.7, -1.3]);
        assert_eq!(g.layers[0].bias, vec![0.0, 1.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, hidden, out) in [
            (10, Activation::Tanh, Activation::Identity),
            (11, Activation::Sigmoid, Activation::Softmax),
            (12, Activation::Relu, Activation::Sigmoid),
        ] {
            let mut rng = seeded(seed);
            let p = MlpParams::new(&[4, 6, 5, 3], hidden, out, &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wts: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |q: &MlpParams, x: &[f64]| -> f64 {
                let y = q.predict(x).unwrap();
                y.iter().zip(&wts).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = p.forward(&x).unwrap();
            let (g, gx) = p.backward(&cache, &wts).unwrap();
            check_gradient(&p, &g, |q| loss(q, &x), 1e-5, 1e-4);
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += 1e-5;
                xm[i] -= 1e-5;
                let fd = (loss(&p, &xp) - loss(&p, &xm)) / 2e-5;
                assert!(rel_err(gx[i], fd) < 1e-4, "input grad {i}: {} vs {fd}", gx[i]);
            }
        }
    }
}
