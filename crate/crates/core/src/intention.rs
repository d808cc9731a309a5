//! Cooperation scores of the target-lane rear vehicle: the style-conditioned
//! intrinsic score (LCS), the interaction-driven score (DCS) and their gated
//! convex fusion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{Style, FEATURE_DIM, INNER_DIM, INTER_DIM};
use crate::numeric::mlp::MlpCache;
use crate::numeric::{Activation, MlpParams, Parameters};

pub const HEAD_HIDDEN: usize = 32;
pub const LCS_INPUT: usize = INNER_DIM + 3;
pub const GATE_INPUT: usize = FEATURE_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionParams {
    pub f_intr: MlpParams,
    pub f_inter: MlpParams,
    pub gate: MlpParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopScores {
    pub lcs: f64,
    pub dcs: f64,
    pub alpha: f64,
    pub c_final: f64,
}

/// Which score heads are active. A disabled head is replaced by the neutral
/// constant 0.5 and receives no gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heads {
    pub lcs: bool,
    pub dcs: bool,
}

impl Default for Heads {
    fn default() -> Self {
        Self { lcs: true, dcs: true }
    }
}

pub const NEUTRAL: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct FuseCache {
    intr: Option<MlpCache>,
    inter: Option<MlpCache>,
    gate: MlpCache,
    pub scores: CoopScores,
}

/// Style one-hot; an unknown style encodes as all zeros.
pub fn style_code(style: Option<Style>) -> [f64; 3] {
    style.map_or([0.0; 3], Style::one_hot)
}

fn head<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Result<MlpParams> {
    MlpParams::new(&[input, HEAD_HIDDEN, HEAD_HIDDEN, 1], Activation::Relu, Activation::Sigmoid, rng)
}

fn zero_head(input: usize) -> MlpParams {
    MlpParams::zeros(&[input, HEAD_HIDDEN, HEAD_HIDDEN, 1], Activation::Relu, Activation::Sigmoid)
        .expect("fixed head shape is valid")
}

impl IntentionParams {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        Ok(Self {
            f_intr: head(LCS_INPUT, rng)?,
            f_inter: head(INTER_DIM, rng)?,
            gate: head(GATE_INPUT, rng)?,
        })
    }

    pub fn zeros() -> Self {
        Self {
            f_intr: zero_head(LCS_INPUT),
            f_inter: zero_head(INTER_DIM),
            gate: zero_head(GATE_INPUT),
        }
    }

    fn intr_input(inner: &[f64], style: Option<Style>) -> Vec<f64> {
        let mut x = inner.to_vec();
        x.extend_from_slice(&style_code(style));
        x
    }

    pub fn lcs_forward(&self, inner: &[f64], style: Option<Style>) -> Result<f64> {
        Ok(self.f_intr.predict(&Self::intr_input(inner, style))?[0])
    }

    pub fn dcs_forward(&self, inter: &[f64]) -> Result<f64> {
        Ok(self.f_inter.predict(inter)?[0])
    }

    /// Scores for one window summary (`inner`, `inter` already standardised and pooled).
    pub fn fuse(&self, inner: &[f64], inter: &[f64], style: Option<Style>) -> Result<CoopScores> {
        self.fuse_cached(inner, inter, style, Heads::default()).map(|c| c.scores)
    }

    pub fn fuse_cached(&self, inner: &[f64], inter: &[f64], style: Option<Style>, heads: Heads) -> Result<FuseCache> {
        let (lcs, intr) = if heads.lcs {
            let (y, c) = self.f_intr.forward(&Self::intr_input(inner, style))?;
            (y[0], Some(c))
        } else {
            (NEUTRAL, None)
        };
        let (dcs, inter_c) = if heads.dcs {
            let (y, c) = self.f_inter.forward(inter)?;
            (y[0], Some(c))
        } else {
            (NEUTRAL, None)
        };
        let mut gx = inner.to_vec();
        gx.extend_from_slice(inter);
        let (a, gate) = self.gate.forward(&gx)?;
        let alpha = a[0];
        Ok(FuseCache {
            intr,
            inter: inter_c,
            gate,
            scores: CoopScores {
                lcs,
                dcs,
                alpha,
                c_final: alpha * lcs + (1.0 - alpha) * dcs,
            },
        })
    }

    /// Accumulates parameter gradients for an upstream gradient on `c_final`.
    /// Returns the gradient with respect to `[inner ‖ inter]`.
    pub fn fuse_backward(&self, cache: &FuseCache, d_c: f64, grads: &mut IntentionParams) -> Result<Vec<f64>> {
        let s = cache.scores;
        let mut d_in = self.gate.backward_acc(&cache.gate, &[d_c * (s.lcs - s.dcs)], &mut grads.gate)?;
        if let Some(c) = &cache.intr {
            let g = self.f_intr.backward_acc(c, &[d_c * s.alpha], &mut grads.f_intr)?;
            for (d, gi) in d_in[..INNER_DIM].iter_mut().zip(&g) {
                *d += gi;
            }
        }
        if let Some(c) = &cache.inter {
            let g = self.f_inter.backward_acc(c, &[d_c * (1.0 - s.alpha)], &mut grads.f_inter)?;
            for (d, gi) in d_in[INNER_DIM..].iter_mut().zip(&g) {
                *d += gi;
            }
        }
        Ok(d_in)
    }
}

impl Parameters for IntentionParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.f_intr.visit(f);
        self.f_inter.visit(f);
        self.gate.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.f_intr.visit_mut(f);
        self.f_inter.visit_mut(f);
        self.gate.visit_mut(f);
    }
}
