use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Sample, Style, FEATURE_DIM, INNER_DIM, SEQ_LEN};
use crate::intention::{CoopScores, FuseCache, Heads, IntentionParams};
use crate::numeric::lstm::{LstmStepCache, DEFAULT_HIDDEN};
use crate::numeric::mlp::MlpCache;
use crate::numeric::{Activation, LstmParams, MlpParams, Parameters};

pub const POLICY_INPUT: usize = FEATURE_DIM + 1;
pub const REWARD_INPUT: usize = FEATURE_DIM + 2;
pub const REWARD_HIDDEN: usize = 64;
/// Logits are clipped to this magnitude inside the cross-entropy.
pub const LOGIT_CLIP: f64 = 30.0;

/// Per-feature standardisation fitted on training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIM],
            std: vec![1.0; FEATURE_DIM],
        }
    }

    /// Fits on every frame of `samples`; constant columns get unit scale.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; FEATURE_DIM];
        let mut sq = vec![0.0; FEATURE_DIM];
        for s in samples {
            for t in 0..SEQ_LEN {
                for (k, &v) in s.frame(t).iter().enumerate() {
                    sum[k] += v as f64;
                    sq[k] += v as f64 * v as f64;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Data("cannot fit feature scaling on an empty training split".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }
}

/// A sample in model-ready form: standardised frames and their window means.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub frames: Vec<[f64; FEATURE_DIM]>,
    pub pooled: [f64; FEATURE_DIM],
    pub style: Option<Style>,
    pub label: f64,
    pub episode_id: u32,
}

impl Prepared {
    pub fn new(s: &Sample, scaler: &FeatureScaler) -> Self {
        let mut frames = Vec::with_capacity(SEQ_LEN);
        let mut pooled = [0.0; FEATURE_DIM];
        for t in 0..SEQ_LEN {
            let mut f = [0.0; FEATURE_DIM];
            for (k, &v) in s.frame(t).iter().enumerate() {
                f[k] = (v as f64 - scaler.mean[k]) / scaler.std[k];
                pooled[k] += f[k] / SEQ_LEN as f64;
            }
            frames.push(f);
        }
        Self {
            frames,
            pooled,
            style: s.style,
            label: s.action.bit() as f64,
            episode_id: s.episode_id,
        }
    }

    pub fn inner(&self) -> &[f64] {
        &self.pooled[..INNER_DIM]
    }

    pub fn inter(&self) -> &[f64] {
        &self.pooled[INNER_DIM..]
    }
}

/// Policy LSTM with a linear logit head, and the action-conditioned reward net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionParams {
    pub policy: LstmParams,
    pub head: MlpParams,
    pub reward: MlpParams,
}

impl DecisionParams {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            policy: LstmParams::new(POLICY_INPUT, hidden, rng),
            head: MlpParams::new(&[hidden, 1], Activation::Identity, Activation::Identity, rng)?,
            reward: MlpParams::new(
                &[REWARD_INPUT, REWARD_HIDDEN, REWARD_HIDDEN, 1],
                Activation::Relu,
                Activation::Identity,
                rng,
            )?,
        })
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            policy: LstmParams::zeros(POLICY_INPUT, hidden),
            head: MlpParams::zeros(&[hidden, 1], Activation::Identity, Activation::Identity).expect("valid shape"),
            reward: MlpParams::zeros(
                &[REWARD_INPUT, REWARD_HIDDEN, REWARD_HIDDEN, 1],
                Activation::Relu,
                Activation::Identity,
            )
            .expect("valid shape"),
        }
    }

    pub fn default_hidden() -> usize {
        DEFAULT_HIDDEN
    }

    fn policy_inputs(p: &Prepared, c_final: f64) -> Vec<Vec<f64>> {
        p.frames
            .iter()
            .map(|f| {
                let mut x = f.to_vec();
                x.push(c_final);
                x
            })
            .collect()
    }

    /// LSTM over the 20 frames with `c_final` appended to every step, then a linear logit.
    pub fn policy_forward(&self, p: &Prepared, c_final: f64) -> Result<f64> {
        let (h, _) = self.policy.forward_sequence(&Self::policy_inputs(p, c_final))?;
        Ok(self.head.predict(&h)?[0])
    }

    fn reward_input(p: &Prepared, c_final: f64, action: f64) -> Vec<f64> {
        let mut x = p.pooled.to_vec();
        x.push(c_final);
        x.push(action);
        x
    }

    /// Rewards of (LC, LK) for one window.
    pub fn reward_pair(&self, p: &Prepared, c_final: f64) -> Result<(f64, f64)> {
        Ok((
            self.reward.predict(&Self::reward_input(p, c_final, 1.0))?[0],
            self.reward.predict(&Self::reward_input(p, c_final, 0.0))?[0],
        ))
    }
}

impl Parameters for DecisionParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.policy.visit(f);
        self.head.visit(f);
        self.reward.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.policy.visit_mut(f);
        self.head.visit_mut(f);
        self.reward.visit_mut(f);
    }
}

/// All four jointly trained networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Networks {
    pub intention: IntentionParams,
    pub decision: DecisionParams,
}

impl Parameters for Networks {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.intention.visit(f);
        self.decision.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.intention.visit_mut(f);
        self.decision.visit_mut(f);
    }
}

/// Everything computed for one window on the forward pass.
pub struct Forward {
    pub fuse: FuseCache,
    lstm: Vec<LstmStepCache>,
    head: MlpCache,
    reward_lc: MlpCache,
    reward_lk: MlpCache,
    pub logit: f64,
    pub r_lc: f64,
    pub r_lk: f64,
}

impl Forward {
    pub fn scores(&self) -> CoopScores {
        self.fuse.scores
    }
}

impl Networks {
    pub fn forward(&self, p: &Prepared, heads: Heads) -> Result<Forward> {
        let fuse = self.intention.fuse_cached(p.inner(), p.inter(), p.style, heads)?;
        let c = fuse.scores.c_final;
        let d = &self.decision;
        let (h, lstm) = d
            .policy
            .forward_sequence(&DecisionParams::policy_inputs(p, c))
            .map_err(|e| with_sample(e, p.episode_id))?;
        let (z, head) = d.head.forward(&h)?;
        let (r1, reward_lc) = d.reward.forward(&DecisionParams::reward_input(p, c, 1.0))?;
        let (r0, reward_lk) = d.reward.forward(&DecisionParams::reward_input(p, c, 0.0))?;
        if !(z[0].is_finite() && r1[0].is_finite() && r0[0].is_finite()) {
            return Err(Error::numeric(format!("non-finite output for a window of episode {}", p.episode_id)));
        }
        Ok(Forward {
            fuse,
            lstm,
            head,
            reward_lc,
            reward_lk,
            logit: z[0],
            r_lc: r1[0],
            r_lk: r0[0],
        })
    }

    /// Backward for one window given upstream gradients on the logit, both
    /// rewards and `c_final` (the latter from terms that use it directly).
    pub fn backward(
        &self,
        fw: &Forward,
        d_logit: f64,
        d_r_lc: f64,
        d_r_lk: f64,
        d_c_direct: f64,
        grads: &mut Networks,
    ) -> Result<()> {
        let d = &self.decision;
        let g = &mut grads.decision;
        let mut d_c = d_c_direct;
        if d_logit != 0.0 {
            let dh = d.head.backward_acc(&fw.head, &[d_logit], &mut g.head)?;
            let dxs = d.policy.backward_sequence(&fw.lstm, &dh, &mut g.policy);
            d_c += dxs.iter().map(|dx| dx[FEATURE_DIM]).sum::<f64>();
        }
        for (cache, dr) in [(&fw.reward_lc, d_r_lc), (&fw.reward_lk, d_r_lk)] {
            if dr != 0.0 {
                d_c += d.reward.backward_acc(cache, &[dr], &mut g.reward)?[FEATURE_DIM];
            }
        }
        self.intention.fuse_backward(&fw.fuse, d_c, &mut grads.intention)?;
        Ok(())
    }
}

fn with_sample(e: Error, id: u32) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{m} (window of episode {id})")),
        other => other,
    }
}
