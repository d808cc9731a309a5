//! Training objective: reward-weighted behaviour cloning, pairwise reward
//! preference with regularisers, and the cooperation-score regulariser.

use serde::{Deserialize, Serialize};

use super::model::{Forward, Networks, Prepared, LOGIT_CLIP};
use crate::error::{Error, Result};
use crate::intention::Heads;
use crate::numeric::mlp::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Reward temperature of the BC weights.
    pub beta: f64,
    pub lambda2: f64,
    pub lambda_s: f64,
    /// When false the IRL term is dropped and every BC weight is 1.
    pub use_irl: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lambda2: 1e-3,
            lambda_s: 1e-2,
            use_irl: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub bc: f64,
    pub irl: f64,
    pub coop: f64,
    pub total: f64,
}

/// Binary cross-entropy of a logit, with the logit clipped to ±30.
pub fn bce(logit: f64, label: f64) -> f64 {
    let z = logit.clamp(-LOGIT_CLIP, LOGIT_CLIP);
    softplus(z) - label * z
}

/// Normalised BC weights `σ(β(r_lc − r_lk)) / mean σ(·)`.
pub fn bc_weights(rewards: &[(f64, f64)], beta: f64) -> Vec<f64> {
    let s: Vec<f64> = rewards.iter().map(|(r1, r0)| sigmoid(beta * (r1 - r0))).collect();
    let m = s.iter().sum::<f64>() / s.len() as f64;
    s.iter().map(|v| v / m).collect()
}

/// Mean weighted BCE. `rewards` holds (r_LC, r_LK) per sample.
pub fn bc_loss(logits: &[f64], labels: &[f64], rewards: &[(f64, f64)], beta: f64) -> f64 {
    let w = bc_weights(rewards, beta);
    logits
        .iter()
        .zip(labels)
        .zip(&w)
        .map(|((&z, &y), wi)| wi * bce(z, y))
        .sum::<f64>()
        / logits.len() as f64
}

/// Rewards of the demonstrated and the alternative action.
fn chosen(r: (f64, f64), label: f64) -> (f64, f64) {
    if label >= 0.5 { r } else { (r.1, r.0) }
}

pub fn irl_loss(rewards: &[(f64, f64)], labels: &[f64], lambda2: f64, lambda_s: f64) -> f64 {
    let b = rewards.len() as f64;
    rewards
        .iter()
        .zip(labels)
        .map(|(&r, &y)| {
            let (ra, rb) = chosen(r, y);
            // −[r_a − log(e^{r_a} + e^{r_b})] = softplus(r_b − r_a)
            softplus(rb - ra) + lambda2 * (ra * ra + rb * rb) + lambda_s * (ra - rb).abs()
        })
        .sum::<f64>()
        / b
}

pub fn coop_loss(c_finals: &[f64]) -> f64 {
    c_finals.iter().map(|c| (c - 0.5) * (c - 0.5)).sum::<f64>() / c_finals.len() as f64
}

/// Upstream gradients of the total loss for each sample of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrad {
    pub d_logit: f64,
    pub d_r_lc: f64,
    pub d_r_lk: f64,
    pub d_c: f64,
}

/// Loss terms and per-sample upstream gradients from batch outputs.
pub fn loss_and_grads(
    logits: &[f64],
    labels: &[f64],
    rewards: &[(f64, f64)],
    c_finals: &[f64],
    cfg: &LossConfig,
) -> (LossTerms, Vec<SampleGrad>) {
    let n = logits.len();
    let b = n as f64;
    let mut grads = vec![
        SampleGrad {
            d_logit: 0.0,
            d_r_lc: 0.0,
            d_r_lk: 0.0,
            d_c: 0.0,
        };
        n
    ];
    let ell: Vec<f64> = logits.iter().zip(labels).map(|(&z, &y)| bce(z, y)).collect();
    let mut terms = LossTerms::default();
    if cfg.use_irl {
        let s: Vec<f64> = rewards.iter().map(|(r1, r0)| sigmoid(cfg.beta * (r1 - r0))).collect();
        let m = s.iter().sum::<f64>() / b;
        terms.bc = s.iter().zip(&ell).map(|(si, l)| si / m * l).sum::<f64>() / b;
        for i in 0..n {
            // d L_BC / d s_i = (ℓ_i − L_BC) / (B m)
            let ds = (ell[i] - terms.bc) / (b * m);
            let dd = ds * cfg.beta * s[i] * (1.0 - s[i]);
            grads[i].d_r_lc += dd;
            grads[i].d_r_lk -= dd;
            grads[i].d_logit = s[i] / m / b * bce_grad(logits[i], labels[i]);
        }
        terms.irl = irl_loss(rewards, labels, cfg.lambda2, cfg.lambda_s);
        for i in 0..n {
            let (ra, rb) = chosen(rewards[i], labels[i]);
            let p = sigmoid(rb - ra);
            let sign = if ra > rb { 1.0 } else if ra < rb { -1.0 } else { 0.0 };
            let da = (-p + 2.0 * cfg.lambda2 * ra + cfg.lambda_s * sign) / b;
            let db = (p + 2.0 * cfg.lambda2 * rb - cfg.lambda_s * sign) / b;
            if labels[i] >= 0.5 {
                grads[i].d_r_lc += da;
                grads[i].d_r_lk += db;
            } else {
                grads[i].d_r_lk += da;
                grads[i].d_r_lc += db;
            }
        }
    } else {
        terms.bc = ell.iter().sum::<f64>() / b;
        for i in 0..n {
            grads[i].d_logit = bce_grad(logits[i], labels[i]) / b;
        }
    }
    terms.coop = coop_loss(c_finals);
    for i in 0..n {
        grads[i].d_c = 2.0 * (c_finals[i] - 0.5) / b;
    }
    terms.total = terms.bc + terms.irl + terms.coop;
    (terms, grads)
}

fn bce_grad(logit: f64, label: f64) -> f64 {
    if logit.abs() > LOGIT_CLIP {
        0.0
    } else {
        sigmoid(logit) - label
    }
}

/// Forward, loss and (optionally) gradient accumulation for one mini-batch.
pub fn batch_step(
    nets: &Networks,
    batch: &[&Prepared],
    cfg: &LossConfig,
    heads: Heads,
    grads: Option<&mut Networks>,
) -> Result<(LossTerms, Vec<Forward>)> {
    if batch.is_empty() {
        return Err(Error::Data("empty mini-batch".into()));
    }
    let fw: Vec<Forward> = batch.iter().map(|p| nets.forward(p, heads)).collect::<Result<_>>()?;
    let logits: Vec<f64> = fw.iter().map(|f| f.logit).collect();
    let labels: Vec<f64> = batch.iter().map(|p| p.label).collect();
    let rewards: Vec<(f64, f64)> = fw.iter().map(|f| (f.r_lc, f.r_lk)).collect();
    let cs: Vec<f64> = fw.iter().map(|f| f.scores().c_final).collect();
    let (terms, sg) = loss_and_grads(&logits, &labels, &rewards, &cs, cfg);
    if !terms.total.is_finite() {
        return Err(Error::numeric("non-finite training loss"));
    }
    if let Some(g) = grads {
        for (f, s) in fw.iter().zip(&sg) {
            nets.backward(f, s.d_logit, s.d_r_lc, s.d_r_lk, s.d_c, g)?;
        }
    }
    Ok((terms, fw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::model::{DecisionParams, FeatureScaler};
    use crate::decision::test_support::random_sample;
    use crate::ingest::Action;
    use crate::intention::IntentionParams;
    use crate::numeric::gradcheck::check_gradient_piecewise;
    use crate::numeric::params::zeros_like;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn equal_rewards_give_unit_weights_and_plain_bce() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        let labels = [1.0, 0.0, 0.0, 1.0];
        let rewards = [(0.7, 0.7), (-2.0, -2.0), (0.0, 0.0), (5.0, 5.0)];
        for w in bc_weights(&rewards, 3.0) {
            assert!((w - 1.0).abs() < 1e-12);
        }
        let plain: f64 = logits
            .iter()
            .zip(&labels)
            .map(|(&z, &y): (&f64, &f64)| -(y * sigmoid(z).ln() + (1.0 - y) * (1.0 - sigmoid(z)).ln()))
            .sum::<f64>()
            / 4.0;
        assert!((bc_loss(&logits, &labels, &rewards, 3.0) - plain).abs() < 1e-12);
    }

    #[test]
    fn perfect_logits_have_vanishing_loss() {
        let l = bc_loss(&[1e6, -1e6], &[1.0, 0.0], &[(0.0, 0.0), (0.0, 0.0)], 1.0);
        assert!(l < 1e-12);
    }

    #[test]
    fn weights_move_with_reward_gap_sign() {
        let rewards = [(1.0, 0.0), (0.0, 1.0)];
        let w1 = bc_weights(&rewards, 1.0);
        let w2 = bc_weights(&rewards, 2.0);
        assert!(w2[0] > w1[0] && w2[1] < w1[1]);
        for w in [w1, w2] {
            assert!((w.iter().sum::<f64>() / 2.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn irl_identities() {
        assert!((irl_loss(&[(0.0, 0.0)], &[1.0], 0.0, 0.0) - 2f64.ln()).abs() < 1e-12);
        assert!((irl_loss(&[(10.0, 0.0)], &[1.0], 0.0, 0.0) - 4.5398899e-5).abs() < 1e-9);
        // L2 part alone: rewards (1, −1) contribute 1 + 1.
        let with = irl_loss(&[(1.0, -1.0)], &[1.0], 1.0, 0.0);
        let without = irl_loss(&[(1.0, -1.0)], &[1.0], 0.0, 0.0);
        assert!((with - without - 2.0).abs() < 1e-12);
        // Preference term is shift invariant; the L2 term is not.
        let a = irl_loss(&[(0.4, -0.3)], &[0.0], 0.0, 0.5);
        let b = irl_loss(&[(3.4, 2.7)], &[0.0], 0.0, 0.5);
        assert!((a - b).abs() < 1e-12);
        assert!(irl_loss(&[(3.4, 2.7)], &[0.0], 0.1, 0.0) != irl_loss(&[(0.4, -0.3)], &[0.0], 0.1, 0.0));
    }

    #[test]
    fn coop_loss_values() {
        assert_eq!(coop_loss(&[0.5; 7]), 0.0);
        assert_eq!(coop_loss(&[0.0, 1.0, 1.0]), 0.25);
        let cs = [0.1, 0.45, 0.93, 0.5, 0.61];
        let brute = cs.iter().map(|c| (c - 0.5f64).powi(2)).sum::<f64>() / cs.len() as f64;
        assert!((coop_loss(&cs) - brute).abs() < 1e-15);
    }

    fn small_nets(r: &mut impl Rng) -> Networks {
        Networks {
            intention: IntentionParams::new(r).unwrap(),
            decision: DecisionParams::new(6, r).unwrap(),
        }
    }

    #[test]
    fn joint_loss_gradient_matches_finite_differences() {
        let mut r = rng::seeded(11);
        let scaler = FeatureScaler::identity();
        let batch: Vec<Prepared> = [Action::Lc, Action::Lk, Action::Lk, Action::Lc]
            .iter()
            .map(|&a| Prepared::new(&random_sample(&mut r, a), &scaler))
            .collect();
        let refs: Vec<&Prepared> = batch.iter().collect();
        let cfg = LossConfig {
            beta: 1.3,
            lambda2: 0.05,
            lambda_s: 0.1,
            use_irl: true,
        };
        for (heads, use_irl) in [
            (Heads::default(), true),
            (Heads::default(), false),
            (Heads { lcs: false, dcs: true }, true),
            (Heads { lcs: true, dcs: false }, true),
        ] {
            let nets = small_nets(&mut r);
            let cfg = LossConfig { use_irl, ..cfg };
            let mut g = zeros_like(&nets);
            batch_step(&nets, &refs, &cfg, heads, Some(&mut g)).unwrap();
            let loss = |n: &Networks| batch_step(n, &refs, &cfg, heads, None).unwrap().0.total;
            check_gradient_piecewise(&nets, &g, loss, 1e-5, 1e-3);
        }
    }

    #[test]
    fn policy_and_reward_identities() {
        let mut r = rng::seeded(12);
        let p = Prepared::new(&random_sample(&mut r, Action::Lc), &FeatureScaler::identity());
        let zero = DecisionParams::zeros(8);
        assert_eq!(zero.policy_forward(&p, 0.3).unwrap(), 0.0);
        assert_eq!(zero.reward_pair(&p, 0.3).unwrap(), (0.0, 0.0));
        let d = DecisionParams::new(8, &mut r).unwrap();
        assert_eq!(d.policy_forward(&p, 0.3).unwrap(), d.policy_forward(&p, 0.3).unwrap());
        let (r1, r0) = d.reward_pair(&p, 0.3).unwrap();
        assert_ne!(r1, r0);
    }

    #[test]
    fn mean_weight_is_one_for_random_batches() {
        let mut r = rng::seeded(13);
        for _ in 0..50 {
            let rewards: Vec<(f64, f64)> =
                (0..r.random_range(1..40)).map(|_| (r.random_range(-5.0..5.0), r.random_range(-5.0..5.0))).collect();
            let w = bc_weights(&rewards, r.random_range(0.1..4.0));
            assert!((w.iter().sum::<f64>() / w.len() as f64 - 1.0).abs() < 1e-9);
        }
    }
}
