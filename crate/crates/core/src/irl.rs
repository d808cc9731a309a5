//! Maximum-entropy IRL over a finite lattice of longitudinal candidate
//! trajectories, used to predict the target-lane rear vehicle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Episode;

pub const DT: f64 = 0.1;
pub const ACCEL_LEVELS: [f64; 8] = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
pub const N_CANDIDATES: usize = ACCEL_LEVELS.len() * ACCEL_LEVELS.len();
pub const DEFAULT_HORIZON: usize = 50;
/// Speed regulariser in the headway feature, m/s.
pub const SAFETY_EPS: f64 = 1e-3;
/// Cap on the headway exponent when the leader is behind the vehicle.
pub const SAFETY_EXP_CAP: f64 = 20.0;
pub const N_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongState {
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// Positions, speeds and applied accelerations over `N + 1` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Point-mass rollout of a piecewise-constant acceleration profile with
/// speed clamped at zero (a clamped step applies only the acceleration that
/// brings the vehicle to rest).
pub fn rollout(init: LongState, accels: &[f64]) -> Rollout {
    let n = accels.len();
    let mut r = Rollout {
        x: Vec::with_capacity(n + 1),
        v: Vec::with_capacity(n + 1),
        a: Vec::with_capacity(n + 1),
    };
    r.x.push(init.x);
    r.v.push(init.v.max(0.0));
    r.a.push(init.a);
    for &a in accels {
        let (x, v) = (r.x[r.x.len() - 1], r.v[r.v.len() - 1]);
        let v_next = (v + a * DT).max(0.0);
        let a_eff = (v_next - v) / DT;
        r.x.push(x + 0.5 * (v + v_next) * DT);
        r.v.push(v_next);
        r.a.push(a_eff);
    }
    r
}

/// Horizon-summed (efficiency, safety, comfort) features and the number of
/// steps in which the leader was behind the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajFeatures {
    pub f: [f64; N_FEATURES],
    pub lead_behind_steps: usize,
}

/// Per step k = 1..N: |v|, exp(−gap/(v + ε)) and 1 − exp(−|jerk|).
pub fn traj_features(r: &Rollout, lead_x: &[f64]) -> Result<TrajFeatures> {
    if lead_x.len() != r.len() {
        return Err(Error::shape(format!(
            "leader has {} states but the rollout has {}",
            lead_x.len(),
            r.len()
        )));
    }
    let mut f = [0.0; N_FEATURES];
    let mut behind = 0;
    for k in 1..r.len() {
        let gap = lead_x[k] - r.x[k];
        if gap < 0.0 {
            behind += 1;
        }
        f[0] += r.v[k].abs();
        f[1] += (-gap / (r.v[k] + SAFETY_EPS)).min(SAFETY_EXP_CAP).exp();
        let jerk = (r.a[k] - r.a[k - 1]) / DT;
        f[2] += 1.0 - (-jerk.abs()).exp();
    }
    Ok(TrajFeatures {
        f,
        lead_behind_steps: behind,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub accel: (f64, f64),
    pub rollout: Rollout,
    pub features: TrajFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub horizon: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn features(&self) -> Vec<[f64; N_FEATURES]> {
        self.candidates.iter().map(|c| c.features.f).collect()
    }

    /// Index of the candidate nearest (L2 over positions) to `realized_x`; ties go to the lower index.
    pub fn nearest(&self, realized_x: &[f64]) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.candidates.iter().enumerate() {
            if c.rollout.x.len() != realized_x.len() {
                return Err(Error::shape(format!(
                    "realized trajectory has {} states, candidates have {}",
                    realized_x.len(),
                    c.rollout.x.len()
                )));
            }
            let d: f64 = c.rollout.x.iter().zip(realized_x).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }
}

/// 64 two-phase acceleration profiles switching at `N/2`.
pub fn generate_candidates(init: LongState, lead_x: &[f64], horizon: usize) -> Result<CandidateSet> {
    if horizon == 0 {
        return Err(Error::config("prediction horizon must be at least one step"));
    }
    let switch = horizon / 2;
    let mut candidates = Vec::with_capacity(N_CANDIDATES);
    for &a1 in &ACCEL_LEVELS {
        for &a2 in &ACCEL_LEVELS {
            let accels: Vec<f64> = (0..horizon).map(|k| if k < switch { a1 } else { a2 }).collect();
            let r = rollout(init, &accels);
            let features = traj_features(&r, lead_x)?;
            candidates.push(Candidate {
                accel: (a1, a2),
                rollout: r,
                features,
            });
        }
    }
    Ok(CandidateSet { horizon, candidates })
}

/// Softmax of ωᵀf with max subtraction.
pub fn maxent_probs(features: &[[f64; N_FEATURES]], omega: &[f64; N_FEATURES]) -> Vec<f64> {
    let s: Vec<f64> = features.iter().map(|f| dot3(f, omega)).collect();
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

fn dot3(a: &[f64; N_FEATURES], b: &[f64; N_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Divide by the horizon, then standardise with statistics over every candidate seen in fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub horizon: usize,
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl FeatureNorm {
    pub fn identity(horizon: usize) -> Self {
        Self {
            horizon,
            mean: [0.0; N_FEATURES],
            std: [1.0; N_FEATURES],
        }
    }

    pub fn fit(sets: &[CandidateSet]) -> Result<Self> {
        let horizon = sets.first().map(|s| s.horizon).ok_or_else(|| Error::Data("no demonstrations".into()))?;
        let mut n = 0.0;
        let mut sum = [0.0; N_FEATURES];
        let mut sq = [0.0; N_FEATURES];
        for s in sets {
            if s.horizon != horizon {
                return Err(Error::shape("demonstrations use different horizons"));
            }
            for f in s.features() {
                for k in 0..N_FEATURES {
                    let v = f[k] / horizon as f64;
                    sum[k] += v;
                    sq[k] += v * v;
                }
                n += 1.0;
            }
        }
        let mut mean = [0.0; N_FEATURES];
        let mut std = [1.0; N_FEATURES];
        for k in 0..N_FEATURES {
            mean[k] = sum[k] / n;
            let sd = (sq[k] / n - mean[k] * mean[k]).max(0.0).sqrt();
            std[k] = if sd > 1e-9 { sd } else { 1.0 };
        }
        Ok(Self { horizon, mean, std })
    }

    pub fn apply(&self, f: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            out[k] = (f[k] / self.horizon as f64 - self.mean[k]) / self.std[k];
        }
        out
    }
}

/// Fitted reward weights over normalised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub omega: [f64; N_FEATURES],
    pub norm: FeatureNorm,
}

/// One expert demonstration: the candidate lattice around the observed start
/// state and the index of the candidate nearest to what the driver did.
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub candidates: CandidateSet,
    pub expert: usize,
}

impl Demo {
    pub fn new(init: LongState, lead_x: &[f64], realized_x: &[f64], horizon: usize) -> Result<Self> {
        let candidates = generate_candidates(init, lead_x, horizon)?;
        let expert = candidates.nearest(realized_x)?;
        Ok(Self { candidates, expert })
    }
}

/// Builds one demonstration per episode: the T-Rear vehicle from the
/// lane-change start, with the merging ego as its leader.
pub fn demos_from_episodes(episodes: &[Episode], horizon: usize) -> Result<Vec<Demo>> {
    let mut out = Vec::new();
    for ep in episodes {
        let s = ep.lc_start_idx;
        if s + horizon >= ep.t_rear.len() {
            continue;
        }
        let tr = &ep.t_rear;
        let init = LongState {
            x: tr.x_long[s],
            v: tr.v[s],
            a: tr.a[s],
        };
        out.push(Demo::new(
            init,
            &ep.ego.x_long[s..=s + horizon],
            &tr.x_long[s..=s + horizon],
            horizon,
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Grow the step by this factor after every accepted iteration (1 = fixed step).
    pub step_growth: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step: 0.05,
            max_iters: 500,
            grad_tol: 1e-6,
            step_growth: 1.0,
        }
    }
}

impl FitConfig {
    pub const KEYS: &'static [&'static str] = &["irl_step", "irl_max_iters", "irl_grad_tol"];

    pub fn from_config(cfg: &crate::config::Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            step: cfg.get("irl_step", d.step)?,
            max_iters: cfg.get("irl_max_iters", d.max_iters)?,
            grad_tol: cfg.get("irl_grad_tol", d.grad_tol)?,
            ..d
        };
        if !(c.step > 0.0 && c.grad_tol >= 0.0) {
            return Err(Error::config("irl_step must be positive and irl_grad_tol non-negative"));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub log_likelihood: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Mean log-likelihood and its gradient (empirical minus expected features).
fn objective(demos: &[Vec<[f64; N_FEATURES]>], experts: &[usize], omega: &[f64; N_FEATURES]) -> (f64, [f64; N_FEATURES]) {
    let mut ll = 0.0;
    let mut g = [0.0; N_FEATURES];
    for (feats, &e) in demos.iter().zip(experts) {
        let s: Vec<f64> = feats.iter().map(|f| dot3(f, omega)).collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        ll += s[e] - m - z.ln();
        for (f, sv) in feats.iter().zip(&s) {
            let p = (sv - m).exp() / z;
            for k in 0..N_FEATURES {
                g[k] -= p * f[k];
            }
        }
        for k in 0..N_FEATURES {
            g[k] += feats[e][k];
        }
    }
    let n = demos.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    (ll / n, g)
}

/// Gradient ascent on the mean demo log-likelihood, halving the step
/// whenever a trial step would decrease it.
pub fn fit_weights(demos: &[Demo], cfg: &FitConfig) -> Result<(RewardWeights, FitTrace)> {
    let sets: Vec<CandidateSet> = demos.iter().map(|d| d.candidates.clone()).collect();
    let norm = FeatureNorm::fit(&sets)?;
    fit_weights_normed(demos, norm, cfg)
}

pub fn fit_weights_normed(demos: &[Demo], norm: FeatureNorm, cfg: &FitConfig) -> Result<(RewardWeights, FitTrace)> {
    if demos.is_empty() {
        return Err(Error::Data("no demonstrations to fit".into()));
    }
    let feats: Vec<Vec<[f64; N_FEATURES]>> = demos
        .iter()
        .map(|d| d.candidates.features().iter().map(|f| norm.apply(f)).collect())
        .collect();
    let experts: Vec<usize> = demos.iter().map(|d| d.expert).collect();
    let mut omega = [0.0; N_FEATURES];
    let (mut ll, mut g) = objective(&feats, &experts, &omega);
    let l2 = |g: &[f64; N_FEATURES]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut trace = FitTrace {
        log_likelihood: vec![ll],
        grad_norm: vec![l2(&g)],
        iterations: 0,
        converged: l2(&g) < cfg.grad_tol,
    };
    let mut step = cfg.step;
    while trace.iterations < cfg.max_iters && !trace.converged {
        let mut accepted = false;
        for _ in 0..60 {
            let trial: [f64; N_FEATURES] = std::array::from_fn(|k| omega[k] + step * g[k]);
            let (ll2, g2) = objective(&feats, &experts, &trial);
            if ll2 >= ll {
                omega = trial;
                ll = ll2;
                g = g2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.iterations += 1;
        trace.log_likelihood.push(ll);
        trace.grad_norm.push(l2(&g));
        if omega.iter().map(|w| w * w).sum::<f64>().sqrt() > 1e3 {
            return Err(Error::numeric(
                "reward weights diverged (|omega| > 1e3); check feature scaling or demo separability",
            ));
        }
        if !accepted {
            break;
        }
        step *= cfg.step_growth;
        trace.converged = l2(&g) < cfg.grad_tol;
    }
    Ok((RewardWeights { omega, norm }, trace))
}

/// Empirical and model-expected normalised features at `w`.
pub fn feature_expectations(demos: &[Demo], w: &RewardWeights) -> ([f64; N_FEATURES], [f64; N_FEATURES]) {
    let mut emp = [0.0; N_FEATURES];
    let mut exp = [0.0; N_FEATURES];
    for d in demos {
        let f: Vec<[f64; N_FEATURES]> = d.candidates.features().iter().map(|f| w.norm.apply(f)).collect();
        let p = maxent_probs(&f, &w.omega);
        for k in 0..N_FEATURES {
            emp[k] += f[d.expert][k];
            exp[k] += f.iter().zip(&p).map(|(fi, pi)| pi * fi[k]).sum::<f64>();
        }
    }
    let n = demos.len() as f64;
    (emp.map(|v| v / n), exp.map(|v| v / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Probability-weighted mean trajectory.
    pub expected: Rollout,
    pub argmax: usize,
    pub probs: Vec<f64>,
}

/// Expected trajectory under the fitted Max-Ent distribution.
pub fn predict(init: LongState, lead_x: &[f64], w: &RewardWeights, horizon: usize) -> Result<Prediction> {
    let set = generate_candidates(init, lead_x, horizon)?;
    Ok(predict_from(&set, w))
}

pub fn predict_from(set: &CandidateSet, w: &RewardWeights) -> Prediction {
    let f: Vec<[f64; N_FEATURES]> = set.features().iter().map(|f| w.norm.apply(f)).collect();
    let probs = maxent_probs(&f, &w.omega);
    let n = set.candidates[0].rollout.len();
    let mut e = Rollout {
        x: vec![0.0; n],
        v: vec![0.0; n],
        a: vec![0.0; n],
    };
    for (c, &p) in set.candidates.iter().zip(&probs) {
        for k in 0..n {
            e.x[k] += p * c.rollout.x[k];
            e.v[k] += p * c.rollout.v[k];
            e.a[k] += p * c.rollout.a[k];
        }
    }
    let argmax = probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b })
        .0;
    Prediction {
        expected: e,
        argmax,
        probs,
    }
}

/// Draws demonstrations from the Max-Ent distribution of a known ω* over
/// randomised start states; the self-consistent oracle for fitting.
pub fn sample_demos<R: Rng + ?Sized>(
    omega_star: &[f64; N_FEATURES],
    norm: &FeatureNorm,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Demo>> {
    let h = norm.horizon;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let init = LongState {
            x: 0.0,
            v: rng.random_range(6.0..16.0),
            a: rng.random_range(-0.5..0.5),
        };
        let lead_v = rng.random_range(6.0..16.0);
        let gap0 = rng.random_range(8.0..40.0);
        let lead_x: Vec<f64> = (0..=h).map(|k| gap0 + lead_v * k as f64 * DT).collect();
        let candidates = generate_candidates(init, &lead_x, h)?;
        let f: Vec<[f64; N_FEATURES]> = candidates.features().iter().map(|f| norm.apply(f)).collect();
        let p = maxent_probs(&f, omega_star);
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        let mut expert = p.len() - 1;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                expert = i;
                break;
            }
        }
        out.push(Demo { candidates, expert });
    }
    Ok(out)
}

/// Mean speed of the horizon-step positions of a prediction.
pub fn mean_speed(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    (x[x.len() - 1] - x[0]) / ((x.len() - 1) as f64 * DT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn far_lead(h: usize) -> Vec<f64> {
        (0..=h).map(|k| 1e6 + k as f64).collect()
    }

    #[test]
    fn constant_speed_features() {
        let r = rollout(LongState { x: 0.0, v: 10.0, a: 0.0 }, &[0.0; 20]);
        let f = traj_features(&r, &far_lead(20)).unwrap();
        assert!((f.f[0] - 200.0).abs() < 1e-9);
        assert!(f.f[1] < 1e-12);
        assert_eq!(f.f[2], 0.0);
        assert!((r.x[20] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gap_gives_unit_safety_term() {
        let r = rollout(LongState { x: 0.0, v: 10.0, a: 0.0 }, &[0.0; 1]);
        let f = traj_features(&r, &[5.0, r.x[1]]).unwrap();
        assert!((f.f[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lead_behind_is_flagged_and_capped() {
        let r = rollout(LongState { x: 0.0, v: 0.0, a: 0.0 }, &[0.0; 3]);
        let f = traj_features(&r, &[-100.0; 4]).unwrap();
        assert_eq!(f.lead_behind_steps, 3);
        assert!((f.f[1] - 3.0 * SAFETY_EXP_CAP.exp()).abs() < 1e-6);
    }

    #[test]
    fn candidate_lattice() {
        let init = LongState { x: 3.0, v: 12.0, a: 0.4 };
        let set = generate_candidates(init, &far_lead(30), 30).unwrap();
        assert_eq!(set.candidates.len(), 64);
        for c in &set.candidates {
            assert_eq!((c.rollout.x[0], c.rollout.v[0]), (3.0, 12.0));
            assert!(c.rollout.v.iter().all(|&v| v >= 0.0));
        }
        let zero = set.candidates.iter().find(|c| c.accel == (0.0, 0.0)).unwrap();
        for k in 0..=30 {
            assert!((zero.rollout.x[k] - (3.0 + 12.0 * k as f64 * DT)).abs() < 1e-9);
        }
    }

    #[test]
    fn probabilities() {
        assert_eq!(maxent_probs(&[[1.0, 2.0, 3.0]], &[0.3, -1.0, 2.0]), vec![1.0]);
        let f = [[1.0, 0.0, 2.0], [0.5, 3.0, -1.0], [2.0, 1.0, 0.0]];
        for p in maxent_probs(&f, &[0.0; 3]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = [0.7, -0.2, 1.1];
        let shifted: Vec<[f64; 3]> = f.iter().map(|v| [v[0] + 5.0, v[1] - 2.0, v[2] + 0.3]).collect();
        for (a, b) in maxent_probs(&f, &w).iter().zip(maxent_probs(&shifted, &w)) {
            assert!((a - b).abs() < 1e-12);
        }
        let perm = [f[2], f[0], f[1]];
        let (p, q) = (maxent_probs(&f, &w), maxent_probs(&perm, &w));
        assert!((p[2] - q[0]).abs() < 1e-15 && (p[0] - q[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_iterations_return_zero_weights() {
        let mut r = rng::seeded(1);
        let demos = sample_demos(&[0.5, -0.5, 0.0], &FeatureNorm::identity(20), 5, &mut r).unwrap();
        let cfg = FitConfig {
            max_iters: 0,
            ..FitConfig::default()
        };
        let (w, t) = fit_weights(&demos, &cfg).unwrap();
        assert_eq!(w.omega, [0.0; 3]);
        assert_eq!(t.iterations, 0);
    }

    #[test]
    fn separated_demo_dominates_after_fitting() {
        // The hardest-braking candidate is a vertex of the feature hull, so likelihood grows without bound along one direction.
        let init = LongState { x: 0.0, v: 12.0, a: 0.0 };
        let lead: Vec<f64> = (0..=30).map(|k| 25.0 + 12.0 * k as f64 * DT).collect();
        let set = generate_candidates(init, &lead, 30).unwrap();
        let demos = vec![Demo {
            candidates: set.clone(),
            expert: 0,
        }];
        let cfg = FitConfig {
            max_iters: 5000,
            ..FitConfig::default()
        };
        let (w, _) = fit_weights(&demos, &cfg).unwrap();
        let p = predict_from(&set, &w);
        assert_eq!(p.argmax, 0);
        assert!(p.probs[0] > 0.9, "{}", p.probs[0]);
    }

    #[test]
    fn prediction_contract() {
        let init = LongState { x: 0.0, v: 10.0, a: 0.0 };
        let lead = far_lead(40);
        let norm = FeatureNorm::identity(40);
        let eff = RewardWeights {
            omega: [5.0, 0.0, 0.0],
            norm,
        };
        let p = predict(init, &lead, &eff, 40).unwrap();
        assert_eq!(p.expected.len(), 41);
        assert!(mean_speed(&p.expected.x) >= 10.0);
        // A single candidate predicts itself.
        let set = generate_candidates(init, &lead, 40).unwrap();
        let single = CandidateSet {
            horizon: 40,
            candidates: vec![set.candidates[7].clone()],
        };
        assert_eq!(predict_from(&single, &eff).expected, set.candidates[7].rollout);
    }

    #[test]
    fn nearest_candidate_ties_go_low() {
        let init = LongState { x: 0.0, v: 10.0, a: 0.0 };
        let set = generate_candidates(init, &far_lead(10), 10).unwrap();
        let target = set.candidates[9].rollout.x.clone();
        assert_eq!(set.nearest(&target).unwrap(), 9);
        let dup = CandidateSet {
            horizon: 10,
            candidates: vec![set.candidates[3].clone(), set.candidates[3].clone()],
        };
        assert_eq!(dup.nearest(&target).unwrap(), 0);
    }

    #[test]
    fn recovers_known_weights_by_feature_matching() {
        let mut r = rng::derive(7, 0x1e1);
        let h = 30;
        // Fix the sampling normalisation from a pilot batch so ω* acts on unit-scale features.
        let pilot = sample_demos(&[0.0; 3], &FeatureNorm::identity(h), 50, &mut r).unwrap();
        let sets: Vec<CandidateSet> = pilot.iter().map(|d| d.candidates.clone()).collect();
        let norm = FeatureNorm::fit(&sets).unwrap();
        let omega_star = [1.0, -2.0, -0.5];
        let demos = sample_demos(&omega_star, &norm, 400, &mut r).unwrap();
        let cfg = FitConfig {
            max_iters: 20_000,
            ..FitConfig::default()
        };
        let (w, trace) = fit_weights(&demos, &cfg).unwrap();
        for pair in trace.log_likelihood.windows(2) {
            assert!(pair[1] >= pair[0], "{pair:?}");
        }
        let (emp, exp) = feature_expectations(&demos, &w);
        let gap = emp.iter().zip(&exp).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap <= 1e-3, "{gap}");
        for (a, b) in w.omega.iter().zip(omega_star) {
            assert!((a - b).abs() < 0.3, "{:?}", w.omega);
        }
    }
}
