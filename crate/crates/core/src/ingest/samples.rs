use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::episode::Episode;
use super::trajectory::gradient;
use crate::detect::{DT, LANE_WIDTH};
use crate::rng;
use crate::style::extract_features;

pub const SEQ_LEN: usize = 20;
pub const INNER_DIM: usize = 4;
pub const INTER_DIM: usize = 6;
pub const FEATURE_DIM: usize = INNER_DIM + INTER_DIM;
/// Driving-style statistics of the T-Rear vehicle carried with every window.
pub const AUX_DIM: usize = 6;
pub const STRIDE: usize = 10;
/// Windows ending within this many frames before the lane-change start are labelled LC.
pub const LC_HORIZON: usize = 20;
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Aggressive = 0,
    Normal = 1,
    Conservative = 2,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Aggressive, Style::Normal, Style::Conservative];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Style> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Style::Aggressive => "aggressive",
            Style::Normal => "normal",
            Style::Conservative => "conservative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    Lk = 0,
    Lc = 1,
}

impl Action {
    pub fn from_bit(b: u8) -> Option<Action> {
        match b {
            0 => Some(Action::Lk),
            1 => Some(Action::Lc),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Action::Lk => "LK",
            Action::Lc => "LC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train = 0,
    Val = 1,
}

/// A 2-s window of ego-centric state. `features` is row-major `SEQ_LEN x FEATURE_DIM`:
/// columns are v_E, a_E, lane-centre offset, lateral velocity (inner) followed by
/// v_f, v_tr, d_Ef, d_Etr, v_f − v_E, v_tr − v_E (interaction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub episode_id: u32,
    pub features: Vec<f32>,
    pub aux: [f32; AUX_DIM],
    pub action: Action,
    pub style: Option<Style>,
    pub split: Split,
}

impl Sample {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.features[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    /// Frames as `f64` rows.
    pub fn frames(&self) -> Vec<Vec<f64>> {
        (0..SEQ_LEN)
            .map(|t| self.frame(t).iter().map(|&v| v as f64).collect())
            .collect()
    }

    /// Mean over the window of every feature column.
    pub fn mean_features(&self) -> [f64; FEATURE_DIM] {
        let mut m = [0.0; FEATURE_DIM];
        for t in 0..SEQ_LEN {
            for (acc, &v) in m.iter_mut().zip(self.frame(t)) {
                *acc += v as f64;
            }
        }
        m.iter_mut().for_each(|v| *v /= SEQ_LEN as f64);
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, which: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == which).collect()
    }

    /// (LK count, LC count)
    pub fn class_counts(&self) -> (usize, usize) {
        let lc = self.samples.iter().filter(|s| s.action == Action::Lc).count();
        (self.samples.len() - lc, lc)
    }
}

fn lane_offset(y: f64) -> f64 {
    y - ((y / LANE_WIDTH).floor() + 0.5) * LANE_WIDTH
}

/// The ten state features of frame `i`; `lat_v` is the ego lateral velocity trace.
pub fn frame_features(ep: &Episode, lat_v: &[f64], i: usize) -> [f64; FEATURE_DIM] {
    let (e, f, r) = (&ep.ego, &ep.lead, &ep.t_rear);
    [
        e.v[i],
        e.a[i],
        lane_offset(e.y_lat[i]),
        lat_v[i],
        f.v[i],
        r.v[i],
        (f.x_long[i] - e.x_long[i]).max(0.0),
        (e.x_long[i] - r.x_long[i]).max(0.0),
        f.v[i] - e.v[i],
        r.v[i] - e.v[i],
    ]
}

/// Stratified split: within each class a seeded shuffle sends the first
/// `round(0.8 n)` indices to training.
pub fn stratified_split(actions: &[Action], seed: u64) -> Vec<Split> {
    let mut split = vec![Split::Val; actions.len()];
    let mut rng = rng::derive(seed, 0x5911);
    for class in [Action::Lk, Action::Lc] {
        let mut idx: Vec<usize> = (0..actions.len()).filter(|&i| actions[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * TRAIN_FRACTION).round() as usize;
        for &i in &idx[..n_train] {
            split[i] = Split::Train;
        }
    }
    split
}

/// Cuts every episode into 20-frame windows with a 10-frame stride. A window is
/// LC when its last frame lies in `[lc_start − 20, lc_start]`, LK otherwise.
/// Style labels are left unassigned; the style stage fills them in.
pub fn make_samples(episodes: &[Episode], seed: u64) -> SampleSet {
    let mut samples = Vec::new();
    for ep in episodes {
        let n = ep.ego.len();
        let lat_v = gradient(&ep.ego.y_lat, DT);
        let aux = extract_features(&ep.t_rear.v, &ep.t_rear.a)
            .map(|f| f.to_array().map(|v| v as f32))
            .unwrap_or([0.0; AUX_DIM]);
        let mut start = 0;
        while start + SEQ_LEN <= n {
            let last = start + SEQ_LEN - 1;
            let lc = last <= ep.lc_start_idx && last + LC_HORIZON >= ep.lc_start_idx;
            let mut features = Vec::with_capacity(SEQ_LEN * FEATURE_DIM);
            for i in start..=last {
                features.extend(frame_features(ep, &lat_v, i).iter().map(|&v| v as f32));
            }
            samples.push(Sample {
                episode_id: ep.id,
                features,
                aux,
                action: if lc { Action::Lc } else { Action::Lk },
                style: None,
                split: Split::Train,
            });
            start += STRIDE;
        }
    }
    let actions: Vec<Action> = samples.iter().map(|s| s.action).collect();
    for (s, sp) in samples.iter_mut().zip(stratified_split(&actions, seed)) {
        s.split = sp;
    }
    SampleSet { samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::LaneChangeDirection;
    use crate::ingest::trajectory::tests::straight;

    fn episode(n: usize, lc_start: usize) -> Episode {
        Episode {
            id: 1,
            ego: straight(1, n, 100.0, 10.0, 1.8, 2),
            lead: straight(2, n, 130.0, 9.0, 1.8, 2),
            t_rear: straight(3, n, 80.0, 11.0, 5.5, 3),
            lc_start_idx: lc_start,
            lc_end_idx: lc_start + 40,
            direction: LaneChangeDirection::Right,
        }
    }

    #[test]
    fn lc_labels_only_before_start() {
        let set = make_samples(&[episode(300, 150)], 42);
        assert_eq!(set.len(), 29);
        for (k, s) in set.samples.iter().enumerate() {
            let last = k * STRIDE + SEQ_LEN - 1;
            let want = (130..=150).contains(&last);
            assert_eq!(s.action == Action::Lc, want, "window ending at {last}");
        }
        assert_eq!(set.class_counts().1, 2);
    }

    #[test]
    fn features_are_finite_and_gaps_non_negative() {
        let set = make_samples(&[episode(200, 120)], 1);
        for s in &set.samples {
            assert!(s.features.iter().all(|v| v.is_finite()));
            for t in 0..SEQ_LEN {
                assert!(s.frame(t)[6] >= 0.0 && s.frame(t)[7] >= 0.0);
            }
        }
        let f = set.samples[0].frame(0);
        assert_eq!(f[0], 10.0);
        assert!((f[2] - (1.8 - LANE_WIDTH / 2.0) as f32).abs() < 1e-6);
        assert_eq!(f[6], 30.0);
        assert_eq!(f[8], -1.0);
    }

    #[test]
    fn split_is_stratified() {
        let mut actions = vec![Action::Lk; 700];
        actions.extend(vec![Action::Lc; 300]);
        let split = stratified_split(&actions, 42);
        let frac = |class: Action| {
            let idx: Vec<usize> = (0..1000).filter(|&i| actions[i] == class).collect();
            idx.iter().filter(|&&i| split[i] == Split::Train).count() as f64 / idx.len() as f64
        };
        assert!((frac(Action::Lk) - frac(Action::Lc)).abs() <= 0.01);
        assert_eq!(split, stratified_split(&actions, 42));
    }
}
