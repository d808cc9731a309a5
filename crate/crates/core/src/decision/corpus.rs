//! Rule-generated decision corpus with a known answer: a driver changes lane
//! iff the leader is slower and the gap to the target-lane follower exceeds
//! a minimum that depends on that follower's driving style.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{stratified_split, Action, Sample, SampleSet, Style, FEATURE_DIM, SEQ_LEN};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub samples: usize,
    /// Lead must be at least this much slower than the ego, m/s.
    pub lead_slower_by: f64,
    /// Minimum acceptable T-Rear gap per style (aggressive, normal, conservative), m.
    pub min_gap: [f64; 3],
    pub max_gap: f64,
    /// Gaps within this distance of the style threshold are not drawn, m.
    pub gap_margin: f64,
    /// Lead speed differences within this distance of the threshold are not drawn, m/s.
    pub speed_margin: f64,
    /// Per-frame measurement noise on gaps, m.
    pub gap_noise: f64,
    /// Per-frame measurement noise on speeds, m/s.
    pub speed_noise: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            samples: 3000,
            lead_slower_by: 0.5,
            min_gap: [25.0, 15.0, 8.0],
            max_gap: 40.0,
            gap_margin: 1.0,
            speed_margin: 0.25,
            gap_noise: 1.0,
            speed_noise: 0.1,
        }
    }
}

impl CorpusConfig {
    /// The labelling rule: `mean_gap` is the window-mean T-Rear gap.
    pub fn label(&self, lead_rel_v: f64, mean_gap: f64, style: Style) -> Action {
        if lead_rel_v <= -self.lead_slower_by && mean_gap > self.min_gap[style.index()] {
            Action::Lc
        } else {
            Action::Lk
        }
    }
}

/// Rough per-style statistics used for the auxiliary style features.
fn style_stats(style: Style) -> [f64; 6] {
    match style {
        Style::Aggressive => [15.0, 0.1, 2.0, 1.1, 19.0, 2.8],
        Style::Normal => [12.0, 0.0, 1.5, 0.7, 15.0, 1.8],
        Style::Conservative => [9.0, -0.05, 1.0, 0.4, 11.0, 1.0],
    }
}

/// Uniform on [lo, hi) excluding the band |v − centre| < margin.
fn draw_outside<R: Rng>(r: &mut R, lo: f64, hi: f64, centre: f64, margin: f64) -> f64 {
    loop {
        let v = r.random_range(lo..hi);
        if (v - centre).abs() >= margin {
            return v;
        }
    }
}

pub fn generate_corpus(cfg: &CorpusConfig, seed: u64) -> Result<SampleSet> {
    if cfg.samples < 10 {
        return Err(Error::config("a decision corpus needs at least 10 samples"));
    }
    if !(cfg.gap_margin >= 0.0 && cfg.speed_margin >= 0.0 && 2.0 * cfg.gap_margin < cfg.max_gap && cfg.speed_margin < 1.0)
    {
        return Err(Error::config("corpus margins must be non-negative and leave room to draw samples"));
    }
    let mut r = rng::derive(seed, 0xc0_4b05);
    let gap_n = Normal::new(0.0, cfg.gap_noise.max(1e-12)).expect("positive sigma");
    let v_n = Normal::new(0.0, cfg.speed_noise.max(1e-12)).expect("positive sigma");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let dt = 0.1;
    let mut samples = Vec::with_capacity(cfg.samples);
    for id in 0..cfg.samples {
        let style = Style::ALL[r.random_range(0..3)];
        let v_e = r.random_range(8.0..16.0);
        let dv_lead = draw_outside(&mut r, -4.0, 2.0, -cfg.lead_slower_by, cfg.speed_margin);
        let dv_rear = r.random_range(-2.0..3.0);
        let lead_gap0 = r.random_range(10.0..60.0);
        let mean_gap = draw_outside(&mut r, 0.0, cfg.max_gap, cfg.min_gap[style.index()], cfg.gap_margin);
        let a_e = 0.3 * unit.sample(&mut r);
        let offset = 0.3 * unit.sample(&mut r);
        let mid = (SEQ_LEN as f64 - 1.0) / 2.0;
        let mut features = Vec::with_capacity(SEQ_LEN * FEATURE_DIM);
        for t in 0..SEQ_LEN {
            let tt = (t as f64 - mid) * dt;
            let ve = v_e + a_e * tt;
            let vf = ve + dv_lead;
            let vr = ve + dv_rear;
            // Rear gap shrinks when the follower is faster; centred on the window mean.
            let d_tr = (mean_gap - dv_rear * tt).max(0.0);
            let d_f = (lead_gap0 + dv_lead * (t as f64 * dt)).max(0.0);
            let row = [
                ve + v_n.sample(&mut r),
                a_e + 0.05 * unit.sample(&mut r),
                offset + 0.05 * unit.sample(&mut r),
                0.1 * unit.sample(&mut r),
                vf + v_n.sample(&mut r),
                vr + v_n.sample(&mut r),
                d_f + gap_n.sample(&mut r),
                (d_tr + gap_n.sample(&mut r)).max(0.0),
                dv_lead + v_n.sample(&mut r),
                dv_rear + v_n.sample(&mut r),
            ];
            features.extend(row.iter().map(|&v| v as f32));
        }
        let mut aux = [0f32; 6];
        for (a, s) in aux.iter_mut().zip(style_stats(style)) {
            *a = (s * (1.0 + 0.05 * unit.sample(&mut r))) as f32;
        }
        samples.push(Sample {
            episode_id: id as u32,
            features,
            aux,
            action: cfg.label(dv_lead, mean_gap, style),
            style: Some(style),
            split: crate::ingest::Split::Train,
        });
    }
    let actions: Vec<Action> = samples.iter().map(|s| s.action).collect();
    for (s, sp) in samples.iter_mut().zip(stratified_split(&actions, seed)) {
        s.split = sp;
    }
    Ok(SampleSet { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_balanced() {
        let cfg = CorpusConfig {
            samples: 600,
            ..CorpusConfig::default()
        };
        let a = generate_corpus(&cfg, 1).unwrap();
        assert_eq!(a, generate_corpus(&cfg, 1).unwrap());
        let (lk, lc) = a.class_counts();
        let frac = lc as f64 / (lk + lc) as f64;
        assert!((0.25..0.45).contains(&frac), "{frac}");
    }

    #[test]
    fn draws_respect_the_margins() {
        let cfg = CorpusConfig {
            samples: 400,
            ..CorpusConfig::default()
        };
        let set = generate_corpus(&cfg, 5).unwrap();
        for s in &set.samples {
            let col = |c: usize| {
                s.features.chunks(FEATURE_DIM).map(|f| f[c] as f64).sum::<f64>() / SEQ_LEN as f64
            };
            // Window means of noisy channels sit near the drawn values.
            let thr = cfg.min_gap[s.style.unwrap().index()];
            assert!((col(7) - thr).abs() > cfg.gap_margin - 0.8, "{} vs {thr}", col(7));
            assert!((col(8) + cfg.lead_slower_by).abs() > cfg.speed_margin - 0.1);
        }
    }

    #[test]
    fn labels_follow_the_rule() {
        let cfg = CorpusConfig::default();
        assert_eq!(cfg.label(-1.0, 30.0, Style::Aggressive), Action::Lc);
        assert_eq!(cfg.label(-1.0, 20.0, Style::Aggressive), Action::Lk);
        assert_eq!(cfg.label(-1.0, 20.0, Style::Normal), Action::Lc);
        assert_eq!(cfg.label(0.5, 39.0, Style::Conservative), Action::Lk);
    }
}
