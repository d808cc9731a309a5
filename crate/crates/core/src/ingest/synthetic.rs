//! Synthetic NGSIM-format traffic: four lanes of platoons, some drivers making
//! a single sigmoid lane change. Used by tests and examples in place of the
//! real dataset.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::parse::RawRecord;
use super::trajectory::FT_TO_M;
use crate::detect::{DT, LANE_WIDTH};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub vehicles_per_lane: usize,
    pub lanes: u32,
    /// Time gap between consecutive entries in a lane, s.
    pub headway: f64,
    pub road_length: f64,
    pub truck_fraction: f64,
    pub change_fraction: f64,
    /// Share of lane changers that change back again (dropped by filtering).
    pub double_change_fraction: f64,
    /// Lateral measurement noise, m.
    pub noise: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            vehicles_per_lane: 30,
            lanes: 4,
            headway: 2.5,
            road_length: 620.0,
            truck_fraction: 0.08,
            change_fraction: 0.4,
            double_change_fraction: 0.1,
            noise: 0.05,
        }
    }
}

/// Ground truth for one generated lane change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedChange {
    pub vehicle_id: u32,
    /// Frame at the 1 % point of the manoeuvre.
    pub start_frame: u64,
    pub end_frame: u64,
    pub from_lane: u32,
    pub to_lane: u32,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub records: Vec<RawRecord>,
    pub changes: Vec<PlannedChange>,
}

fn lane_centre(lane: u32) -> f64 {
    (lane as f64 - 0.5) * LANE_WIDTH
}

/// Base speed per lane, faster on the left (lane 1).
fn lane_speed(lane: u32) -> f64 {
    15.0 - 1.5 * lane as f64
}

pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Scene {
    let mut r = rng::derive(seed, 0x5343_454e);
    let noise = Normal::new(0.0, cfg.noise.max(1e-12)).expect("positive sigma");
    let mut records = Vec::new();
    let mut changes = Vec::new();
    let mut next_id = 1u32;
    for lane in 1..=cfg.lanes {
        let offset = r.random_range(0.0..cfg.headway);
        for j in 0..cfg.vehicles_per_lane {
            let id = next_id;
            next_id += 1;
            let entry = ((offset + j as f64 * cfg.headway) / DT).round() as u64;
            let truck = r.random_bool(cfg.truck_fraction);
            let amp = r.random_range(0.1..0.8);
            let period = r.random_range(8.0..25.0);
            let phase = r.random_range(0.0..std::f64::consts::TAU);
            let base = lane_speed(lane) + r.random_range(-0.3..0.3);
            // Speed v(t) = base + amp sin(wt + phase); position integrates it in closed form.
            let w = std::f64::consts::TAU / period;
            let x_at = |t: f64| base * t - amp / w * ((w * t + phase).cos() - phase.cos());
            let v_at = |t: f64| base + amp * (w * t + phase).sin();
            let a_at = |t: f64| amp * w * (w * t + phase).cos();

            let change = (!truck && r.random_bool(cfg.change_fraction)).then(|| {
                let to = match lane {
                    1 => 2,
                    l if l == cfg.lanes => l - 1,
                    l => if r.random_bool(0.5) { l - 1 } else { l + 1 },
                };
                let dur = (r.random_range(1.2f64..2.0)).exp().clamp(3.0, 8.0);
                let start_x = r.random_range(220.0..340.0);
                let twice = r.random_bool(cfg.double_change_fraction);
                (to, dur, start_x, twice)
            });
            let n = (0..).take_while(|&k| x_at(k as f64 * DT) <= cfg.road_length).count();
            let start_t = change.map(|(_, dur, sx, _)| {
                let k = (0..n).find(|&k| x_at(k as f64 * DT) >= sx).unwrap_or(n / 2);
                k as f64 * DT + dur / 2.0
            });
            for k in 0..n {
                let t = k as f64 * DT;
                let mut y = lane_centre(lane);
                if let (Some((to, dur, _, twice)), Some(mid)) = (change, start_t) {
                    let steep = 2.0 * 99f64.ln() / dur;
                    let delta = lane_centre(to) - lane_centre(lane);
                    y += delta / (1.0 + (-steep * (t - mid)).exp());
                    if twice {
                        y -= delta / (1.0 + (-steep * (t - mid - 12.0)).exp());
                    }
                }
                let lane_id = ((y / LANE_WIDTH).floor() as i64 + 1).clamp(1, cfg.lanes as i64) as u32;
                records.push(RawRecord {
                    vehicle_id: id,
                    frame_id: entry + k as u64,
                    local_x: (y + noise.sample(&mut r)) / FT_TO_M,
                    local_y: x_at(t) / FT_TO_M,
                    v_vel: v_at(t) / FT_TO_M,
                    v_acc: a_at(t) / FT_TO_M,
                    lane_id,
                    v_class: if truck { 3 } else { 2 },
                });
            }
            if let (Some((to, dur, _, false)), Some(mid)) = (change, start_t) {
                changes.push(PlannedChange {
                    vehicle_id: id,
                    start_frame: entry + ((mid - dur / 2.0) / DT).round() as u64,
                    end_frame: entry + ((mid + dur / 2.0) / DT).round() as u64,
                    from_lane: lane,
                    to_lane: to,
                });
            }
        }
    }
    records.sort_by_key(|r| (r.vehicle_id, r.frame_id));
    Scene { records, changes }
}

/// Renders records in the NGSIM column layout.
pub fn to_csv(records: &[RawRecord]) -> String {
    let mut s = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,v_Acc,Lane_ID,v_Class\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
            r.vehicle_id, r.frame_id, r.local_x, r.local_y, r.v_vel, r.v_acc, r.lane_id, r.v_class
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_is_deterministic_and_ordered() {
        let cfg = SceneConfig {
            vehicles_per_lane: 5,
            ..SceneConfig::default()
        };
        let a = generate_scene(&cfg, 3);
        let b = generate_scene(&cfg, 3);
        assert_eq!(a.records, b.records);
        assert!(a
            .records
            .windows(2)
            .all(|w| (w[0].vehicle_id, w[0].frame_id) < (w[1].vehicle_id, w[1].frame_id)));
        for c in &a.changes {
            assert_eq!((c.from_lane as i64 - c.to_lane as i64).abs(), 1);
        }
    }
}
