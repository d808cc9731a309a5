//! Scenes for closed-loop replay: surrounding vehicles follow fixed tracks
//! on the 0.1 s grid while the ego is simulated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::idm::{follow, Car, IdmConfig};
use crate::detect::LANE_WIDTH;
use crate::error::{Error, Result};
use crate::detect::LaneChangeDirection;
use crate::ingest::Episode;
use crate::irl::{Demo, LongState};
use crate::planner::{BicycleState, DT};
use crate::rng;

/// A replayed vehicle. Beyond its last sample it continues at constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorTrack {
    pub id: u32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
}

impl ActorTrack {
    pub fn at(&self, step: usize) -> ActorState {
        let last = self.x.len() - 1;
        let k = step.min(last);
        let extra = (step - k) as f64 * DT;
        ActorState {
            id: self.id,
            x: self.x[k] + self.v[k] * extra,
            y: self.y[k],
            v: self.v[k],
            a: if step > last { 0.0 } else { self.a[k] },
        }
    }

    /// Track integrated from a speed profile `v(t)` at fixed lateral position.
    pub fn from_speed(id: u32, x0: f64, y: f64, steps: usize, v_at: impl Fn(f64) -> f64) -> Self {
        let mut t = Self {
            id,
            x: vec![x0],
            y: vec![y; steps + 1],
            v: vec![v_at(0.0)],
            a: Vec::with_capacity(steps + 1),
        };
        for k in 1..=steps {
            let v = v_at(k as f64 * DT).max(0.0);
            let prev = t.v[k - 1];
            t.x.push(t.x[k - 1] + 0.5 * (prev + v) * DT);
            t.v.push(v);
        }
        for k in 0..=steps {
            let nxt = t.v[(k + 1).min(steps)];
            let prv = t.v[k.saturating_sub(1)];
            let span = ((k + 1).min(steps) - k.saturating_sub(1)).max(1) as f64 * DT;
            t.a.push((nxt - prv) / span);
        }
        t
    }

    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n == 0 || self.y.len() != n || self.v.len() != n || self.a.len() != n {
            return Err(Error::Data(format!("actor {} has empty or ragged track columns", self.id)));
        }
        Ok(())
    }
}

/// Lanes are centred at `k · LANE_WIDTH`, k = 0..lanes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub ego: BicycleState,
    pub ego_lane: usize,
    pub target_lane: usize,
    pub lanes: usize,
    pub steps: usize,
    pub actors: Vec<ActorTrack>,
}

pub fn lane_centre(lane: usize) -> f64 {
    lane as f64 * LANE_WIDTH
}

/// Lane index containing lateral position `y`, if on the road.
pub fn lane_of(y: f64, lanes: usize) -> Option<usize> {
    let k = (y / LANE_WIDTH + 0.5).floor();
    (k >= 0.0 && (k as usize) < lanes).then_some(k as usize)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.lanes < 2 || self.ego_lane >= self.lanes || self.target_lane >= self.lanes {
            return Err(Error::config("scenario needs two or more lanes and valid ego/target lanes"));
        }
        if self.ego_lane == self.target_lane {
            return Err(Error::config("target lane must differ from the ego lane"));
        }
        if self.steps == 0 {
            return Err(Error::config("scenario duration must be at least one step"));
        }
        self.actors.iter().try_for_each(ActorTrack::validate)
    }

    pub fn actors_at(&self, step: usize) -> Vec<ActorState> {
        self.actors.iter().map(|a| a.at(step)).collect()
    }
}

/// Nearest vehicles ahead of and behind `x` in `lane`.
pub fn neighbours(actors: &[ActorState], x: f64, lane: usize, lanes: usize) -> (Option<ActorState>, Option<ActorState>) {
    let mut ahead: Option<ActorState> = None;
    let mut behind: Option<ActorState> = None;
    for a in actors.iter().filter(|a| lane_of(a.y, lanes) == Some(lane)) {
        if a.x >= x {
            if ahead.is_none_or(|b| a.x < b.x) {
                ahead = Some(*a);
            }
        } else if behind.is_none_or(|b| a.x > b.x) {
            behind = Some(*a);
        }
    }
    (ahead, behind)
}

/// Replica of a gap-closing merge: the ego sits behind a slow leader; in the
/// target lane a faster follower starts yielding shortly after the run begins.
pub fn case_study_scene() -> Scenario {
    let steps = 300;
    let t_rear = ActorTrack::from_speed(3, -14.0, lane_centre(1), steps, |t| {
        // 14 m/s, braking at 1.5 m/s² from t = 1.5 s down to 10 m/s.
        (14.0 - 1.5 * (t - 1.5).max(0.0)).max(10.0)
    });
    Scenario {
        name: "case_study".into(),
        ego: BicycleState {
            x: 0.0,
            y: lane_centre(0),
            psi: 0.0,
            v: 12.0,
        },
        ego_lane: 0,
        target_lane: 1,
        lanes: 2,
        steps,
        actors: vec![
            ActorTrack::from_speed(1, 35.0, lane_centre(0), steps, |_| 9.0),
            ActorTrack::from_speed(2, 40.0, lane_centre(1), steps, |_| 13.0),
            t_rear,
        ],
    }
}

/// A dense target-lane platoon (8 m spacing) passes the ego for the whole
/// run, so no gap ever opens while the ego sits behind a slow leader.
pub fn blocked_scene() -> Scenario {
    let steps = 120;
    let mut actors = vec![ActorTrack::from_speed(1, 30.0, lane_centre(0), steps, |_| 8.0)];
    for (i, x0) in (-10..=10).map(|k| k as f64 * 8.0).enumerate() {
        actors.push(ActorTrack::from_speed(2 + i as u32, x0, lane_centre(1), steps, |_| 10.0));
    }
    Scenario {
        name: "blocked".into(),
        ego: BicycleState {
            x: 0.0,
            y: lane_centre(0),
            psi: 0.0,
            v: 10.0,
        },
        ego_lane: 0,
        target_lane: 1,
        lanes: 2,
        steps,
        actors,
    }
}

/// Slow leader ahead, a single distant follower in the target lane.
pub fn open_gap_scene() -> Scenario {
    let steps = 150;
    Scenario {
        name: "open_gap".into(),
        ego: BicycleState {
            x: 0.0,
            y: lane_centre(0),
            psi: 0.0,
            v: 10.0,
        },
        ego_lane: 0,
        target_lane: 1,
        lanes: 2,
        steps,
        actors: vec![
            ActorTrack::from_speed(1, 25.0, lane_centre(0), steps, |_| 6.0),
            ActorTrack::from_speed(2, -40.0, lane_centre(1), steps, |_| 12.0),
        ],
    }
}

/// Replays a recorded episode: the ego starts from its recorded state, the
/// leader and T-Rear follow their recorded tracks. Lateral positions are
/// mapped so the source lane is lane 0 and the target lane is lane 1.
pub fn scenario_from_episode(ep: &Episode) -> Result<Scenario> {
    let n = ep.ego.len();
    if n < 2 || ep.lead.len() != n || ep.t_rear.len() != n {
        return Err(Error::Data(format!("episode {} has misaligned tracks", ep.id)));
    }
    let src = ((ep.ego.y_lat[0] / LANE_WIDTH).floor() + 0.5) * LANE_WIDTH;
    let sign = match ep.direction {
        LaneChangeDirection::Right => 1.0,
        LaneChangeDirection::Left => -1.0,
    };
    let map = |tr: &crate::ingest::Trajectory, id: u32| ActorTrack {
        id,
        x: tr.x_long.iter().map(|x| x - ep.ego.x_long[0]).collect(),
        y: tr.y_lat.iter().map(|y| (y - src) * sign).collect(),
        v: tr.v.clone(),
        a: tr.a.clone(),
    };
    let e = &ep.ego;
    let psi = ((e.y_lat[1] - e.y_lat[0]) * sign).atan2(e.x_long[1] - e.x_long[0]);
    Ok(Scenario {
        name: format!("episode_{}", ep.id),
        ego: BicycleState {
            x: 0.0,
            y: (e.y_lat[0] - src) * sign,
            psi,
            v: e.v[0],
        },
        ego_lane: 0,
        target_lane: 1,
        lanes: 2,
        steps: n - 1,
        actors: vec![map(&ep.lead, ep.lead.vehicle_id), map(&ep.t_rear, ep.t_rear.vehicle_id)],
    })
}

/// Demonstrations of cooperative target-lane followers: each follower reacts
/// to a vehicle merging ahead of it by car-following it with IDM.
pub fn cooperative_demos(count: usize, horizon: usize, seed: u64, idm: &IdmConfig) -> Result<Vec<Demo>> {
    let mut r = rng::derive(seed, 0xc0_0be7);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let v0 = r.random_range(9.0..16.0);
        let gap = r.random_range(7.0..35.0);
        let vm = r.random_range(8.0..14.0);
        let lead_x: Vec<f64> = (0..=horizon).map(|k| gap + vm * k as f64 * DT).collect();
        let mut x = vec![0.0];
        let mut v = v0;
        let mut a0 = 0.0;
        for k in 0..horizon {
            let a = follow(Car { x: x[k], v }, Some(Car { x: lead_x[k], v: vm }), idm);
            if k == 0 {
                a0 = a;
            }
            let vn = (v + a * DT).max(0.0);
            x.push(x[k] + 0.5 * (v + vn) * DT);
            v = vn;
        }
        let init = LongState { x: 0.0, v: v0, a: a0 };
        out.push(Demo::new(init, &lead_x, &x, horizon)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_integrate_speed() {
        let t = ActorTrack::from_speed(1, 5.0, 0.0, 10, |_| 10.0);
        assert!((t.x[10] - 15.0).abs() < 1e-12);
        let s = t.at(15);
        assert!((s.x - 20.0).abs() < 1e-12 && s.a == 0.0);
        let b = ActorTrack::from_speed(2, 0.0, 0.0, 20, |t| 10.0 - t);
        assert!((b.a[10] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lanes_and_neighbours() {
        assert_eq!(lane_of(0.0, 2), Some(0));
        assert_eq!(lane_of(LANE_WIDTH * 0.6, 2), Some(1));
        assert_eq!(lane_of(-LANE_WIDTH, 2), None);
        let sc = case_study_scene();
        sc.validate().unwrap();
        let actors = sc.actors_at(0);
        let (ahead, behind) = neighbours(&actors, 0.0, 1, 2);
        assert_eq!((ahead.unwrap().id, behind.unwrap().id), (2, 3));
        let (ahead, behind) = neighbours(&actors, 0.0, 0, 2);
        assert_eq!((ahead.unwrap().id, behind), (1, None));
    }

    #[test]
    fn case_study_follower_yields() {
        let sc = case_study_scene();
        let tr = &sc.actors[2];
        assert_eq!(tr.v[0], 14.0);
        assert!((tr.v[60] - 10.0).abs() < 1e-9);
        assert!(tr.v.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cooperative_demos_are_deterministic() {
        let idm = IdmConfig::default();
        let a = cooperative_demos(5, 30, 1, &idm).unwrap();
        let b = cooperative_demos(5, 30, 1, &idm).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|d| d.expert < 64));
    }

    #[test]
    fn invalid_scenarios_are_config_errors() {
        let mut sc = blocked_scene();
        sc.target_lane = 0;
        assert!(matches!(sc.validate(), Err(Error::Config(_))));
    }
}
