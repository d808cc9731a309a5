//! Intelligent Driver Model car following and the MOBIL lane-change rule.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::ingest::Action;
use crate::planner::CAR_LENGTH;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmConfig {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Desired time headway, s.
    pub t_headway: f64,
    pub a_max: f64,
    pub b_comf: f64,
    /// Jam distance, m.
    pub s0: f64,
    pub delta: f64,
    /// Emergency deceleration magnitude and lower clamp, m/s².
    pub b_max: f64,
}

impl Default for IdmConfig {
    fn default() -> Self {
        Self {
            v0: 15.0,
            t_headway: 1.5,
            a_max: 1.4,
            b_comf: 2.0,
            s0: 2.0,
            delta: 4.0,
            b_max: 9.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilConfig {
    pub politeness: f64,
    /// Changing threshold Δa_th, m/s².
    pub a_threshold: f64,
    /// Maximum deceleration imposed on the new follower, m/s².
    pub b_safe: f64,
}

impl Default for MobilConfig {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            a_threshold: 0.2,
            b_safe: 4.0,
        }
    }
}

impl IdmConfig {
    pub const KEYS: &'static [&'static str] = &["idm_v0", "idm_t", "idm_a_max", "idm_b_comf", "idm_s0"];

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            v0: cfg.get("idm_v0", d.v0)?,
            t_headway: cfg.get("idm_t", d.t_headway)?,
            a_max: cfg.get("idm_a_max", d.a_max)?,
            b_comf: cfg.get("idm_b_comf", d.b_comf)?,
            s0: cfg.get("idm_s0", d.s0)?,
            ..d
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.v0, self.t_headway, self.a_max, self.b_comf, self.s0, self.delta, self.b_max];
        if all.iter().all(|v| *v > 0.0) {
            Ok(())
        } else {
            Err(Error::config("IDM parameters must all be positive"))
        }
    }

    /// Desired dynamic gap s*.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        self.s0 + v * self.t_headway + v * dv / (2.0 * (self.a_max * self.b_comf).sqrt())
    }

    /// Steady-following gap at speed `v` (Δv = 0, a = 0).
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        self.desired_gap(v, 0.0) / (1.0 - (v / self.v0).powf(self.delta)).sqrt()
    }
}

impl MobilConfig {
    pub const KEYS: &'static [&'static str] = &["mobil_politeness", "mobil_threshold", "mobil_b_safe"];

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            politeness: cfg.get("mobil_politeness", d.politeness)?,
            a_threshold: cfg.get("mobil_threshold", d.a_threshold)?,
            b_safe: cfg.get("mobil_b_safe", d.b_safe)?,
        };
        if !(0.0..=1.0).contains(&c.politeness) || !(c.a_threshold > 0.0 && c.b_safe > 0.0) {
            return Err(Error::config("MOBIL politeness must be in [0, 1]; threshold and b_safe positive"));
        }
        Ok(c)
    }
}

/// IDM acceleration for bumper gap `gap` behind a leader at `v_lead`; `None` is a free road.
pub fn idm_accel(gap: Option<f64>, v: f64, v_lead: f64, cfg: &IdmConfig) -> f64 {
    let free = 1.0 - (v / cfg.v0).powf(cfg.delta);
    let a = match gap {
        None => cfg.a_max * free,
        Some(g) if g <= 0.0 => return -cfg.b_max,
        Some(g) => {
            let s = cfg.desired_gap(v, v - v_lead);
            cfg.a_max * (free - (s / g).powi(2))
        }
    };
    a.clamp(-cfg.b_max, cfg.a_max)
}

/// Longitudinal position (vehicle centre) and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Car {
    pub x: f64,
    pub v: f64,
}

/// IDM acceleration of `follower` behind `leader` (centre positions).
pub fn follow(follower: Car, leader: Option<Car>, cfg: &IdmConfig) -> f64 {
    match leader {
        None => idm_accel(None, follower.v, follower.v, cfg),
        Some(l) => idm_accel(Some(l.x - follower.x - CAR_LENGTH), follower.v, l.v, cfg),
    }
}

/// Vehicles around the ego relevant to one lane-change decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilContext {
    pub ego: Car,
    pub lead: Option<Car>,
    pub rear: Option<Car>,
    pub target_lead: Option<Car>,
    pub target_rear: Option<Car>,
}

/// Outcome with the terms that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilDecision {
    pub action: Action,
    pub incentive: f64,
    /// Acceleration the new follower would have after the change.
    pub new_follower_accel: f64,
}

pub fn mobil_decide(ctx: &MobilContext, idm: &IdmConfig, mobil: &MobilConfig) -> MobilDecision {
    let a_e = follow(ctx.ego, ctx.lead, idm);
    let a_e_new = follow(ctx.ego, ctx.target_lead, idm);
    let (a_n, a_n_new) = match ctx.target_rear {
        Some(n) => (follow(n, ctx.target_lead, idm), follow(n, Some(ctx.ego), idm)),
        None => (0.0, 0.0),
    };
    let (a_o, a_o_new) = match ctx.rear {
        Some(o) => (follow(o, Some(ctx.ego), idm), follow(o, ctx.lead, idm)),
        None => (0.0, 0.0),
    };
    let incentive = a_e_new - a_e + mobil.politeness * ((a_n_new - a_n) + (a_o_new - a_o));
    let safe = a_n_new >= -mobil.b_safe;
    MobilDecision {
        action: if safe && incentive > mobil.a_threshold { Action::Lc } else { Action::Lk },
        incentive,
        new_follower_accel: a_n_new,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idm_limits() {
        let c = IdmConfig::default();
        assert!(idm_accel(None, c.v0, c.v0, &c).abs() < 1e-12);
        assert!((idm_accel(Some(1e9), 0.0, 0.0, &c) - c.a_max).abs() < 1e-9);
        assert_eq!(idm_accel(Some(0.0), 10.0, 10.0, &c), -c.b_max);
        assert_eq!(idm_accel(Some(-3.0), 10.0, 10.0, &c), -c.b_max);
        assert_eq!(idm_accel(Some(0.5), 15.0, 0.0, &c), -c.b_max);
    }

    #[test]
    fn equilibrium_gap_gives_zero_acceleration() {
        let c = IdmConfig::default();
        for v in [1.0, 5.0, 10.0, 14.0] {
            let s = c.equilibrium_gap(v);
            // Closed form: s* / sqrt(1 − (v/v0)^4).
            let oracle = (c.s0 + v * c.t_headway) / (1.0 - (v / c.v0).powi(4)).sqrt();
            assert!((s - oracle).abs() < 1e-12);
            assert!(idm_accel(Some(s), v, v, &c).abs() < 1e-9);
            assert!(idm_accel(Some(s * 0.9), v, v, &c) < 0.0);
            assert!(idm_accel(Some(s * 1.1), v, v, &c) > 0.0);
        }
    }

    fn ctx(target_rear: Option<Car>) -> MobilContext {
        MobilContext {
            ego: Car { x: 0.0, v: 12.0 },
            lead: Some(Car { x: 15.0, v: 6.0 }),
            rear: None,
            target_lead: None,
            target_rear,
        }
    }

    #[test]
    fn mobil_changes_to_empty_lane_behind_slow_leader() {
        let d = mobil_decide(&ctx(None), &IdmConfig::default(), &MobilConfig::default());
        assert_eq!(d.action, Action::Lc);
    }

    #[test]
    fn mobil_safety_veto() {
        let rear = Car { x: -6.0, v: 15.0 };
        let d = mobil_decide(&ctx(Some(rear)), &IdmConfig::default(), &MobilConfig::default());
        assert!(d.new_follower_accel < -4.0);
        assert_eq!(d.action, Action::Lk);
    }

    #[test]
    fn zero_politeness_is_egoistic() {
        let idm = IdmConfig::default();
        let m = MobilConfig {
            politeness: 0.0,
            ..MobilConfig::default()
        };
        let c = ctx(Some(Car { x: -30.0, v: 12.0 }));
        let d = mobil_decide(&c, &idm, &m);
        let own = follow(c.ego, c.target_lead, &idm) - follow(c.ego, c.lead, &idm);
        assert!((d.incentive - own).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = Config::default();
        cfg.set("mobil_politeness", 1.5);
        assert!(matches!(MobilConfig::from_config(&cfg), Err(Error::Config(_))));
        let mut cfg = Config::default();
        cfg.set("idm_t", -1);
        assert!(matches!(IdmConfig::from_config(&cfg), Err(Error::Config(_))));
    }
}
