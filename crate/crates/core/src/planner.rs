//! Sigmoid lane-change reference, kinematic bicycle model, potential-field
//! costs and a receding-horizon MPC solved by projected gradient descent.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::detect::LANE_WIDTH;
use crate::error::{Error, Result};

pub const DT: f64 = 0.1;
pub const WHEELBASE: f64 = 2.7;
pub const CAR_LENGTH: f64 = 4.5;
pub const CAR_WIDTH: f64 = 1.8;

/// Expected longitudinal extent of the manoeuvre from the predicted T-Rear
/// positions, and whether the ego-speed fallback was used.
pub fn d_long(pred_x: &[f64], n: usize, ego_speed: f64) -> Result<(f64, bool)> {
    if pred_x.len() < 2 {
        return Err(Error::shape("predicted trajectory needs at least two states"));
    }
    let steps = (pred_x.len() - 1) as f64;
    let v_bar = pred_x.windows(2).map(|w| (w[1] - w[0]) / DT).sum::<f64>() / steps;
    if v_bar > 0.0 {
        Ok((v_bar * n as f64 * DT, false))
    } else {
        Ok((ego_speed.max(0.0) * n as f64 * DT, true))
    }
}

/// Lateral reference as a function of longitudinal position.
pub trait RefPath {
    fn y(&self, x: f64) -> f64;
    fn heading(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightPath {
    pub y: f64,
}

impl RefPath for StraightPath {
    fn y(&self, _x: f64) -> f64 {
        self.y
    }

    fn heading(&self, _x: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidPath {
    pub x0: f64,
    pub y0: f64,
    pub d_long: f64,
    pub d_lat: f64,
    pub tau: f64,
    pub b: f64,
}

/// Smallest τ that puts both endpoints within 1% of the asymptotes.
pub fn min_tau(d_long: f64) -> f64 {
    2.0 * 99f64.ln() / d_long
}

/// Default τ: the endpoints sit at 1/(1 + e⁶) ≈ 0.25% of the lateral offset.
pub fn default_tau(d_long: f64) -> f64 {
    12.0 / d_long
}

impl SigmoidPath {
    pub fn new(x0: f64, y0: f64, d_long: f64, d_lat: f64, tau: f64) -> Result<Self> {
        if !(d_long > 0.0) || !(d_lat.abs() > 0.0) {
            return Err(Error::config("sigmoid path needs d_long > 0 and a non-zero d_lat"));
        }
        let p = Self {
            x0,
            y0,
            d_long,
            d_lat,
            tau,
            b: 0.0,
        };
        let start = (p.y(x0) - y0) / d_lat;
        let end = (p.y(x0 + d_long) - y0) / d_lat;
        if !(start > 0.0 && start <= 0.01 && (0.99..1.0).contains(&end)) {
            return Err(Error::config(format!(
                "tau = {tau} leaves the path endpoints more than 1% from the lanes; use tau >= {:.6}",
                min_tau(d_long)
            )));
        }
        Ok(p)
    }

    /// Path with the default τ.
    pub fn with_default_tau(x0: f64, y0: f64, d_long: f64, d_lat: f64) -> Result<Self> {
        Self::new(x0, y0, d_long, d_lat, default_tau(d_long))
    }

    fn arg(&self, x: f64) -> f64 {
        -self.tau * (x - self.x0 - self.d_long / 2.0 + self.b)
    }

    /// `n + 1` points equally spaced over the manoeuvre.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(1);
        (0..=n)
            .map(|k| {
                let x = self.x0 + self.d_long * k as f64 / n as f64;
                (x, self.y(x))
            })
            .collect()
    }

    pub fn end_x(&self) -> f64 {
        self.x0 + self.d_long
    }
}

impl RefPath for SigmoidPath {
    fn y(&self, x: f64) -> f64 {
        self.d_lat / (1.0 + self.arg(x).exp()) + self.y0
    }

    fn heading(&self, x: f64) -> f64 {
        let e = self.arg(x).exp();
        let dy = if e.is_finite() {
            self.d_lat * self.tau * e / (1.0 + e).powi(2)
        } else {
            0.0
        };
        dy.atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicycleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

pub fn bicycle_step(s: BicycleState, u: Control, dt: f64, wheelbase: f64) -> BicycleState {
    BicycleState {
        x: s.x + s.v * s.psi.cos() * dt,
        y: s.y + s.v * s.psi.sin() * dt,
        psi: s.psi + s.v / wheelbase * u.steer.tan() * dt,
        v: (s.v + u.accel * dt).max(0.0),
    }
}

/// A painted line; `scale` multiplies the lane-line amplitude (the divider
/// being crossed is softer than the road edges).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneLine {
    pub y: f64,
    pub scale: f64,
}

/// Road edges at full strength and inner dividers at `divider_scale`, for lanes centred at `k·LANE_WIDTH`.
pub fn lane_lines(lanes: usize, divider_scale: f64) -> Vec<LaneLine> {
    (0..=lanes)
        .map(|k| LaneLine {
            y: (k as f64 - 0.5) * LANE_WIDTH,
            scale: if k == 0 || k == lanes { 1.0 } else { divider_scale },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub a_lane: f64,
    pub sigma_lane: f64,
    pub a_obs: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            a_lane: 2.0,
            sigma_lane: 0.5,
            a_obs: 10.0,
            sigma_x: 8.0,
            sigma_y: 1.2,
        }
    }
}

pub fn lane_potential(y: f64, lines: &[LaneLine], p: &PotentialConfig) -> f64 {
    lines
        .iter()
        .map(|l| l.scale * p.a_lane * (-(y - l.y).powi(2) / (2.0 * p.sigma_lane * p.sigma_lane)).exp())
        .sum()
}

pub fn obstacle_potential(x: f64, y: f64, obstacles: &[[f64; 2]], p: &PotentialConfig) -> f64 {
    obstacles
        .iter()
        .map(|o| p.a_obs * (-(((x - o[0]) / p.sigma_x).powi(2) + ((y - o[1]) / p.sigma_y).powi(2))).exp())
        .sum()
}

pub fn potential_cost(s: &BicycleState, lines: &[LaneLine], obstacles: &[[f64; 2]], p: &PotentialConfig) -> f64 {
    lane_potential(s.y, lines, p) + obstacle_potential(s.x, s.y, obstacles, p)
}

/// Axis-aligned footprint overlap of two vehicles given by their centres.
pub fn collides(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() < CAR_LENGTH && (a[1] - b[1]).abs() < CAR_WIDTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    pub wheelbase: f64,
    pub w_lateral: f64,
    pub w_heading: f64,
    pub w_speed: f64,
    pub w_accel: f64,
    pub w_steer: f64,
    pub w_potential: f64,
    pub accel_bounds: (f64, f64),
    pub steer_bounds: (f64, f64),
    pub max_iters: usize,
    pub fd_step: f64,
    pub potential: PotentialConfig,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt: DT,
            wheelbase: WHEELBASE,
            w_lateral: 1.0,
            w_heading: 2.0,
            w_speed: 0.2,
            w_accel: 0.02,
            w_steer: 0.5,
            w_potential: 1.0,
            accel_bounds: (-4.0, 3.0),
            steer_bounds: (-0.5, 0.5),
            max_iters: 200,
            fd_step: 1e-5,
            potential: PotentialConfig::default(),
        }
    }
}

impl MpcConfig {
    pub const KEYS: &'static [&'static str] = &[
        "horizon",
        "wheelbase",
        "w_lateral",
        "w_heading",
        "w_speed",
        "w_accel",
        "w_steer",
        "w_potential",
        "mpc_iters",
    ];

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            horizon: cfg.get("horizon", d.horizon)?,
            wheelbase: cfg.get("wheelbase", d.wheelbase)?,
            w_lateral: cfg.get("w_lateral", d.w_lateral)?,
            w_heading: cfg.get("w_heading", d.w_heading)?,
            w_speed: cfg.get("w_speed", d.w_speed)?,
            w_accel: cfg.get("w_accel", d.w_accel)?,
            w_steer: cfg.get("w_steer", d.w_steer)?,
            w_potential: cfg.get("w_potential", d.w_potential)?,
            max_iters: cfg.get("mpc_iters", d.max_iters)?,
            ..d
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("MPC horizon must be at least one step"));
        }
        if !(self.accel_bounds.0 < self.accel_bounds.1 && self.steer_bounds.0 < self.steer_bounds.1) {
            return Err(Error::config("MPC input bounds must be ordered (low < high)"));
        }
        if !(self.wheelbase > 0.0 && self.dt > 0.0) {
            return Err(Error::config("wheelbase and dt must be positive"));
        }
        Ok(())
    }

    fn project(&self, u: &mut [Control]) {
        for c in u {
            c.accel = c.accel.clamp(self.accel_bounds.0, self.accel_bounds.1);
            c.steer = c.steer.clamp(self.steer_bounds.0, self.steer_bounds.1);
        }
    }
}

/// Everything the MPC objective needs besides the control sequence.
pub struct Problem<'a> {
    pub reference: &'a dyn RefPath,
    pub v_ref: f64,
    pub lines: &'a [LaneLine],
    /// Predicted obstacle centres per horizon step (index k = 1..=H); shorter tracks hold their last state.
    pub obstacles: &'a [Vec<[f64; 2]>],
}

impl Problem<'_> {
    fn obstacles_at(&self, k: usize) -> Vec<[f64; 2]> {
        self.obstacles
            .iter()
            .filter_map(|t| t.get(k.min(t.len().saturating_sub(1))).copied())
            .collect()
    }
}

pub fn rollout(s0: BicycleState, u: &[Control], cfg: &MpcConfig) -> Vec<BicycleState> {
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push(s0);
    for c in u {
        let s = *out.last().expect("non-empty");
        out.push(bicycle_step(s, *c, cfg.dt, cfg.wheelbase));
    }
    out
}

pub fn mpc_cost(s0: BicycleState, u: &[Control], prob: &Problem, cfg: &MpcConfig) -> f64 {
    let states = rollout(s0, u, cfg);
    let mut j = 0.0;
    for (k, (s, c)) in states[1..].iter().zip(u).enumerate() {
        let ey = s.y - prob.reference.y(s.x);
        let epsi = s.psi - prob.reference.heading(s.x);
        let ev = s.v - prob.v_ref;
        j += cfg.w_lateral * ey * ey + cfg.w_heading * epsi * epsi + cfg.w_speed * ev * ev;
        j += cfg.w_accel * c.accel * c.accel + cfg.w_steer * c.steer * c.steer;
        if cfg.w_potential != 0.0 {
            j += cfg.w_potential * potential_cost(s, prob.lines, &prob.obstacles_at(k + 1), &cfg.potential);
        }
    }
    j
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    pub controls: Vec<Control>,
    pub predicted: Vec<BicycleState>,
    pub cost_trace: Vec<f64>,
}

impl MpcSolution {
    pub fn first(&self) -> Control {
        self.controls[0]
    }
}

/// Receding-horizon solver keeping the previous solution for warm starts.
#[derive(Debug, Clone)]
pub struct Mpc {
    pub cfg: MpcConfig,
    warm: Option<Vec<Control>>,
}

impl Mpc {
    pub fn new(cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, warm: None })
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, s0: BicycleState, prob: &Problem) -> Result<MpcSolution> {
        let cfg = &self.cfg;
        let h = cfg.horizon;
        let mut u = match self.warm.take() {
            Some(w) if w.len() == h => {
                let mut s: Vec<Control> = w[1..].to_vec();
                s.push(w[h - 1]);
                s
            }
            _ => vec![Control::default(); h],
        };
        cfg.project(&mut u);
        let mut j = mpc_cost(s0, &u, prob, cfg);
        if !j.is_finite() {
            return Err(Error::numeric("MPC cost is not finite at the initial control sequence"));
        }
        let mut trace = vec![j];
        let mut step = 1.0;
        for _ in 0..cfg.max_iters {
            let g = fd_gradient(s0, &u, prob, cfg);
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial: Vec<Control> = u
                    .iter()
                    .zip(&g)
                    .map(|(c, d)| Control {
                        accel: c.accel - step * d.accel,
                        steer: c.steer - step * d.steer,
                    })
                    .collect();
                cfg.project(&mut trial);
                let jt = mpc_cost(s0, &trial, prob, cfg);
                if !jt.is_finite() {
                    return Err(Error::numeric("MPC cost became non-finite during the line search"));
                }
                if jt < j {
                    let gain = j - jt;
                    u = trial;
                    j = jt;
                    accepted = true;
                    if gain <= 1e-10 * j.max(1.0) {
                        step = 0.0;
                    }
                    break;
                }
                step *= 0.5;
            }
            trace.push(j);
            if !accepted || step == 0.0 {
                break;
            }
            step *= 2.0;
        }
        let predicted = rollout(s0, &u, cfg);
        self.warm = Some(u.clone());
        Ok(MpcSolution {
            controls: u,
            predicted,
            cost_trace: trace,
        })
    }
}

fn component(c: &mut Control, comp: usize) -> &mut f64 {
    if comp == 0 {
        &mut c.accel
    } else {
        &mut c.steer
    }
}

fn fd_gradient(s0: BicycleState, u: &[Control], prob: &Problem, cfg: &MpcConfig) -> Vec<Control> {
    let h = cfg.fd_step;
    let mut work = u.to_vec();
    let mut g = vec![Control::default(); u.len()];
    for i in 0..u.len() {
        for comp in 0..2 {
            let orig = *component(&mut work[i], comp);
            *component(&mut work[i], comp) = orig + h;
            let jp = mpc_cost(s0, &work, prob, cfg);
            *component(&mut work[i], comp) = orig - h;
            let jm = mpc_cost(s0, &work, prob, cfg);
            *component(&mut work[i], comp) = orig;
            *component(&mut g[i], comp) = (jp - jm) / (2.0 * h);
        }
    }
    g
}

/// One step of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub state: BicycleState,
    pub control: Control,
    pub y_ref: f64,
}

/// Receding-horizon closed loop for `steps` steps; `obstacles(k)` gives the
/// predicted obstacle tracks seen at step k.
pub fn track(
    mpc: &mut Mpc,
    s0: BicycleState,
    reference: &dyn RefPath,
    v_ref: f64,
    lines: &[LaneLine],
    steps: usize,
    mut obstacles: impl FnMut(usize) -> Vec<Vec<[f64; 2]>>,
) -> Result<Vec<TrackStep>> {
    let mut s = s0;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let obs = obstacles(k);
        let prob = Problem {
            reference,
            v_ref,
            lines,
            obstacles: &obs,
        };
        let u = mpc.solve(s, &prob)?.first();
        out.push(TrackStep {
            state: s,
            control: u,
            y_ref: reference.y(s.x),
        });
        s = bicycle_step(s, u, mpc.cfg.dt, mpc.cfg.wheelbase);
    }
    out.push(TrackStep {
        state: s,
        control: Control::default(),
        y_ref: reference.y(s.x),
    });
    Ok(out)
}
