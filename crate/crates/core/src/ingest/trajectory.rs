use serde::{Deserialize, Serialize};

use super::parse::RawRecord;
use crate::detect::DT;
use crate::numeric::filters::{rolling_median, savgol_filter};

pub const FT_TO_M: f64 = 0.3048;
/// Monitored longitudinal segment, 300 ft .. 1,900 ft.
pub const SPAN_MIN_M: f64 = 300.0 * FT_TO_M;
pub const SPAN_MAX_M: f64 = 1900.0 * FT_TO_M;
pub const MEDIAN_WINDOW: usize = 51;
pub const SG_WINDOW: usize = 11;
pub const SG_ORDER: usize = 3;
/// Frames that must precede and follow a lane change (10 s).
pub const MARGIN_FRAMES: usize = 100;
pub const MAX_SPEED_JUMP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: u32,
    pub v_class: u8,
    /// Frame number of the first sample; sample `i` is frame `frame0 + i`.
    pub frame0: u64,
    pub t: Vec<f64>,
    pub x_long: Vec<f64>,
    pub y_lat: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub lane_id: Vec<u32>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last_frame(&self) -> u64 {
        self.frame0 + self.len() as u64 - 1
    }

    pub fn index_of_frame(&self, frame: u64) -> Option<usize> {
        (frame >= self.frame0 && frame <= self.last_frame()).then(|| (frame - self.frame0) as usize)
    }

    pub fn slice(&self, lo: usize, hi: usize) -> Trajectory {
        Trajectory {
            vehicle_id: self.vehicle_id,
            v_class: self.v_class,
            frame0: self.frame0 + lo as u64,
            t: self.t[lo..hi].to_vec(),
            x_long: self.x_long[lo..hi].to_vec(),
            y_lat: self.y_lat[lo..hi].to_vec(),
            v: self.v[lo..hi].to_vec(),
            a: self.a[lo..hi].to_vec(),
            lane_id: self.lane_id[lo..hi].to_vec(),
        }
    }

    /// Indices where `lane_id` differs from the previous frame.
    pub fn lane_transitions(&self) -> Vec<usize> {
        (1..self.len()).filter(|&i| self.lane_id[i] != self.lane_id[i - 1]).collect()
    }

    pub fn max_speed_jump(&self) -> f64 {
        self.v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}

/// Splits frame-ordered records into per-vehicle runs of consecutive frames.
pub fn group_vehicles(records: &[RawRecord]) -> Vec<Vec<RawRecord>> {
    let mut out: Vec<Vec<RawRecord>> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(run)
                if run.last().is_some_and(|p| p.vehicle_id == r.vehicle_id && p.frame_id + 1 == r.frame_id) =>
            {
                run.push(r.clone())
            }
            _ => out.push(vec![r.clone()]),
        }
    }
    out
}

/// Converts one vehicle's consecutive records to SI units.
pub fn to_si(records: &[RawRecord]) -> Trajectory {
    let first = &records[0];
    Trajectory {
        vehicle_id: first.vehicle_id,
        v_class: first.v_class,
        frame0: first.frame_id,
        t: records.iter().map(|r| r.frame_id as f64 * DT).collect(),
        x_long: records.iter().map(|r| r.local_y * FT_TO_M).collect(),
        y_lat: records.iter().map(|r| r.local_x * FT_TO_M).collect(),
        v: records.iter().map(|r| r.v_vel * FT_TO_M).collect(),
        a: records.iter().map(|r| r.v_acc * FT_TO_M).collect(),
        lane_id: records.iter().map(|r| r.lane_id).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    NotCar,
    OutsideSpan,
    LaneOutOfRange,
    NoLaneChange,
    MultipleLaneChanges,
    InsufficientMargin,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<Trajectory>,
    pub dropped: Vec<(u32, FilterReason)>,
}

fn filter_one(traj: &Trajectory) -> Result<Trajectory, FilterReason> {
    if traj.v_class != 2 {
        return Err(FilterReason::NotCar);
    }
    let inside: Vec<usize> = (0..traj.len())
        .filter(|&i| (SPAN_MIN_M..=SPAN_MAX_M).contains(&traj.x_long[i]))
        .collect();
    let (Some(&lo), Some(&hi)) = (inside.first(), inside.last()) else {
        return Err(FilterReason::OutsideSpan);
    };
    let t = traj.slice(lo, hi + 1);
    if t.lane_id.iter().any(|l| !(1..=4).contains(l)) {
        return Err(FilterReason::LaneOutOfRange);
    }
    match t.lane_transitions().as_slice() {
        [] => Err(FilterReason::NoLaneChange),
        [k] if *k >= MARGIN_FRAMES && t.len() - k >= MARGIN_FRAMES => Ok(t),
        [_] => Err(FilterReason::InsufficientMargin),
        _ => Err(FilterReason::MultipleLaneChanges),
    }
}

/// Keeps passenger cars that stay in lanes 1–4, change lane exactly once inside
/// the monitored segment and have at least 10 s of data on either side of the
/// change. Kept trajectories are cropped to the monitored segment.
pub fn filter_vehicles(trajectories: &[Trajectory]) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for traj in trajectories {
        match filter_one(traj) {
            Ok(t) => out.kept.push(t),
            Err(r) => out.dropped.push((traj.vehicle_id, r)),
        }
    }
    out
}

/// Second-order finite-difference derivative (one-sided at the ends), exact
/// for quadratics.
pub(crate) fn gradient(f: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        2 => vec![(f[1] - f[0]) / dt; 2],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt)
                } else if i == n - 1 {
                    (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt)
                } else {
                    (f[i + 1] - f[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SmoothOutcome {
    pub traj: Trajectory,
    /// Set when the trajectory was shorter than the median window and passed through untouched.
    pub too_short: bool,
}

/// Rolling median (5 s) followed by Savitzky–Golay on both position channels,
/// then speed and acceleration re-derived from the smoothed longitudinal position.
pub fn smooth(traj: &Trajectory) -> SmoothOutcome {
    if traj.len() < MEDIAN_WINDOW {
        return SmoothOutcome {
            traj: traj.clone(),
            too_short: true,
        };
    }
    let filt = |s: &[f64]| {
        savgol_filter(&rolling_median(s, MEDIAN_WINDOW), SG_WINDOW, SG_ORDER)
            .expect("window checked against length")
    };
    let mut out = traj.clone();
    out.x_long = filt(&traj.x_long);
    out.y_lat = filt(&traj.y_lat);
    out.v = gradient(&out.x_long, DT);
    out.a = gradient(&out.v, DT);
    SmoothOutcome {
        traj: out,
        too_short: false,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn straight(vehicle_id: u32, n: usize, x0: f64, v: f64, y: f64, lane: u32) -> Trajectory {
        Trajectory {
            vehicle_id,
            v_class: 2,
            frame0: 0,
            t: (0..n).map(|i| i as f64 * DT).collect(),
            x_long: (0..n).map(|i| x0 + v * i as f64 * DT).collect(),
            y_lat: vec![y; n],
            v: vec![v; n],
            a: vec![0.0; n],
            lane_id: vec![lane; n],
        }
    }

    #[test]
    fn unit_conversion() {
        let rec = |y: f64| RawRecord {
            vehicle_id: 1,
            frame_id: 1,
            local_x: 0.0,
            local_y: y,
            v_vel: 0.0,
            v_acc: 0.0,
            lane_id: 1,
            v_class: 2,
        };
        assert!((to_si(&[rec(300.0)]).x_long[0] - 91.44).abs() < 1e-12);
        assert!((to_si(&[rec(1900.0)]).x_long[0] - 579.12).abs() < 1e-9);
        assert_eq!(to_si(&[rec(0.0)]).x_long[0], 0.0);
    }

    #[test]
    fn grouping_splits_frame_gaps() {
        let rec = |v: u32, f: u64| RawRecord {
            vehicle_id: v,
            frame_id: f,
            local_x: 0.0,
            local_y: 0.0,
            v_vel: 0.0,
            v_acc: 0.0,
            lane_id: 1,
            v_class: 2,
        };
        let runs = group_vehicles(&[rec(1, 1), rec(1, 2), rec(1, 5), rec(2, 6)]);
        assert_eq!(runs.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1, 1]);
    }

    fn one_change(n: usize, at: usize) -> Trajectory {
        let mut t = straight(7, n, 100.0, 10.0, 1.8, 2);
        for l in &mut t.lane_id[at..] {
            *l = 3;
        }
        t
    }

    #[test]
    fn filter_rules() {
        let good = one_change(300, 150);
        let mut truck = good.clone();
        truck.v_class = 3;
        let mut twice = good.clone();
        for l in &mut twice.lane_id[200..] {
            *l = 2;
        }
        let mut lane5 = good.clone();
        lane5.lane_id[10] = 5;
        let early = one_change(300, 50);
        let out = filter_vehicles(&[good.clone(), truck, twice, lane5, early]);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].len(), 300);
        let reasons: Vec<FilterReason> = out.dropped.iter().map(|d| d.1).collect();
        assert_eq!(
            reasons,
            vec![
                FilterReason::NotCar,
                FilterReason::MultipleLaneChanges,
                FilterReason::LaneOutOfRange,
                FilterReason::InsufficientMargin
            ]
        );
    }

    #[test]
    fn filter_crops_to_segment() {
        let mut t = one_change(400, 200);
        t.x_long = (0..400).map(|i| 60.0 + i as f64).collect();
        let out = filter_vehicles(&[t]);
        let k = &out.kept[0];
        assert!(k.x_long[0] >= SPAN_MIN_M && *k.x_long.last().unwrap() <= SPAN_MAX_M);
        assert_eq!(k.frame0, 32);
    }

    #[test]
    fn smoothing_preserves_straight_motion() {
        let t = straight(1, 120, 100.0, 12.0, 5.0, 1);
        let s = smooth(&t);
        assert!(!s.too_short);
        for i in 0..t.len() {
            assert!((s.traj.x_long[i] - t.x_long[i]).abs() < 1e-6);
            assert!((s.traj.y_lat[i] - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn smoothing_removes_spike_and_derives_speed() {
        let mut t = straight(1, 120, 0.0, 0.0, 5.0, 1);
        // Quadratic longitudinal motion: x = 3 + 8 t + 0.6 t^2, so v = 8 + 1.2 t.
        for i in 0..t.len() {
            let s = t.t[i];
            t.x_long[i] = 3.0 + 8.0 * s + 0.6 * s * s;
        }
        t.y_lat[60] += 3.0;
        let s = smooth(&t).traj;
        assert!(s.y_lat.iter().all(|y| (y - 5.0).abs() < 1e-9));
        for i in 0..t.len() {
            assert!((s.v[i] - (8.0 + 1.2 * t.t[i])).abs() < 1e-3, "{i}");
        }
    }

    #[test]
    fn short_trajectory_passes_through() {
        let t = straight(1, 30, 0.0, 5.0, 1.0, 1);
        let s = smooth(&t);
        assert!(s.too_short);
        assert_eq!(s.traj, t);
    }
}
