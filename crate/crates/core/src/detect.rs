//! Lane-change start/end detection on lateral position traces.
//!
//! The detector takes the frame of peak lateral speed, walks outwards until the
//! lateral speed falls back to a quiet level, and accepts the bracket only when
//! it moves the vehicle across a lane line in the direction of the net lateral
//! displacement. Rejected brackets are excluded and the next-largest peak is
//! tried, up to `max_rejected_peaks` times.
//!
//! Two refinements make the boundaries land on the 1 %/99 % points of the
//! manoeuvre: the quiet threshold is a fraction of the peak speed (a logistic
//! transition is at ~3.96 % of its peak speed at the 1 % point), and the trace
//! is re-smoothed with a Savitzky–Golay window sized to the detected duration
//! before detecting again.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numeric::filters::savgol_filter;
use crate::numeric::stats::{cdf_residuals, lognormal_fit, LogNormal};

pub const LANE_WIDTH: f64 = 3.6576;
pub const DT: f64 = 0.1;

/// Direction of a lateral manoeuvre. Lateral position grows to the right, so
/// `Right` means the trace ends at a larger `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneChangeDirection {
    Left,
    Right,
}

/// Direction of the boundary walk along the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    /// Towards earlier frames.
    Left,
    /// Towards later frames.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    /// Fixed lateral-speed threshold in m/s.
    Absolute(f64),
    /// Fraction of the candidate peak's |lateral speed|.
    RelativeToPeak(f64),
}

impl Threshold {
    fn resolve(&self, peak_speed: f64) -> f64 {
        match *self {
            Threshold::Absolute(d) => d,
            Threshold::RelativeToPeak(f) => f * peak_speed.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub threshold: Threshold,
    pub lane_width: f64,
    pub max_rejected_peaks: usize,
    /// Total detection passes; passes after the first re-smooth the trace.
    pub passes: usize,
    /// Refinement smoothing window, in frames per second of detected duration.
    pub refine_frames_per_second: f64,
    pub refine_order: usize,
    /// Additionally require a sign flip of the lateral acceleration at the boundary.
    pub require_extremum: bool,
    pub dt: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            threshold: Threshold::RelativeToPeak(0.04),
            lane_width: LANE_WIDTH,
            max_rejected_peaks: 5,
            passes: 3,
            refine_frames_per_second: 9.0,
            refine_order: 3,
            require_extremum: false,
            dt: DT,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        let delta = match self.threshold {
            Threshold::Absolute(d) | Threshold::RelativeToPeak(d) => d,
        };
        if !(delta > 0.0) {
            return Err(Error::config(format!("detection threshold must be positive, got {delta}")));
        }
        if !(self.lane_width > 0.0) || !(self.dt > 0.0) {
            return Err(Error::config("lane_width and dt must be positive"));
        }
        if self.passes == 0 {
            return Err(Error::config("at least one detection pass is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcEvent {
    pub start_idx: usize,
    pub end_idx: usize,
    pub peak_idx: usize,
    pub duration: f64,
    pub direction: LaneChangeDirection,
}

/// First differences of lateral position divided by `dt`; one shorter than `y`.
pub fn lateral_speed(y: &[f64], dt: f64) -> Vec<f64> {
    y.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
}

fn lane_lines(y: &[f64], lane_width: f64) -> Vec<f64> {
    let top = y.iter().copied().fold(0.0f64, f64::max) + lane_width;
    (0..)
        .map(|k| k as f64 * lane_width)
        .take_while(|&l| l < top)
        .collect()
}

fn line_between(lines: &[f64], a: f64, b: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lines.iter().any(|&k| lo <= k && k <= hi)
}

/// True when a lane line lies between `y[left]` and `y[right]`.
pub fn has_lane_lines(y: &[f64], left: usize, right: usize, lane_width: f64) -> bool {
    line_between(&lane_lines(y, lane_width), y[left], y[right])
}

fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

fn is_extremum(v: &[f64], t: usize) -> bool {
    if t == 0 || t + 1 >= v.len() {
        return false;
    }
    sign(v[t + 1] - v[t]) != sign(v[t] - v[t - 1])
}

/// Walks from `start_idx` in `direction` to the first frame whose lateral speed
/// is at most `delta`. Returns that index and whether a lane line lies between
/// it and the peak step `[start_idx, start_idx + 1]`. When the walk runs out of
/// samples it returns the trace boundary and `false`.
pub fn search_boundary(
    v: &[f64],
    y: &[f64],
    start_idx: usize,
    delta: f64,
    direction: SearchDirection,
    lane_width: f64,
    require_extremum: bool,
) -> (usize, bool) {
    let lines = lane_lines(y, lane_width);
    let n = v.len();
    let mut t = start_idx as isize;
    let step: isize = match direction {
        SearchDirection::Left => -1,
        SearchDirection::Right => 1,
    };
    let inside = |t: isize| match direction {
        SearchDirection::Left => t >= 1,
        SearchDirection::Right => t < n as isize - 1,
    };
    while inside(t) {
        let i = t as usize;
        if v[i].abs() <= delta && (!require_extremum || is_extremum(v, i)) {
            let anchor = match direction {
                SearchDirection::Left => y[(start_idx + 1).min(y.len() - 1)],
                SearchDirection::Right => y[start_idx],
            };
            let crossed = line_between(&lines, y[i], anchor);
            return (i, crossed);
        }
        t += step;
    }
    match direction {
        SearchDirection::Left => (0, false),
        SearchDirection::Right => (n.saturating_sub(1), false),
    }
}

fn detect_single_pass(y: &[f64], cfg: &DetectConfig) -> Option<LcEvent> {
    let v = lateral_speed(y, cfg.dt);
    if v.len() < 2 {
        return None;
    }
    let net = y[y.len() - 1] - y[0];
    let mut excluded = vec![false; v.len()];
    for _ in 0..=cfg.max_rejected_peaks {
        let peak = (0..v.len())
            .filter(|&i| !excluded[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if v[b].abs() >= v[i].abs() => Some(b),
                _ => Some(i),
            })?;
        let delta = cfg.threshold.resolve(v[peak]);
        let (left, _) = search_boundary(&v, y, peak, delta, SearchDirection::Left, cfg.lane_width, cfg.require_extremum);
        let (right, _) = search_boundary(&v, y, peak, delta, SearchDirection::Right, cfg.lane_width, cfg.require_extremum);
        let accepted = v[peak] != 0.0
            && sign(v[peak]) == sign(net)
            && left < right
            && has_lane_lines(y, left, right, cfg.lane_width)
            && (y[right] - y[left]).abs() >= 0.5 * cfg.lane_width;
        if accepted {
            return Some(LcEvent {
                start_idx: left,
                end_idx: right,
                peak_idx: peak,
                duration: (right - left) as f64 * cfg.dt,
                direction: if net > 0.0 {
                    LaneChangeDirection::Right
                } else {
                    LaneChangeDirection::Left
                },
            });
        }
        for e in &mut excluded[left.min(peak)..=right.max(peak)] {
            *e = true;
        }
    }
    None
}

/// Detects the single lane change in a smoothed lateral trace, or `None` when
/// the trace is lane keeping.
pub fn detect_event(y: &[f64], cfg: &DetectConfig) -> Result<Option<LcEvent>> {
    cfg.validate()?;
    ensure_finite(y, || "lateral trace".to_string())?;
    let mut event = match detect_single_pass(y, cfg) {
        Some(e) => e,
        None => return Ok(None),
    };
    let order = cfg.refine_order;
    for _ in 1..cfg.passes {
        let mut w = (cfg.refine_frames_per_second * event.duration).round() as usize;
        w = (w | 1).max(2 * order + 3);
        let max_w = if y.len() % 2 == 1 { y.len() } else { y.len() - 1 };
        if max_w < 2 * order + 3 {
            break;
        }
        let smoothed = savgol_filter(y, w.min(max_w), order)?;
        match detect_single_pass(&smoothed, cfg) {
            Some(e) => event = e,
            None => break,
        }
    }
    Ok(Some(event))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub fit: LogNormal,
    /// (sorted duration, empirical CDF − fitted CDF)
    pub residuals: Vec<(f64, f64)>,
}

pub fn duration_stats(events: &[LcEvent]) -> Result<DurationStats> {
    let d: Vec<f64> = events.iter().map(|e| e.duration).collect();
    let fit = lognormal_fit(&d)?;
    Ok(DurationStats {
        residuals: cdf_residuals(&d, &fit),
        fit,
    })
}
