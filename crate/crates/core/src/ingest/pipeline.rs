use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::episode::{attach_neighbors, DropReason, Episode};
use super::parse::RawRecord;
use super::samples::{make_samples, Action, SampleSet, Split};
use super::trajectory::{filter_vehicles, group_vehicles, smooth, to_si, MAX_SPEED_JUMP};
use crate::config::Config;
use crate::detect::{detect_event, DetectConfig, LcEvent, Threshold};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub detect: DetectConfig,
    /// Keep only rows whose `Location` column matches (when present).
    pub location: Option<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            detect: DetectConfig::default(),
            location: Some("i-80".into()),
        }
    }
}

impl IngestConfig {
    pub const KEYS: &'static [&'static str] = &[
        "delta",
        "delta_fraction",
        "lane_width",
        "max_rejected_peaks",
        "detect_passes",
        "location",
    ];

    /// Reads the detection and ingestion keys, ignoring keys for other stages.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut out = Self::default();
        let d = &mut out.detect;
        if let Some(_) = cfg.raw("delta") {
            d.threshold = Threshold::Absolute(cfg.get("delta", 0.05)?);
        } else if cfg.raw("delta_fraction").is_some() {
            d.threshold = Threshold::RelativeToPeak(cfg.get("delta_fraction", 0.04)?);
        }
        d.lane_width = cfg.get("lane_width", d.lane_width)?;
        d.max_rejected_peaks = cfg.get("max_rejected_peaks", d.max_rejected_peaks)?;
        d.passes = cfg.get("detect_passes", d.passes)?;
        if let Some(loc) = cfg.raw("location") {
            out.location = (!loc.is_empty() && loc != "any").then(|| loc.to_string());
        }
        out.detect.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: usize,
    pub trajectories: usize,
    pub filtered_out: BTreeMap<String, usize>,
    pub passed_filters: usize,
    pub episode_drops: BTreeMap<String, usize>,
    pub episodes: usize,
    pub samples: usize,
    pub lk_samples: usize,
    pub lc_samples: usize,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Trajectories too short to smooth, passed through unfiltered.
    pub smoothing_passthrough: usize,
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub episodes: Vec<Episode>,
    pub events: Vec<LcEvent>,
    pub samples: SampleSet,
    pub report: IngestReport,
}

fn reason_key<T: Serialize>(r: &T) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "unknown".into())
}

/// Full ingestion: SI conversion, filtering, smoothing, detection, neighbour
/// attachment and windowing. Vehicles are processed in id order so the
/// output is deterministic.
pub fn ingest_records(records: &[RawRecord], cfg: &IngestConfig, seed: u64) -> Result<IngestOutput> {
    cfg.detect.validate()?;
    let mut report = IngestReport {
        records: records.len(),
        ..Default::default()
    };
    let all: Vec<_> = group_vehicles(records).iter().map(|run| to_si(run)).collect();
    report.trajectories = all.len();
    let filtered = filter_vehicles(&all);
    for (_, r) in &filtered.dropped {
        *report.filtered_out.entry(reason_key(r)).or_default() += 1;
    }
    report.passed_filters = filtered.kept.len();

    let neighbours: Vec<_> = all
        .iter()
        .map(|t| {
            let s = smooth(t);
            report.smoothing_passthrough += s.too_short as usize;
            s.traj
        })
        .collect();

    let mut episodes = Vec::new();
    let mut events = Vec::new();
    for raw in &filtered.kept {
        let s = smooth(raw);
        let outcome = if s.too_short {
            Err(DropReason::TooShort)
        } else if s.traj.max_speed_jump() > MAX_SPEED_JUMP {
            Err(DropReason::ImplausibleSpeed)
        } else {
            match detect_event(&s.traj.y_lat, &cfg.detect)? {
                None => Err(DropReason::NoEventDetected),
                Some(ev) => attach_neighbors(&s.traj, &neighbours, &ev).map(|ep| (ep, ev)),
            }
        };
        match outcome {
            Ok((ep, ev)) => {
                episodes.push(ep);
                events.push(ev);
            }
            Err(r) => *report.episode_drops.entry(reason_key(&r)).or_default() += 1,
        }
    }
    let samples = make_samples(&episodes, seed);
    report.episodes = episodes.len();
    report.samples = samples.len();
    let (lk, lc) = samples.class_counts();
    report.lk_samples = lk;
    report.lc_samples = lc;
    report.train_samples = samples.split(Split::Train).len();
    report.val_samples = samples.split(Split::Val).len();
    debug_assert_eq!(lk + lc, samples.samples.iter().filter(|s| matches!(s.action, Action::Lk | Action::Lc)).count());
    Ok(IngestOutput {
        episodes,
        events,
        samples,
        report,
    })
}
