//! Report files: the JSON run report and CSV plot data for training curves,
//! confusion matrices, cooperation-score traces and trajectory snapshots.

use std::path::{Path, PathBuf};

use crate::artifact::{write_csv, write_json};
use crate::config::Provenance;
use crate::decision::{Confusion, EpochRecord};
use crate::error::Result;

use super::replay::RunReport;

/// Envelope tag of run reports; the shipped schema describes this format.
pub const RUN_REPORT_FORMAT: &str = "run_report";

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

/// `loss_curves.csv`, `metric_curves.csv` and `coop_traces.csv` from a training history.
pub fn write_training_curves(dir: &Path, prov: &Provenance, history: &[EpochRecord]) -> Result<Vec<PathBuf>> {
    let loss: Vec<Vec<String>> = history
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                f(r.train.total),
                f(r.train.bc),
                f(r.train.irl),
                f(r.train.coop),
                f(r.val_loss),
            ]
        })
        .collect();
    let metrics: Vec<Vec<String>> = history
        .iter()
        .map(|r| {
            let v = &r.val;
            vec![
                r.epoch.to_string(),
                f(v.accuracy),
                f(v.precision),
                f(v.recall),
                f(v.f1),
                f(v.lk.f1),
                f(v.lc.f1),
            ]
        })
        .collect();
    let coop: Vec<Vec<String>> = history
        .iter()
        .map(|r| vec![r.epoch.to_string(), f(r.mean_lcs), f(r.mean_dcs), f(r.mean_alpha)])
        .collect();
    let paths = [dir.join("loss_curves.csv"), dir.join("metric_curves.csv"), dir.join("coop_traces.csv")];
    write_csv(&paths[0], prov, &["epoch", "train_total", "train_bc", "train_irl", "train_coop", "val_loss"], &loss)?;
    write_csv(
        &paths[1],
        prov,
        &["epoch", "accuracy", "precision", "recall", "f1", "lk_f1", "lc_f1"],
        &metrics,
    )?;
    write_csv(&paths[2], prov, &["epoch", "lcs", "dcs", "alpha"], &coop)?;
    Ok(paths.to_vec())
}

/// Rows are true classes, columns predicted classes; `support` is the row sum.
pub fn confusion_rows(c: &Confusion) -> Vec<Vec<String>> {
    vec![
        vec!["LK".into(), c.tn.to_string(), c.fp.to_string(), (c.tn + c.fp).to_string()],
        vec!["LC".into(), c.fn_.to_string(), c.tp.to_string(), (c.fn_ + c.tp).to_string()],
    ]
}

pub fn write_confusion(path: &Path, prov: &Provenance, c: &Confusion) -> Result<()> {
    write_csv(path, prov, &["actual", "pred_lk", "pred_lc", "support"], &confusion_rows(c))
}

/// `<stem>.json` plus `<stem>_ego.csv`, `<stem>_snapshots.csv` and `<stem>_decisions.csv`.
pub fn write_run_report(dir: &Path, stem: &str, prov: &Provenance, rep: &RunReport) -> Result<Vec<PathBuf>> {
    let json = dir.join(format!("{stem}.json"));
    write_json(&json, RUN_REPORT_FORMAT, prov, rep)?;

    let ego = dir.join(format!("{stem}_ego.csv"));
    let rows: Vec<Vec<String>> = rep
        .ego
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                f(s.t),
                f(s.x),
                f(s.y),
                f(s.psi),
                f(s.v),
                f(s.accel),
                f(s.steer),
            ]
        })
        .collect();
    write_csv(&ego, prov, &["step", "t", "x", "y", "psi", "v", "accel", "steer"], &rows)?;

    let snaps = dir.join(format!("{stem}_snapshots.csv"));
    let mut rows = Vec::new();
    for s in &rep.snapshots {
        rows.push(vec![s.step.to_string(), f(s.t), "ego".into(), String::new(), f(s.ego[0]), f(s.ego[1])]);
        for a in &s.actors {
            rows.push(vec![s.step.to_string(), f(s.t), "actor".into(), a.id.to_string(), f(a.x), f(a.y)]);
        }
    }
    write_csv(&snaps, prov, &["step", "t", "kind", "id", "x", "y"], &rows)?;

    let dec = dir.join(format!("{stem}_decisions.csv"));
    let rows: Vec<Vec<String>> = rep
        .decisions
        .iter()
        .map(|d| vec![d.step.to_string(), f(d.t), d.action.to_string(), opt(d.p_lc)])
        .collect();
    write_csv(&dec, prov, &["step", "t", "action", "p_lc"], &rows)?;
    Ok(vec![json, ego, snaps, dec])
}
