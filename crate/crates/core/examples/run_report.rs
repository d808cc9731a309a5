//! Runs the MOBIL baseline on the open-gap scene and writes the JSON run
//! report with its CSV plot data into a directory (default: ./report_out).

use std::path::PathBuf;

use lanecoop::config::{Config, Provenance};
use lanecoop::sim::report::write_run_report;
use lanecoop::sim::{open_gap_scene, replay, GapRulePolicy, Mode, ReplayConfig};
use lanecoop::decision::CorpusConfig;
use lanecoop::ingest::Style;

fn main() -> lanecoop::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "report_out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| lanecoop::Error::io(&dir, e))?;
    let mut policy = GapRulePolicy { rule: CorpusConfig::default(), style: Style::Normal };
    let rep = replay(&open_gap_scene(), Mode::IdmMobil, &mut policy, None, &ReplayConfig::default())?;
    let prov = Provenance::new(42, &Config::default());
    for p in write_run_report(&dir, "run_idm_mobil", &prov, &rep)? {
        println!("wrote {}", p.display());
    }
    println!(
        "completion {:?} s, min gap {:?} m, collision {}",
        rep.completion_time_s, rep.min_gap_m, rep.collision
    );
    Ok(())
}
