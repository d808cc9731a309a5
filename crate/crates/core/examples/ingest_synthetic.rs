//! Generates NGSIM-format synthetic traffic, runs the full ingestion pipeline
//! and prints the filter/episode/sample counts and the duration fit.

use lanecoop::detect::duration_stats;
use lanecoop::ingest::synthetic::{generate_scene, SceneConfig};
use lanecoop::ingest::{ingest_records, IngestConfig};

fn main() -> lanecoop::Result<()> {
    let scene = generate_scene(&SceneConfig::default(), 42);
    println!("{} records, {} planned lane changes", scene.records.len(), scene.changes.len());
    let out = ingest_records(&scene.records, &IngestConfig::default(), 42)?;
    let r = &out.report;
    println!("trajectories {}  passed filters {}", r.trajectories, r.passed_filters);
    for (reason, n) in &r.filtered_out {
        println!("  filtered {reason:24} {n}");
    }
    for (reason, n) in &r.episode_drops {
        println!("  episode dropped {reason:17} {n}");
    }
    println!(
        "episodes {}  samples {} (LK {}, LC {}; train {}, val {})",
        r.episodes, r.samples, r.lk_samples, r.lc_samples, r.train_samples, r.val_samples
    );
    let stats = duration_stats(&out.events)?;
    println!(
        "lane-change duration: log-normal mu {:.3} sigma {:.3}, median {:.2} s",
        stats.fit.mu,
        stats.fit.sigma,
        stats.fit.median()
    );
    Ok(())
}
