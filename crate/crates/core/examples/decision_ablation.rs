//! Trains every ablation variant on the rule-generated corpus and prints
//! the comparison table.

use std::time::Instant;

use lanecoop::decision::{ablate, generate_corpus, Ablation, CorpusConfig, TrainConfig};

fn main() -> lanecoop::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(CorpusConfig::default().samples);
    let set = generate_corpus(&CorpusConfig { samples, ..CorpusConfig::default() }, 42)?;
    let cfg = TrainConfig::synthetic_preset();
    let t = Instant::now();
    let rows = ablate(&set, &cfg, &Ablation::TABLE)?;
    println!("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}", "variant", "acc", "prec", "rec", "f1", "best f1");
    for r in &rows {
        println!(
            "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.ablation.label(),
            r.report.accuracy,
            r.report.precision,
            r.report.recall,
            r.report.f1,
            r.best_f1
        );
    }
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
