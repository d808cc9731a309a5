//! Trains the decision model on the rule-generated corpus and prints the
//! validation metrics per epoch.
//!
//! Arguments are `key=value` overrides of the synthetic training preset,
//! e.g. `epochs=40 samples=3000 weight_decay=1e-2`.

use std::time::Instant;

use lanecoop::config::Config;
use lanecoop::decision::{generate_corpus, train_with, Ablation, CorpusConfig, TrainConfig};

fn main() -> lanecoop::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = TrainConfig::synthetic_preset().to_config();
    for (k, v) in Config::parse(&args.join("\n"))?.entries() {
        cfg.set(k, v);
    }
    let samples = cfg.get("samples", CorpusConfig::default().samples)?;
    let mut corpus = CorpusConfig { samples, ..CorpusConfig::default() };
    if let Some(g) = cfg.raw("uniform_gap") {
        corpus.min_gap = [g.parse().map_err(|_| lanecoop::Error::config("uniform_gap must be a number"))?; 3];
    }
    let train = TrainConfig::from_config(&cfg, 42)?;
    let set = generate_corpus(&corpus, 42)?;
    let t = Instant::now();
    let out = train_with(&set, &train, Ablation::FULL, |r| {
        println!(
            "epoch {:3}  loss {:.4} (bc {:.4} irl {:.4} coop {:.4})  val acc {:.4}  f1 {:.4}  lcs {:.3} dcs {:.3} alpha {:.3}  {:.1}s",
            r.epoch,
            r.train.total,
            r.train.bc,
            r.train.irl,
            r.train.coop,
            r.val.accuracy,
            r.val.f1,
            r.mean_lcs,
            r.mean_dcs,
            r.mean_alpha,
            t.elapsed().as_secs_f64()
        )
    })?;
    println!("best F1 {:.4} at epoch {}", out.best_f1, out.best_epoch);
    Ok(())
}
