use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{batch_step, LossConfig, LossTerms};
use super::metrics::EvalReport;
use super::model::{DecisionParams, FeatureScaler, Networks, Prepared};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::ingest::{Action, SampleSet, Split};
use crate::intention::{CoopScores, Heads, IntentionParams};
use crate::numeric::lstm::DEFAULT_HIDDEN;
use crate::numeric::mlp::sigmoid;
use crate::numeric::params::zeros_like;
use crate::numeric::AdamWState;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch: usize,
    pub beta: f64,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub hidden: usize,
    /// Final-epoch learning rate as a fraction of `lr` under cosine annealing (1 = constant).
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-3,
            epochs: 200,
            batch: 128,
            beta: 1.0,
            lambda2: 1e-3,
            lambda_s: 1e-2,
            hidden: DEFAULT_HIDDEN,
            lr_decay: 1.0,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] =
        &["lr", "weight_decay", "epochs", "batch", "beta", "lambda2", "lambda_s", "hidden", "lr_decay"];

    pub fn from_config(cfg: &Config, seed: u64) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            lr: cfg.get("lr", d.lr)?,
            weight_decay: cfg.get("weight_decay", d.weight_decay)?,
            epochs: cfg.get("epochs", d.epochs)?,
            batch: cfg.get("batch", d.batch)?,
            beta: cfg.get("beta", d.beta)?,
            lambda2: cfg.get("lambda2", d.lambda2)?,
            lambda_s: cfg.get("lambda_s", d.lambda_s)?,
            hidden: cfg.get("hidden", d.hidden)?,
            lr_decay: cfg.get("lr_decay", d.lr_decay)?,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m));
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.lambda2 >= 0.0 && self.lambda_s >= 0.0) {
            return bad("lambda2 and lambda_s must be non-negative");
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay non-negative");
        }
        if self.epochs == 0 || self.batch == 0 || self.hidden == 0 {
            return bad("epochs, batch and hidden must be at least 1");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        Ok(())
    }

    /// Settings sized for the rule-generated corpus: a smaller network and a
    /// larger, annealed step so the full ablation trains in minutes.
    pub fn synthetic_preset() -> Self {
        Self {
            lr: 3e-3,
            lr_decay: 0.05,
            epochs: 40,
            batch: 32,
            hidden: 32,
            weight_decay: 5e-2,
            ..Self::default()
        }
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::default();
        c.set("lr", self.lr);
        c.set("weight_decay", self.weight_decay);
        c.set("epochs", self.epochs);
        c.set("batch", self.batch);
        c.set("beta", self.beta);
        c.set("lambda2", self.lambda2);
        c.set("lambda_s", self.lambda_s);
        c.set("hidden", self.hidden);
        c.set("lr_decay", self.lr_decay);
        c
    }

    /// Cosine-annealed learning rate for a 1-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs < 2 {
            return self.lr;
        }
        let t = (epoch - 1) as f64 / (self.epochs - 1) as f64;
        let r = self.lr_decay;
        self.lr * (r + (1.0 - r) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
    }

    fn loss(&self, use_irl: bool) -> LossConfig {
        LossConfig {
            beta: self.beta,
            lambda2: self.lambda2,
            lambda_s: self.lambda_s,
            use_irl,
        }
    }
}

/// Which components take part in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub use_irl: bool,
    pub use_lcs: bool,
    pub use_dcs: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        use_irl: true,
        use_lcs: true,
        use_dcs: true,
    };

    /// The five configurations of the ablation table, weakest first.
    pub const TABLE: [Ablation; 5] = [
        Ablation {
            use_irl: false,
            use_lcs: false,
            use_dcs: false,
        },
        Ablation {
            use_irl: true,
            use_lcs: false,
            use_dcs: false,
        },
        Ablation {
            use_irl: true,
            use_lcs: true,
            use_dcs: false,
        },
        Ablation {
            use_irl: true,
            use_lcs: false,
            use_dcs: true,
        },
        Ablation::FULL,
    ];

    pub fn heads(&self) -> Heads {
        Heads {
            lcs: self.use_lcs,
            dcs: self.use_dcs,
        }
    }

    pub fn label(&self) -> String {
        let mut s = String::from("BC");
        for (on, name) in [(self.use_irl, "IRL"), (self.use_lcs, "LCS"), (self.use_dcs, "DCS")] {
            if on {
                s.push('+');
                s.push_str(name);
            }
        }
        s
    }
}

/// A trained model with everything needed for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub scaler: FeatureScaler,
    pub nets: Networks,
    pub ablation: Ablation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_lc: f64,
    pub action: Action,
    pub scores: CoopScores,
}

impl DecisionModel {
    pub fn predict_prepared(&self, p: &Prepared) -> Result<Prediction> {
        let fw = self.nets.forward(p, self.ablation.heads())?;
        let p_lc = sigmoid(fw.logit);
        Ok(Prediction {
            p_lc,
            action: if p_lc >= 0.5 { Action::Lc } else { Action::Lk },
            scores: fw.scores(),
        })
    }

    pub fn predict(&self, s: &crate::ingest::Sample) -> Result<Prediction> {
        self.predict_prepared(&Prepared::new(s, &self.scaler))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossTerms,
    pub val_loss: f64,
    pub val: EvalReport,
    pub mean_lcs: f64,
    pub mean_dcs: f64,
    pub mean_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    /// Parameters after the final epoch.
    pub model: DecisionModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_f1: f64,
}

impl TrainOutput {
    pub fn final_report(&self) -> &EvalReport {
        &self.history.last().expect("at least one epoch").val
    }
}

fn evaluate_prepared(model: &DecisionModel, data: &[Prepared], loss: &LossConfig) -> Result<(EvalReport, f64, [f64; 3])> {
    if data.is_empty() {
        return Ok((EvalReport::default(), 0.0, [0.5; 3]));
    }
    let heads = model.ablation.heads();
    let mut labels = Vec::with_capacity(data.len());
    let mut preds = Vec::with_capacity(data.len());
    let mut means = [0.0; 3];
    let mut total = 0.0;
    let refs: Vec<&Prepared> = data.iter().collect();
    for chunk in refs.chunks(256) {
        let (terms, fw) = batch_step(&model.nets, chunk, loss, heads, None)?;
        total += terms.total * chunk.len() as f64;
        for (p, f) in chunk.iter().zip(&fw) {
            labels.push(if p.label >= 0.5 { Action::Lc } else { Action::Lk });
            preds.push(if sigmoid(f.logit) >= 0.5 { Action::Lc } else { Action::Lk });
            let s = f.scores();
            means[0] += s.lcs;
            means[1] += s.dcs;
            means[2] += s.alpha;
        }
    }
    let n = data.len() as f64;
    means.iter_mut().for_each(|m| *m /= n);
    Ok((EvalReport::from_pairs(&labels, &preds), total / n, means))
}

/// Evaluates a trained model on every sample of `set` whose split is `which`
/// (or all samples when `which` is `None`).
pub fn evaluate(model: &DecisionModel, set: &SampleSet, which: Option<Split>) -> Result<EvalReport> {
    let data: Vec<Prepared> = set
        .samples
        .iter()
        .filter(|s| which.is_none_or(|w| s.split == w))
        .map(|s| Prepared::new(s, &model.scaler))
        .collect();
    let labels: Vec<Action> = data.iter().map(|p| if p.label >= 0.5 { Action::Lc } else { Action::Lk }).collect();
    let preds: Vec<Action> = data.iter().map(|p| model.predict_prepared(p).map(|r| r.action)).collect::<Result<_>>()?;
    Ok(EvalReport::from_pairs(&labels, &preds))
}

/// Joint end-to-end training of the intention heads, policy and reward net.
pub fn train(set: &SampleSet, cfg: &TrainConfig, ablation: Ablation) -> Result<TrainOutput> {
    train_with(set, cfg, ablation, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    set: &SampleSet,
    cfg: &TrainConfig,
    ablation: Ablation,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let train_s = set.split(Split::Train);
    let val_s = set.split(Split::Val);
    if train_s.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    let scaler = FeatureScaler::fit(train_s.iter().copied())?;
    let train_p: Vec<Prepared> = train_s.iter().map(|s| Prepared::new(s, &scaler)).collect();
    let val_p: Vec<Prepared> = val_s.iter().map(|s| Prepared::new(s, &scaler)).collect();

    let mut init = rng::derive(cfg.seed, 0xdec1_5100);
    let nets = Networks {
        intention: IntentionParams::new(&mut init)?,
        decision: DecisionParams::new(cfg.hidden, &mut init)?,
    };
    let mut model = DecisionModel {
        scaler,
        nets,
        ablation,
    };
    let loss_cfg = cfg.loss(ablation.use_irl);
    let heads = ablation.heads();
    let mut opt = AdamWState::new(cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_p.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let (mut best_epoch, mut best_f1) = (0, f64::NEG_INFINITY);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng::derive(cfg.seed, 0xdec1_0000 + epoch as u64));
        opt.lr = cfg.lr_at(epoch);
        let mut sum = LossTerms::default();
        for (bi, idx) in order.chunks(cfg.batch).enumerate() {
            let batch: Vec<&Prepared> = idx.iter().map(|&i| &train_p[i]).collect();
            let mut grads = zeros_like(&model.nets);
            let at = |e: Error| match e {
                Error::Numeric(m) => Error::Numeric(format!("{m} (epoch {epoch}, batch {bi})")),
                other => other,
            };
            let (terms, _) = batch_step(&model.nets, &batch, &loss_cfg, heads, Some(&mut grads)).map_err(at)?;
            opt.update(&mut model.nets, &grads).map_err(at)?;
            let w = batch.len() as f64 / train_p.len() as f64;
            sum.bc += terms.bc * w;
            sum.irl += terms.irl * w;
            sum.coop += terms.coop * w;
            sum.total += terms.total * w;
        }
        let (val, val_loss, means) = evaluate_prepared(&model, &val_p, &loss_cfg)?;
        if val.f1 > best_f1 {
            best_f1 = val.f1;
            best_epoch = epoch;
        }
        let rec = EpochRecord {
            epoch,
            train: sum,
            val_loss,
            val,
            mean_lcs: means[0],
            mean_dcs: means[1],
            mean_alpha: means[2],
        };
        on_epoch(&rec);
        history.push(rec);
    }
    Ok(TrainOutput {
        model,
        history,
        best_epoch,
        best_f1,
    })
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub ablation: Ablation,
    pub best_f1: f64,
    pub report: EvalReport,
}

pub fn ablate(set: &SampleSet, cfg: &TrainConfig, configs: &[Ablation]) -> Result<Vec<AblationRow>> {
    configs
        .iter()
        .map(|&a| {
            let out = train(set, cfg, a)?;
            Ok(AblationRow {
                ablation: a,
                best_f1: out.best_f1,
                report: *out.final_report(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::test_support::random_set;

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            lr: 3e-3,
            epochs,
            batch: 16,
            hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let set = random_set(80, 1);
        let a = train(&set, &quick(2), Ablation::FULL).unwrap();
        let b = train(&set, &quick(2), Ablation::FULL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_cooperation_heads_means_constant_score() {
        let set = random_set(60, 2);
        let out = train(&set, &quick(2), Ablation::TABLE[0]).unwrap();
        for r in &out.history {
            assert_eq!(r.train.coop, 0.0);
            assert_eq!(r.train.irl, 0.0);
            assert_eq!((r.mean_lcs, r.mean_dcs), (0.5, 0.5));
        }
        for s in &set.samples {
            assert_eq!(out.model.predict(s).unwrap().scores.c_final, 0.5);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.beta = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = TrainConfig::default();
        c.lambda_s = -1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
