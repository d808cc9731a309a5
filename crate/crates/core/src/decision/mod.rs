//! Lane-change decision model: policy LSTM and reward net trained jointly
//! with the cooperation heads under reward-weighted behaviour cloning.

pub mod corpus;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod train;

pub use corpus::{generate_corpus, CorpusConfig};
pub use loss::{bc_loss, coop_loss, irl_loss, LossConfig, LossTerms};
pub use metrics::{ClassMetrics, Confusion, EvalReport};
pub use model::{DecisionParams, FeatureScaler, Networks, Prepared};
pub use train::{
    ablate, evaluate, train, train_with, Ablation, AblationRow, DecisionModel, EpochRecord, Prediction,
    TrainConfig, TrainOutput,
};

#[cfg(test)]
pub(crate) mod test_support {
    use rand::Rng;

    use crate::ingest::{stratified_split, Action, Sample, SampleSet, Split, Style, FEATURE_DIM, SEQ_LEN};
    use crate::rng;

    pub fn random_sample(r: &mut impl Rng, action: Action) -> Sample {
        Sample {
            episode_id: r.random_range(0..1000),
            features: (0..SEQ_LEN * FEATURE_DIM).map(|_| r.random_range(-1.5f32..1.5)).collect(),
            aux: [0.0; 6],
            action,
            style: Style::from_index(r.random_range(0..3)),
            split: Split::Train,
        }
    }

    pub fn random_set(n: usize, seed: u64) -> SampleSet {
        let mut r = rng::seeded(seed);
        let mut samples: Vec<Sample> = (0..n)
            .map(|_| {
                let a = Action::from_bit(r.random_range(0..2)).unwrap();
                random_sample(&mut r, a)
            })
            .collect();
        let actions: Vec<Action> = samples.iter().map(|s| s.action).collect();
        for (s, sp) in samples.iter_mut().zip(stratified_split(&actions, seed)) {
            s.split = sp;
        }
        SampleSet { samples }
    }
}
