//! Trained models saved together: style model, intention heads with the
//! policy and reward net, and the IRL reward weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, write_json};
use crate::config::Provenance;
use crate::decision::DecisionModel;
use crate::error::Result;
use crate::irl::RewardWeights;
use crate::style::StyleModel;

pub const BUNDLE_FORMAT: &str = "model_bundle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub style: Option<StyleModel>,
    pub decision: DecisionModel,
    pub omega: Option<RewardWeights>,
}

impl ModelBundle {
    pub fn save(&self, path: &Path, prov: &Provenance) -> Result<()> {
        write_json(path, BUNDLE_FORMAT, prov, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(read_json(path, BUNDLE_FORMAT)?.content)
    }
}
