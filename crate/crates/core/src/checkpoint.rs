//! Versioned JSON checkpoints of trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::experiment::{ModelSuite, TrainOutput, TrainedModel};
use crate::features::FeaturePipeline;
use crate::nn::Adam;
use crate::persic::FeatureAblationSpec;
use crate::recommender::ModelKind;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_kind: ModelKind,
    /// PersiC only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<FeatureAblationSpec>,
    /// Checksum of the feature pipeline the model was trained against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline_checksum: Option<String>,
    /// Index → id maps of the training dataset.
    pub user_ids: Vec<String>,
    pub post_ids: Vec<String>,
    pub split: SplitSpec,
    pub suite: ModelSuite,
    pub trace: Vec<f64>,
    pub model: TrainedModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    pub fn new(
        out: TrainOutput,
        ablation: FeatureAblationSpec,
        train: &InteractionDataset,
        pipeline: Option<&FeaturePipeline>,
        split: SplitSpec,
        suite: ModelSuite,
    ) -> Self {
        let kind = out.model.kind();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model_kind: kind,
            ablation: (kind == ModelKind::Persic).then_some(ablation),
            pipeline_checksum: out
                .model
                .needs_features()
                .then(|| pipeline.map(FeaturePipeline::checksum))
                .flatten(),
            user_ids: train.user_ids(),
            post_ids: train.post_ids(),
            split,
            suite,
            trace: out.trace,
            model: out.model,
            optimizer: out.optimizer,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::features::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ck: Checkpoint = crate::features::read_json(path)?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "{}: checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                path.display(),
                ck.format_version
            )));
        }
        if ck.model.kind() != ck.model_kind {
            return Err(Error::Config(format!(
                "{}: header says {} but the parameters are {}",
                path.display(),
                ck.model_kind,
                ck.model.kind()
            )));
        }
        Ok(ck)
    }

    /// The dataset must list the same users and posts in the same order.
    pub fn check_dataset(&self, ds: &InteractionDataset) -> Result<()> {
        if ds.user_ids() != self.user_ids || ds.post_ids() != self.post_ids {
            return Err(Error::Dimension(format!(
                "checkpoint covers {} users and {} posts with different ids than the dataset \
                 ({} users, {} posts)",
                self.user_ids.len(),
                self.post_ids.len(),
                ds.n_users(),
                ds.n_posts()
            )));
        }
        Ok(())
    }

    pub fn check_pipeline(&self, pipeline: &FeaturePipeline) -> Result<()> {
        match &self.pipeline_checksum {
            Some(sum) if *sum != pipeline.checksum() => Err(Error::Config(
                "feature pipeline differs from the one the model was trained with".into(),
            )),
            _ => Ok(()),
        }
    }
}
