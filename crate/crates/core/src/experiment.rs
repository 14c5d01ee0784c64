//! Uniform training entry point over PersiC and the baselines.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    train_bivae, train_fm, train_mf, train_neucf, train_pcd, BivaeConfig, BivaeModel,
    FactorizationConfig, LatentFactorModel, NeuCfConfig, NeuCfModel, PcdConfig, PcdModel,
};
use crate::bpr::TrainConfig;
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::features::{FeatureSet, PostFeatureBundle};
use crate::nn::Adam;
use crate::persic::{
    self, FeatureAblationSpec, PersicConfig, PersicInputs, PersicModel, PersicScorer,
};
use crate::recommender::{ModelKind, Scorer};

/// Hyperparameters of every model a run may train.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSuite {
    pub persic: PersicConfig,
    pub persic_train: TrainConfig,
    pub mf: FactorizationConfig,
    pub fm: FactorizationConfig,
    pub neucf: NeuCfConfig,
    pub bivae: BivaeConfig,
    pub pcd: PcdConfig,
}

impl ModelSuite {
    /// Same settings with every model seeded from `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.persic_train.seed = seed;
        s.mf.train.seed = seed;
        s.fm.train.seed = seed;
        s.neucf.train.seed = seed;
        s.bivae.seed = seed;
        s.pcd.train.seed = seed;
        s
    }

    /// Overrides the epoch count of every model.
    pub fn with_epochs(&self, epochs: usize) -> Self {
        let mut s = self.clone();
        s.persic_train.epochs = epochs;
        s.mf.train.epochs = epochs;
        s.fm.train.epochs = epochs;
        s.neucf.train.epochs = epochs;
        s.bivae.epochs = epochs;
        s.pcd.train.epochs = epochs;
        s
    }
}

/// A fitted model of any kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Mf { model: LatentFactorModel },
    Fm { model: LatentFactorModel },
    Neucf { model: NeuCfModel },
    Bivae { model: BivaeModel },
    Pcd { model: PcdModel },
    Persic { model: PersicModel },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Mf { .. } => ModelKind::Mf,
            TrainedModel::Fm { .. } => ModelKind::Fm,
            TrainedModel::Neucf { .. } => ModelKind::Neucf,
            TrainedModel::Bivae { .. } => ModelKind::Bivae,
            TrainedModel::Pcd { .. } => ModelKind::Pcd,
            TrainedModel::Persic { .. } => ModelKind::Persic,
        }
    }

    pub fn needs_features(&self) -> bool {
        matches!(self, TrainedModel::Pcd { .. } | TrainedModel::Persic { .. })
    }

    /// A scorer over the whole catalogue. PCD and PersiC read `features`.
    pub fn scorer<'a>(&'a self, features: Option<&FeatureSet>) -> Result<Box<dyn Scorer + 'a>> {
        let need = || {
            features.ok_or_else(|| {
                Error::Config(format!(
                    "{} needs feature bundles to score",
                    self.kind().label()
                ))
            })
        };
        Ok(match self {
            TrainedModel::Mf { model } | TrainedModel::Fm { model } => Box::new(model),
            TrainedModel::Neucf { model } => Box::new(model),
            TrainedModel::Bivae { model } => Box::new(model),
            TrainedModel::Pcd { model } => Box::new(model.scorer(&post_matrix(need()?)?)?),
            TrainedModel::Persic { model } => {
                let inputs = PersicInputs::build(need()?, model.ablation)?;
                Box::new(PersicScorer::new(model, &inputs)?)
            }
        })
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn n_users(&self) -> usize {
        (**self).n_users()
    }

    fn n_posts(&self) -> usize {
        (**self).n_posts()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        (**self).score_unchecked(user, post)
    }

    fn score_user(&self, user: usize) -> Result<Vec<f64>> {
        (**self).score_user(user)
    }
}

/// Post feature rows (text then concepts), as fed to the post towers.
pub fn post_matrix(features: &FeatureSet) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = features
        .posts
        .iter()
        .map(PostFeatureBundle::concat)
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension(
            "post feature rows differ in length".into(),
        ));
    }
    Ok(Array2::from_shape_vec((rows.len(), width), rows.concat()).expect("checked shape"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub model: TrainedModel,
    /// Per-epoch objective; the ELBO per cell for BiVAE, the negated loss
    /// for PCD, the BPR objective otherwise.
    pub trace: Vec<f64>,
    /// Final optimizer state. BiVAE keeps two and reports none.
    pub optimizer: Option<Adam>,
}

/// Trains one model. `ablation` only applies to PersiC; PCD and PersiC
/// need `features`.
pub fn train_model(
    kind: ModelKind,
    ablation: FeatureAblationSpec,
    train: &InteractionDataset,
    features: Option<&FeatureSet>,
    suite: &ModelSuite,
) -> Result<TrainOutput> {
    let need =
        || features.ok_or_else(|| Error::Config(format!("{} needs feature bundles", kind.label())));
    if let Some(f) = features {
        f.check_aligned(train)?;
    }
    let (model, trace, optimizer) = match kind {
        ModelKind::Mf => {
            let (m, t, o) = train_mf(train, &suite.mf)?;
            (TrainedModel::Mf { model: m }, t.epoch_objective, Some(o))
        }
        ModelKind::Fm => {
            let (m, t, o) = train_fm(train, &suite.fm)?;
            (TrainedModel::Fm { model: m }, t.epoch_objective, Some(o))
        }
        ModelKind::Neucf => {
            let (m, t, o) = train_neucf(train, &suite.neucf)?;
            (TrainedModel::Neucf { model: m }, t.epoch_objective, Some(o))
        }
        ModelKind::Bivae => {
            let (m, t) = train_bivae(train, &suite.bivae)?;
            (TrainedModel::Bivae { model: m }, t.epoch_elbo, None)
        }
        ModelKind::Pcd => {
            let (m, t, o) = train_pcd(train, &post_matrix(need()?)?, &suite.pcd)?;
            (TrainedModel::Pcd { model: m }, t.epoch_objective, Some(o))
        }
        ModelKind::Persic => {
            let inputs = PersicInputs::build(need()?, ablation)?;
            let model = PersicModel::init(&suite.persic, &inputs, suite.persic_train.seed)?;
            let out = persic::train(model, &inputs, train, &suite.persic_train)?;
            (
                TrainedModel::Persic { model: out.model },
                out.trace.epoch_objective,
                Some(out.optimizer),
            )
        }
    };
    Ok(TrainOutput {
        model,
        trace,
        optimizer,
    })
}
