//! Experiment configuration: an optional JSON file overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use persic_core::dataset::SplitSpec;
use persic_core::eval::EvalOptions;
use persic_core::experiment::ModelSuite;
use persic_core::features::PipelineConfig;
use persic_core::persic::FeatureAblationSpec;
use persic_core::synth::SynthSpec;
use persic_core::ModelKind;

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory of a dataset bundle.
    pub dataset: Option<PathBuf>,
    /// Generate the dataset in memory when no `dataset` is given. Its seed
    /// is replaced by the top-level one.
    pub synth: Option<SynthSpec>,
    /// Output directory of a `features` run.
    pub features: Option<PathBuf>,
    /// Category lexicon; defaults to the bundle's lexicon.json, then the
    /// built-in demo lexicon.
    pub lexicon: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub models: Vec<ModelKind>,
    pub ablations: Vec<FeatureAblationSpec>,
    pub suite: ModelSuite,
    /// Overrides the epoch count of every model.
    pub epochs: Option<usize>,
    pub eval: EvalOptions,
    pub train_fraction: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Models trained at once by `compare` and `ablate`; 0 = one per core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            synth: None,
            features: None,
            lexicon: None,
            pipeline: PipelineConfig::default(),
            models: ModelKind::ALL.to_vec(),
            ablations: FeatureAblationSpec::ALL.to_vec(),
            suite: ModelSuite::default(),
            epochs: None,
            eval: EvalOptions::default(),
            train_fraction: SplitSpec::default().train_fraction,
            out: None,
            seed: 0,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            bail!("the model list is empty");
        }
        if self.ablations.is_empty() {
            bail!("the ablation list is empty");
        }
        self.split().validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    /// Model settings with the epoch override applied and every model
    /// seeded from the top-level seed.
    pub fn model_suite(&self) -> ModelSuite {
        let suite = match self.epochs {
            Some(e) => self.suite.with_epochs(e),
            None => self.suite.clone(),
        };
        suite.with_seed(self.seed)
    }

    pub fn jobs(&self) -> usize {
        match self.jobs {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }

    /// Models in report order, without repeats.
    pub fn ordered_models(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|k| self.models.contains(k))
            .collect()
    }

    pub fn ordered_ablations(&self) -> Vec<FeatureAblationSpec> {
        FeatureAblationSpec::ALL
            .into_iter()
            .filter(|a| self.ablations.contains(a))
            .collect()
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
}

/// Writes the fully resolved settings next to a command's outputs.
pub fn write_snapshot(dir: &Path, command: &str, config: &ExperimentConfig) -> Result<()> {
    let path = dir.join(RESOLVED_CONFIG_FILE);
    let mut text = serde_json::to_string_pretty(&Snapshot { command, config })?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}
