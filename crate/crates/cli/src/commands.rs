use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use persic_core::checkpoint::Checkpoint;
use persic_core::dataset::{
    dataset_stats, load_concept_names, load_dataset_with_report, split_dataset, InteractionDataset,
};
use persic_core::eval::{
    evaluate_model, run_ablation, run_comparison, trait_concept_correlation, RankingReport,
    RankingRow, ReportKind,
};
use persic_core::experiment::train_model;
use persic_core::features::{CategoryLexicon, FeaturePipeline, FeatureSet};
use persic_core::synth::{self, concept_names, write_bundle, SynthSpec, Vocabulary};
use persic_core::ModelKind;

use crate::config::{write_snapshot, ExperimentConfig};
use crate::{logging, Cli, Command, DataArgs, SynthArgs, TrainingArgs};

pub const PIPELINE_FILE: &str = "pipeline.json";
pub const FEATURES_FILE: &str = "features.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const STATS_FILE: &str = "stats.json";

/// What a command prints: a human table or a JSON document.
struct Outcome {
    text: String,
    json: serde_json::Value,
}

pub fn run(cli: Cli) -> Result<()> {
    let name = cli.command.name();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    apply_flags(&mut cfg, &cli.command);
    cfg.validate()?;

    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    logging::attach(&out)
        .with_context(|| format!("cannot open {}", out.join(logging::RUN_LOG_FILE).display()))?;
    logging::write_line(&format!(
        "start: {}",
        std::env::args().collect::<Vec<_>>().join(" ")
    ));
    write_snapshot(&out, name, &cfg)?;

    let outcome = match &cli.command {
        Command::Synth(_) => synth_cmd(&cfg, &out),
        Command::Features(_) => features_cmd(&cfg, &out),
        Command::Train(a) => train_cmd(&cfg, &out, a.model, a.ablation),
        Command::Eval(a) => eval_cmd(&cfg, &out, &a.checkpoint),
        Command::Ablate(_) => ablate_cmd(&cfg, &out),
        Command::Compare(_) => compare_cmd(&cfg, &out),
        Command::Traits(a) => traits_cmd(&cfg, &out, a.top),
        Command::Stats(_) => stats_cmd(&cfg, &out),
    }?;
    let shown = if cli.json {
        format!("{}\n", outcome.json)
    } else {
        format!("{}outputs in {}\n", outcome.text, out.display())
    };
    emit(&shown)?;
    logging::write_line("done");
    Ok(())
}

/// Writes to stdout; a closed pipe (`persic ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
    {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn apply_flags(cfg: &mut ExperimentConfig, command: &Command) {
    fn data(cfg: &mut ExperimentConfig, d: &DataArgs) {
        if let Some(p) = &d.dataset {
            cfg.dataset = Some(p.clone());
        }
        if let Some(p) = &d.features {
            cfg.features = Some(p.clone());
        }
    }
    fn training(cfg: &mut ExperimentConfig, t: &TrainingArgs) {
        if let Some(e) = t.epochs {
            cfg.epochs = Some(e);
        }
        if let Some(d) = t.latent_dim {
            cfg.suite.persic.latent_dim = d;
        }
        if let Some(f) = t.train_fraction {
            cfg.train_fraction = f;
        }
    }
    match command {
        Command::Synth(a) => synth_flags(cfg.synth.get_or_insert_with(SynthSpec::default), a),
        Command::Features(a) => {
            if let Some(p) = &a.dataset {
                cfg.dataset = Some(p.clone());
            }
            if let Some(p) = &a.lexicon {
                cfg.lexicon = Some(p.clone());
            }
            if let Some(k) = a.k {
                cfg.pipeline.lsa_dim = k;
            }
        }
        Command::Train(a) => {
            data(cfg, &a.data);
            training(cfg, &a.training);
        }
        Command::Eval(a) => {
            data(cfg, &a.data);
            if let Some(c) = &a.cutoffs {
                cfg.eval.cutoffs = c.clone();
            }
        }
        Command::Ablate(a) => {
            data(cfg, &a.data);
            training(cfg, &a.training);
            if let Some(l) = &a.ablations {
                cfg.ablations = l.clone();
            }
        }
        Command::Compare(a) => {
            data(cfg, &a.data);
            training(cfg, &a.training);
            if let Some(m) = &a.models {
                cfg.models = m.clone();
            }
        }
        Command::Traits(a) => {
            if let Some(p) = &a.dataset {
                cfg.dataset = Some(p.clone());
            }
        }
        Command::Stats(a) => {
            if let Some(p) = &a.dataset {
                cfg.dataset = Some(p.clone());
            }
        }
    }
}

fn synth_flags(s: &mut SynthSpec, a: &SynthArgs) {
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { s.$field = v; })*
        };
    }
    set!(
        users => n_users, posts => n_posts, concepts => n_concepts, vocab => vocab_size,
        topics => latent_dim, effect => personality_effect, density => density,
        noise => noise, pers_noise => pers_noise, timeline_posts => timeline_posts,
        liked_posts => liked_posts, words => words_per_post, brands => n_brands
    );
}

/// A dataset plus the side files that travel with it.
struct Input {
    ds: InteractionDataset,
    lexicon: CategoryLexicon,
    concept_names: Option<Vec<String>>,
}

fn synth_spec(cfg: &ExperimentConfig) -> SynthSpec {
    SynthSpec {
        seed: cfg.seed,
        ..cfg.synth.clone().unwrap_or_default()
    }
}

fn load_input(cfg: &ExperimentConfig) -> Result<Input> {
    let explicit_lexicon = match &cfg.lexicon {
        Some(p) => Some(CategoryLexicon::load(p)?),
        None => None,
    };
    if let Some(dir) = &cfg.dataset {
        let (ds, report) = load_dataset_with_report(dir)?;
        if report.dropped_users > 0 {
            log::warn!(
                "{}: dropped {} users with fewer than 2 likes",
                dir.display(),
                report.dropped_users
            );
        }
        let bundled = dir.join(synth::LEXICON_FILE);
        let lexicon = match explicit_lexicon {
            Some(l) => l,
            None if bundled.is_file() => CategoryLexicon::load(&bundled)?,
            None => CategoryLexicon::demo(),
        };
        return Ok(Input {
            ds,
            lexicon,
            concept_names: load_concept_names(dir)?,
        });
    }
    if cfg.synth.is_some() {
        let spec = synth_spec(cfg);
        let (ds, _) = synth::generate(&spec)?;
        log::info!(
            "generated {} users × {} posts in memory",
            ds.n_users(),
            ds.n_posts()
        );
        return Ok(Input {
            ds,
            lexicon: explicit_lexicon
                .unwrap_or_else(|| Vocabulary::new(spec.vocab_size, spec.latent_dim).lexicon()),
            concept_names: Some(concept_names(spec.n_concepts)),
        });
    }
    bail!("no dataset: pass --dataset or set `dataset` or `synth` in the config")
}

/// Loads a `features` run, or fits the pipeline on `ds` when none is given.
fn features_for(cfg: &ExperimentConfig, input: &Input) -> Result<(FeaturePipeline, FeatureSet)> {
    match &cfg.features {
        Some(dir) => {
            let pipeline = FeaturePipeline::load(dir.join(PIPELINE_FILE))?;
            let features = FeatureSet::load(dir.join(FEATURES_FILE))?;
            if features.pipeline_checksum != pipeline.checksum() {
                bail!(
                    "{}: feature bundles were built by a different pipeline",
                    dir.display()
                );
            }
            features
                .check_aligned(&input.ds)
                .with_context(|| format!("features in {}", dir.display()))?;
            Ok((pipeline, features))
        }
        None => {
            log::info!("fitting the feature pipeline on the dataset");
            let pipeline = FeaturePipeline::fit(&input.ds, input.lexicon.clone(), &cfg.pipeline)?;
            let features = pipeline.build(&input.ds)?;
            Ok((pipeline, features))
        }
    }
}

fn needs_features(kind: ModelKind) -> bool {
    matches!(kind, ModelKind::Pcd | ModelKind::Persic)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn report_outcome(report: &RankingReport, dir: &Path, stem: &str) -> Result<Outcome> {
    report.validate()?;
    report.write_all(dir, stem)?;
    Ok(Outcome {
        text: report.to_text(),
        json: serde_json::to_value(report)?,
    })
}

fn synth_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let spec = synth_spec(cfg);
    let (ds, gt) = synth::generate(&spec)?;
    write_bundle(out, &ds, &gt)?;
    let stats = dataset_stats(&ds);
    Ok(Outcome {
        text: stats.to_string(),
        json: json!({ "spec": spec, "stats": stats }),
    })
}

fn features_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let pipeline = FeaturePipeline::fit(&input.ds, input.lexicon, &cfg.pipeline)?;
    let features = pipeline.build(&input.ds)?;
    pipeline.save(out.join(PIPELINE_FILE))?;
    features.save(out.join(FEATURES_FILE))?;
    let summary = json!({
        "users": features.users.len(),
        "posts": features.posts.len(),
        "text_dim": features.text_dim(),
        "concept_dim": features.concept_dim(),
        "lexicon_dim": features.lexicon_dim(),
        "pipeline_checksum": features.pipeline_checksum,
    });
    let text = format!(
        "{} users, {} posts; text {} + concepts {} + lexicon {} dims\npipeline {}\n",
        features.users.len(),
        features.posts.len(),
        features.text_dim(),
        features.concept_dim(),
        features.lexicon_dim(),
        features.pipeline_checksum
    );
    Ok(Outcome {
        text,
        json: summary,
    })
}

fn train_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    kind: ModelKind,
    ablation: persic_core::persic::FeatureAblationSpec,
) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let split = cfg.split();
    let (train, _) = split_dataset(&input.ds, &split)?;
    let features = if needs_features(kind) {
        Some(features_for(cfg, &input)?)
    } else {
        None
    };
    let suite = cfg.model_suite();
    let trained = train_model(
        kind,
        ablation,
        &train,
        features.as_ref().map(|(_, f)| f),
        &suite,
    )?;
    let ck = Checkpoint::new(
        trained,
        ablation,
        &train,
        features.as_ref().map(|(p, _)| p),
        split,
        suite,
    );
    ck.save(out.join(CHECKPOINT_FILE))?;

    let mut trace = String::from("epoch,objective\n");
    for (e, v) in ck.trace.iter().enumerate() {
        writeln!(trace, "{},{v}", e + 1)?;
    }
    write_text(&out.join(TRACE_FILE), &trace)?;

    let last = ck.trace.last().copied();
    Ok(Outcome {
        text: format!(
            "trained {} for {} epochs, final objective {}\n",
            kind.label(),
            ck.trace.len(),
            last.map_or("n/a".into(), |v| format!("{v:.6}"))
        ),
        json: json!({
            "model": kind,
            "ablation": ck.ablation,
            "epochs": ck.trace.len(),
            "trace": ck.trace,
        }),
    })
}

fn eval_cmd(cfg: &ExperimentConfig, out: &Path, checkpoint: &Path) -> Result<Outcome> {
    let ck = Checkpoint::load(checkpoint)?;
    let input = load_input(cfg)?;
    let (train, test) = split_dataset(&input.ds, &ck.split)?;
    ck.check_dataset(&train)
        .with_context(|| format!("checkpoint {}", checkpoint.display()))?;
    let features = if ck.model.needs_features() {
        let (_, f) = features_for(cfg, &input)?;
        if ck.pipeline_checksum.as_deref() != Some(f.pipeline_checksum.as_str()) {
            bail!(
                "checkpoint {} was trained with a different feature pipeline",
                checkpoint.display()
            );
        }
        Some(f)
    } else {
        None
    };
    let scorer = ck.model.scorer(features.as_ref())?;
    let metrics = evaluate_model(scorer.as_ref(), &train, &test, &cfg.eval)?;
    let row = RankingRow {
        label: ck.model_kind.label().to_string(),
        model: ck.model_kind,
        ablation: ck.ablation,
        metrics,
        trace: ck.trace.clone(),
    };
    let report = RankingReport::new(
        ReportKind::Evaluation,
        ck.split.seed,
        cfg.eval.cutoffs.clone(),
        &ck.suite,
        vec![row],
    )?;
    report_outcome(&report, out, "evaluation")
}

fn ablate_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let (train, test) = split_dataset(&input.ds, &cfg.split())?;
    let (_, features) = features_for(cfg, &input)?;
    let report = run_ablation(
        &cfg.ordered_ablations(),
        &train,
        &test,
        &features,
        &cfg.model_suite(),
        cfg.seed,
        &cfg.eval,
        cfg.jobs(),
    )?;
    report_outcome(&report, out, "ablation")
}

fn compare_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let (train, test) = split_dataset(&input.ds, &cfg.split())?;
    let models = cfg.ordered_models();
    let features = if models.iter().any(|&k| needs_features(k)) {
        Some(features_for(cfg, &input)?.1)
    } else {
        None
    };
    let report = run_comparison(
        &models,
        &train,
        &test,
        features.as_ref(),
        &cfg.model_suite(),
        cfg.seed,
        &cfg.eval,
        cfg.jobs(),
    )?;
    report_outcome(&report, out, "comparison")
}

fn traits_cmd(cfg: &ExperimentConfig, out: &Path, top: usize) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let report = trait_concept_correlation(&input.ds, input.concept_names.as_deref(), top)?;
    report.validate()?;
    report.write_all(out, "traits")?;
    Ok(Outcome {
        text: report.to_text(),
        json: serde_json::to_value(&report)?,
    })
}

fn stats_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let input = load_input(cfg)?;
    let stats = dataset_stats(&input.ds);
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    write_text(&out.join(STATS_FILE), &text)?;
    Ok(Outcome {
        text: stats.to_string(),
        json: serde_json::to_value(&stats)?,
    })
}
