use persic_core::checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
use persic_core::dataset::{split_dataset, InteractionDataset, SplitSpec};
use persic_core::experiment::{train_model, ModelSuite};
use persic_core::features::{FeaturePipeline, FeatureSet, PipelineConfig};
use persic_core::persic::{FeatureAblationSpec, PersicConfig};
use persic_core::synth::{generate, SynthSpec, Vocabulary};
use persic_core::ModelKind;

struct Fixture {
    train: InteractionDataset,
    pipeline: FeaturePipeline,
    features: FeatureSet,
    suite: ModelSuite,
    split: SplitSpec,
}

fn fixture() -> Fixture {
    let spec = SynthSpec {
        n_users: 60,
        n_posts: 40,
        density: 0.1,
        seed: 21,
        ..SynthSpec::default()
    };
    let (ds, _) = generate(&spec).unwrap();
    let split = SplitSpec {
        train_fraction: 0.8,
        seed: 21,
    };
    let (train, _) = split_dataset(&ds, &split).unwrap();
    let lexicon = Vocabulary::new(spec.vocab_size, spec.latent_dim).lexicon();
    let config = PipelineConfig {
        lsa_dim: 12,
        ..PipelineConfig::default()
    };
    let pipeline = FeaturePipeline::fit(&train, lexicon, &config).unwrap();
    let features = pipeline.build(&train).unwrap();
    let mut suite = ModelSuite::default().with_epochs(2).with_seed(21);
    suite.persic = PersicConfig {
        latent_dim: 24,
        ..PersicConfig::default()
    };
    Fixture {
        train,
        pipeline,
        features,
        suite,
        split,
    }
}

fn checkpoint(f: &Fixture, kind: ModelKind) -> Checkpoint {
    let ablation = FeatureAblationSpec::PostsLikesPers;
    let out = train_model(kind, ablation, &f.train, Some(&f.features), &f.suite).unwrap();
    Checkpoint::new(
        out,
        ablation,
        &f.train,
        Some(&f.pipeline),
        f.split.clone(),
        f.suite.clone(),
    )
}

#[test]
fn every_model_round_trips_losslessly() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let ck = checkpoint(&f, kind);
        let path = dir.path().join(format!("{}.json", kind.slug()));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck, "{kind}");
        assert_eq!(back.model_kind, kind);
        assert_eq!(
            back.pipeline_checksum.is_some(),
            back.model.needs_features()
        );
        back.check_dataset(&f.train).unwrap();
        back.check_pipeline(&f.pipeline).unwrap();

        let a = ck.model.scorer(Some(&f.features)).unwrap();
        let b = back.model.scorer(Some(&f.features)).unwrap();
        for u in 0..f.train.n_users() {
            assert_eq!(a.score_user(u).unwrap(), b.score_user(u).unwrap(), "{kind}");
        }
    }
}

#[test]
fn training_is_reproducible() {
    let f = fixture();
    for kind in [ModelKind::Persic, ModelKind::Bivae, ModelKind::Pcd] {
        assert_eq!(checkpoint(&f, kind), checkpoint(&f, kind), "{kind}");
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mf.json");

    let mut ck = checkpoint(&f, ModelKind::Mf);
    ck.format_version = CHECKPOINT_FORMAT_VERSION + 1;
    ck.save(&path).unwrap();
    assert!(Checkpoint::load(&path).is_err());

    let mut ck = checkpoint(&f, ModelKind::Mf);
    ck.model_kind = ModelKind::Fm;
    ck.save(&path).unwrap();
    assert!(Checkpoint::load(&path).is_err());

    std::fs::write(&path, "{ not json").unwrap();
    let err = Checkpoint::load(&path).unwrap_err().to_string();
    assert!(err.contains("mf.json"), "{err}");

    let missing = dir.path().join("nope.json");
    let err = Checkpoint::load(&missing).unwrap_err().to_string();
    assert!(err.contains("nope.json"), "{err}");
}

#[test]
fn mismatched_dataset_or_pipeline_is_caught() {
    let f = fixture();
    let ck = checkpoint(&f, ModelKind::Persic);
    let (other, _) = generate(&SynthSpec {
        n_users: 61,
        n_posts: 40,
        density: 0.1,
        ..SynthSpec::default()
    })
    .unwrap();
    assert!(ck.check_dataset(&other).is_err());

    let refit = FeaturePipeline::fit(
        &f.train,
        persic_core::features::CategoryLexicon::demo(),
        &f.pipeline.config,
    )
    .unwrap();
    assert!(ck.check_pipeline(&refit).is_err());
}
