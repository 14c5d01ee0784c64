use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;
use crate::dataset::{Interaction, InteractionDataset, Mbti, PostRecord, UserRecord, PERS_DIM};
use crate::experiment::ModelSuite;
use crate::recommender::{ModelKind, Scorer};
use crate::rng::stream_rng;
use crate::testing::dataset_from_pairs;

struct MatrixScorer(Array2<f64>);

impl Scorer for MatrixScorer {
    fn n_users(&self) -> usize {
        self.0.nrows()
    }

    fn n_posts(&self) -> usize {
        self.0.ncols()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        self.0[[user, post]]
    }
}

/// `n_users` users over `n_posts` posts: two train positives each and half
/// of the remaining posts held out as test positives.
fn balanced(seed: u64, n_users: usize, n_posts: usize) -> (InteractionDataset, InteractionDataset) {
    let mut rng = stream_rng(seed, "balanced");
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for u in 0..n_users {
        let mut posts: Vec<usize> = (0..n_posts).collect();
        posts.shuffle(&mut rng);
        train.extend(posts[..2].iter().map(|&p| (u, p)));
        let held = (n_posts - 2) / 2;
        test.extend(posts[2..2 + held].iter().map(|&p| (u, p)));
    }
    (
        dataset_from_pairs(n_users, n_posts, &train),
        dataset_from_pairs(n_users, n_posts, &test),
    )
}

fn random_scores(seed: u64, n_users: usize, n_posts: usize) -> MatrixScorer {
    let mut rng = stream_rng(seed, "scores");
    MatrixScorer(Array2::from_shape_fn((n_users, n_posts), |_| rng.gen()))
}

fn oracle_scores(test: &InteractionDataset) -> MatrixScorer {
    let mut m = Array2::zeros((test.n_users(), test.n_posts()));
    for it in test.interactions() {
        m[[it.user, it.post]] = 1.0;
    }
    MatrixScorer(m)
}

#[test]
fn random_scorer_sits_at_chance() {
    let (train, test) = balanced(1, 1000, 40);
    let m = evaluate_model(
        &random_scores(1, 1000, 40),
        &train,
        &test,
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(m.evaluable_users, 1000);
    assert!((m.auc - 0.5).abs() < 0.02, "{}", m.auc);
}

#[test]
fn oracle_scorer_is_perfect() {
    let (train, test) = balanced(2, 50, 30);
    let opts = EvalOptions {
        cutoffs: vec![1, 10, 50],
        pooled_auc: true,
    };
    let m = evaluate_model(&oracle_scores(&test), &train, &test, &opts).unwrap();
    assert_eq!(m.auc, 1.0);
    assert_eq!(m.pooled_auc, Some(1.0));
    for v in &m.ndcg {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn train_positives_are_not_candidates() {
    // the oracle marks train positives highest; they must not count
    let (train, test) = balanced(3, 20, 12);
    let mut s = oracle_scores(&test);
    for it in train.interactions() {
        s.0[[it.user, it.post]] = 10.0;
    }
    let m = evaluate_model(&s, &train, &test, &EvalOptions::default()).unwrap();
    assert_eq!(m.auc, 1.0);
}

#[test]
fn overall_metrics_are_per_user_means() {
    let (train, test) = balanced(4, 30, 20);
    let m = evaluate_model(
        &random_scores(4, 30, 20),
        &train,
        &test,
        &EvalOptions::default(),
    )
    .unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((m.auc - mean(&m.per_user.auc)).abs() < 1e-12);
    for c in 0..2 {
        assert!((m.ndcg[c] - mean(&m.per_user.ndcg[c])).abs() < 1e-12);
        assert!((m.f1[c] - mean(&m.per_user.f1[c])).abs() < 1e-12);
    }
}

#[test]
fn relabelling_posts_changes_nothing() {
    let (n_users, n_posts) = (25, 18);
    let (train, test) = balanced(5, n_users, n_posts);
    let scores = random_scores(5, n_users, n_posts);
    let mut perm: Vec<usize> = (0..n_posts).collect();
    perm.shuffle(&mut stream_rng(5, "perm"));
    let relabel = |ds: &InteractionDataset| {
        let pairs: Vec<(usize, usize)> = ds
            .interactions()
            .iter()
            .map(|it| (it.user, perm[it.post]))
            .collect();
        dataset_from_pairs(n_users, n_posts, &pairs)
    };
    let mut moved = Array2::zeros((n_users, n_posts));
    for u in 0..n_users {
        for p in 0..n_posts {
            moved[[u, perm[p]]] = scores.0[[u, p]];
        }
    }
    let opts = EvalOptions::default();
    let a = evaluate_model(&scores, &train, &test, &opts).unwrap();
    let b = evaluate_model(
        &MatrixScorer(moved),
        &relabel(&train),
        &relabel(&test),
        &opts,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn users_without_held_out_positives_are_skipped() {
    let train = dataset_from_pairs(3, 5, &[(0, 0), (1, 0), (2, 0)]);
    let test = dataset_from_pairs(3, 5, &[(0, 1), (2, 3)]);
    let m = evaluate_model(
        &random_scores(6, 3, 5),
        &train,
        &test,
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(m.per_user.users, vec![0, 2]);
}

#[test]
fn bad_inputs_are_rejected() {
    let (train, test) = balanced(7, 4, 6);
    let opts = EvalOptions::default();
    assert!(evaluate_model(&random_scores(7, 4, 7), &train, &test, &opts).is_err());
    let empty = dataset_from_pairs(4, 6, &[]);
    assert!(evaluate_model(&random_scores(7, 4, 6), &train, &empty, &opts).is_err());
    let zero = EvalOptions {
        cutoffs: vec![0],
        pooled_auc: false,
    };
    assert!(evaluate_model(&random_scores(7, 4, 6), &train, &test, &zero).is_err());
}

#[test]
fn parallel_map_keeps_order() {
    let out = super::harness::parallel_map(100, 4, |i| i * i);
    assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    assert!(super::harness::parallel_map(0, 4, |i| i).is_empty());
}

fn small_report(jobs: usize) -> RankingReport {
    let (train, test) = balanced(8, 40, 25);
    let suite = ModelSuite::default().with_epochs(2);
    run_comparison(
        &[ModelKind::Mf, ModelKind::Fm, ModelKind::Neucf],
        &train,
        &test,
        None,
        &suite,
        8,
        &EvalOptions::default(),
        jobs,
    )
    .unwrap()
}

#[test]
fn comparison_is_independent_of_job_count() {
    assert_eq!(small_report(1), small_report(3));
}

#[test]
fn report_renderings_agree() {
    let r = small_report(2);
    r.validate().unwrap();
    assert_eq!(
        r.headers(),
        ["Model", "AUC", "nDCG@10", "nDCG@50", "F1@10", "F1@50"]
    );
    let text = r.to_text();
    assert_eq!(text.lines().count(), 2 + 3);
    assert!(text.lines().next().unwrap().starts_with("Model"));

    let csv = r.to_csv().unwrap();
    let mut rd = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (rec, row) in rows.iter().zip(&r.rows) {
        assert_eq!(&rec[0], row.label);
        assert_eq!(rec[1].parse::<f64>().unwrap(), row.metrics.auc);
    }

    let back: RankingReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(
        back.config_fingerprint,
        super::report::fingerprint(&back.config)
    );

    let dir = tempfile::tempdir().unwrap();
    r.write_all(dir.path(), "compare").unwrap();
    for ext in ["txt", "csv", "json"] {
        assert!(dir.path().join(format!("compare.{ext}")).is_file());
    }
}

#[test]
fn validate_catches_broken_reports() {
    let mut r = small_report(1);
    r.rows[0].metrics.auc = 1.5;
    assert!(r.validate().is_err());
    let mut r = small_report(1);
    r.rows[1].metrics.per_user.auc.pop();
    assert!(r.validate().is_err());
}

#[test]
fn pearson_known_values() {
    let close = |r: Option<f64>, want: f64| (r.unwrap() - want).abs() < 1e-12;
    assert!(close(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0));
    assert!(close(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0));
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((r - 0.8).abs() < 1e-12);
    assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    assert_eq!(pearson(&[1.0], &[2.0]), None);
}

fn trait_user(id: usize, mbti: Mbti) -> UserRecord {
    UserRecord {
        user_id: format!("u{id}"),
        timeline_texts: vec!["hello".into()],
        timeline_concepts: vec![vec![0.0; 3]],
        liked_texts: vec![],
        liked_concepts: vec![],
        pers: vec![0.0; PERS_DIM],
        mbti: Some(mbti),
    }
}

/// Post p is liked by ten labelled users, `p % 11` of them extraverts.
/// Concept 0 rises with that share, concept 1 is constant, concept 2 is
/// noise.
fn planted_traits() -> InteractionDataset {
    let mut rng = stream_rng(9, "traits");
    let mut mbti = |e: bool| {
        let mut f = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        f[0] = e;
        Mbti(f)
    };
    let users: Vec<UserRecord> = (0..20).map(|i| trait_user(i, mbti(i < 10))).collect();
    let mut rng = stream_rng(9, "posts");
    let mut posts = Vec::new();
    let mut interactions = Vec::new();
    for p in 0..40 {
        let e = p % 11;
        let share = e as f64 / 10.0;
        posts.push(PostRecord {
            post_id: format!("p{p}"),
            brand_id: "b".into(),
            text: "post".into(),
            concepts: vec![0.1 + 0.8 * share, 0.5, rng.gen()],
        });
        let likers = (0..e).chain(10..20 - e);
        interactions.extend(likers.map(|user| Interaction { user, post: p }));
    }
    InteractionDataset::new(users, posts, interactions).unwrap()
}

#[test]
fn planted_concept_tops_its_pole() {
    let ds = planted_traits();
    let names: Vec<String> = ["planted", "flat", "noise"].map(String::from).to_vec();
    let r = trait_concept_correlation(&ds, Some(&names), 3).unwrap();
    r.validate().unwrap();
    assert_eq!(r.posts_used, 40);
    assert_eq!(r.skipped_concepts, vec![1]);
    let e = r.pole('E').unwrap();
    assert_eq!(e.top[0].name, "planted");
    assert!((e.top[0].r - 1.0).abs() < 1e-9);
    let i = r.pole('I').unwrap();
    let planted = i.top.iter().find(|c| c.concept == 0).unwrap();
    assert!((planted.r + 1.0).abs() < 1e-9);
    assert!(i.top.iter().all(|c| c.concept != 1));
}

#[test]
fn trait_report_renders_and_truncates() {
    let ds = planted_traits();
    let r = trait_concept_correlation(&ds, None, 1).unwrap();
    assert!(r.poles.iter().all(|p| p.top.len() <= 1));
    assert!(r.to_text().contains("concept_0"));
    let csv = r.to_csv().unwrap();
    assert!(csv.starts_with("pole,rank,concept,name,r"));
    let back: TraitConceptReport =
        serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    let names = vec!["only one".to_string()];
    assert!(trait_concept_correlation(&ds, Some(&names), 3).is_err());
}
