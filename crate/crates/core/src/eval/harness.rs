//! Full-catalogue evaluation and the comparison and ablation runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, f1_at_k, ndcg_at_k};
use super::report::{ModelMetrics, PerUserMetrics, RankingReport, RankingRow, ReportKind};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::experiment::{train_model, ModelSuite};
use crate::features::FeatureSet;
use crate::persic::FeatureAblationSpec;
use crate::recommender::{rank_posts, ModelKind, Scorer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub cutoffs: Vec<usize>,
    /// Also report one AUC over all users' candidate pairs pooled together.
    pub pooled_auc: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cutoffs: vec![10, 50],
            pooled_auc: false,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config(format!(
                "cutoffs must be non-empty and ≥ 1, got {:?}",
                self.cutoffs
            )));
        }
        Ok(())
    }
}

struct UserResult {
    user: usize,
    auc: f64,
    ndcg: Vec<f64>,
    f1: Vec<f64>,
    scored: Vec<(f64, bool)>,
}

fn evaluate_user(
    scorer: &dyn Scorer,
    user: usize,
    train_pos: &[usize],
    test_pos: &[usize],
    opts: &EvalOptions,
) -> Result<Option<UserResult>> {
    let n_posts = scorer.n_posts();
    let mut in_train = vec![false; n_posts];
    train_pos.iter().for_each(|&p| in_train[p] = true);
    let candidates: Vec<usize> = (0..n_posts).filter(|&p| !in_train[p]).collect();
    let mut relevant = vec![false; n_posts];
    test_pos.iter().for_each(|&p| relevant[p] = true);
    let total = candidates.iter().filter(|&&p| relevant[p]).count();
    if total == 0 || total == candidates.len() {
        return Ok(None);
    }
    let scores = scorer.score_user(user)?;
    let scored: Vec<(f64, bool)> = candidates
        .iter()
        .map(|&p| (scores[p], relevant[p]))
        .collect();
    let ranked: Vec<bool> = rank_posts(&scores, &candidates)
        .into_iter()
        .map(|p| relevant[p])
        .collect();
    let ndcg = opts
        .cutoffs
        .iter()
        .map(|&k| Ok(ndcg_at_k(&ranked, k)?.expect("user has a relevant candidate")))
        .collect::<Result<_>>()?;
    let f1 = opts
        .cutoffs
        .iter()
        .map(|&k| f1_at_k(&ranked, k, total))
        .collect::<Result<_>>()?;
    Ok(Some(UserResult {
        user,
        auc: auc(&scored).expect("both classes present"),
        ndcg,
        f1,
        scored: if opts.pooled_auc { scored } else { Vec::new() },
    }))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn worker_count(jobs: usize) -> usize {
    if jobs > 0 {
        return jobs;
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `f` over `0..n` on up to `jobs` threads; results come back in index
/// order regardless of scheduling.
pub(crate) fn parallel_map<T: Send>(
    n: usize,
    jobs: usize,
    f: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let workers = worker_count(jobs).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every index ran"))
        .collect()
}

/// Ranks every post a user did not like in `train` and scores the ranking
/// against the user's `test` positives. Users without a test positive among
/// their candidates (or without a negative) are left out of the averages.
pub fn evaluate_model(
    scorer: &dyn Scorer,
    train: &InteractionDataset,
    test: &InteractionDataset,
    opts: &EvalOptions,
) -> Result<ModelMetrics> {
    opts.validate()?;
    if scorer.n_users() != train.n_users() || scorer.n_posts() != train.n_posts() {
        return Err(Error::Dimension(format!(
            "model covers {}×{} users×posts, dataset has {}×{}",
            scorer.n_users(),
            scorer.n_posts(),
            train.n_users(),
            train.n_posts()
        )));
    }
    if test.n_users() != train.n_users() || test.n_posts() != train.n_posts() {
        return Err(Error::Dimension(
            "train and test cover different users or posts".into(),
        ));
    }
    let train_pos = train.user_positives();
    let test_pos = test.user_positives();
    let results = parallel_map(train.n_users(), 0, |u| {
        evaluate_user(scorer, u, &train_pos[u], &test_pos[u], opts)
    });
    let results: Vec<UserResult> = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if results.is_empty() {
        return Err(Error::InvalidDataset(
            "no user has a held-out positive to evaluate".into(),
        ));
    }
    let per_user = PerUserMetrics {
        users: results.iter().map(|r| r.user).collect(),
        auc: results.iter().map(|r| r.auc).collect(),
        ndcg: (0..opts.cutoffs.len())
            .map(|c| results.iter().map(|r| r.ndcg[c]).collect())
            .collect(),
        f1: (0..opts.cutoffs.len())
            .map(|c| results.iter().map(|r| r.f1[c]).collect())
            .collect(),
    };
    let pooled_auc = if opts.pooled_auc {
        let all: Vec<(f64, bool)> = results
            .iter()
            .flat_map(|r| r.scored.iter().copied())
            .collect();
        auc(&all)
    } else {
        None
    };
    Ok(ModelMetrics {
        evaluable_users: per_user.users.len(),
        auc: mean(&per_user.auc),
        ndcg: per_user.ndcg.iter().map(|v| mean(v)).collect(),
        f1: per_user.f1.iter().map(|v| mean(v)).collect(),
        pooled_auc,
        per_user,
    })
}

/// One entry of a comparison or ablation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunEntry {
    pub kind: ModelKind,
    pub ablation: FeatureAblationSpec,
}

/// Trains and evaluates each entry under the same seed, up to `jobs` at a
/// time (0 = one per core).
pub fn run_entries(
    title: ReportKind,
    entries: &[RunEntry],
    train: &InteractionDataset,
    test: &InteractionDataset,
    features: Option<&FeatureSet>,
    suite: &ModelSuite,
    seed: u64,
    opts: &EvalOptions,
    jobs: usize,
) -> Result<RankingReport> {
    if entries.is_empty() {
        return Err(Error::Config(
            "nothing to run: the model list is empty".into(),
        ));
    }
    opts.validate()?;
    let suite = suite.with_seed(seed);
    let rows = parallel_map(entries.len(), jobs.max(1), |i| -> Result<RankingRow> {
        let e = entries[i];
        let label = match title {
            ReportKind::Ablation => e.ablation.label().to_string(),
            _ => e.kind.label().to_string(),
        };
        log::info!("training {label} (seed {seed})");
        let out = train_model(e.kind, e.ablation, train, features, &suite)?;
        let scorer = out.model.scorer(features)?;
        let metrics = evaluate_model(scorer.as_ref(), train, test, opts)?;
        log::info!("{label}: AUC {:.4}", metrics.auc);
        Ok(RankingRow {
            label,
            model: e.kind,
            ablation: (e.kind == ModelKind::Persic).then_some(e.ablation),
            metrics,
            trace: out.trace,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    RankingReport::new(title, seed, opts.cutoffs.clone(), &suite, rows)
}

/// Trains every model in `kinds` (PersiC with its full feature set) and
/// evaluates each on `test`.
pub fn run_comparison(
    kinds: &[ModelKind],
    train: &InteractionDataset,
    test: &InteractionDataset,
    features: Option<&FeatureSet>,
    suite: &ModelSuite,
    seed: u64,
    opts: &EvalOptions,
    jobs: usize,
) -> Result<RankingReport> {
    let entries: Vec<RunEntry> = kinds
        .iter()
        .map(|&kind| RunEntry {
            kind,
            ablation: FeatureAblationSpec::PostsLikesPers,
        })
        .collect();
    run_entries(
        ReportKind::Comparison,
        &entries,
        train,
        test,
        features,
        suite,
        seed,
        opts,
        jobs,
    )
}

/// Trains one PersiC variant per ablation under identical settings.
pub fn run_ablation(
    specs: &[FeatureAblationSpec],
    train: &InteractionDataset,
    test: &InteractionDataset,
    features: &FeatureSet,
    suite: &ModelSuite,
    seed: u64,
    opts: &EvalOptions,
    jobs: usize,
) -> Result<RankingReport> {
    let entries: Vec<RunEntry> = specs
        .iter()
        .map(|&ablation| RunEntry {
            kind: ModelKind::Persic,
            ablation,
        })
        .collect();
    run_entries(
        ReportKind::Ablation,
        &entries,
        train,
        test,
        Some(features),
        suite,
        seed,
        opts,
        jobs,
    )
}
