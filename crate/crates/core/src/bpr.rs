//! Pairwise training plumbing shared by every BPR-style model: triples,
//! uniform negative sampling, epoch batching.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Interaction, InteractionDataset};
use crate::error::{Error, Result};
use crate::nn::{all_finite, norm, Adam, ParamSet};
use crate::rng::stream_rng;

/// A user, a post they liked, and a post they did not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Positive pairs per mini-batch (each expands into `negatives` triples).
    pub batch_size: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            negatives: 20,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            dropout: 0.3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "negatives and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning_rate and weight_decay must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `n` posts uniformly (with replacement) from those not in `positives`.
///
/// `positives` must be sorted ascending and free of duplicates.
pub fn sample_negatives<R: Rng + ?Sized>(
    rng: &mut R,
    user: usize,
    positives: &[usize],
    n_posts: usize,
    n: usize,
) -> Result<Vec<usize>> {
    let free = n_posts.saturating_sub(positives.len());
    if free == 0 {
        return Err(Error::NoNegatives { user });
    }
    Ok((0..n)
        .map(|_| {
            // the r-th post (0-based) that is not a positive
            let mut r = rng.gen_range(0..free);
            for &p in positives {
                if p <= r {
                    r += 1;
                } else {
                    break;
                }
            }
            r
        })
        .collect())
}

/// Shuffles positive pairs each epoch and expands them into triples.
#[derive(Clone, Debug)]
pub struct TripleSampler {
    pairs: Vec<Interaction>,
    positives: Vec<Vec<usize>>,
    n_posts: usize,
    negatives: usize,
    batch_size: usize,
}

impl TripleSampler {
    pub fn new(train: &InteractionDataset, batch_size: usize, negatives: usize) -> Result<Self> {
        let positives = train.user_positives();
        for (user, pos) in positives.iter().enumerate() {
            if !pos.is_empty() && pos.len() >= train.n_posts() {
                return Err(Error::NoNegatives { user });
            }
        }
        Ok(TripleSampler {
            pairs: train.interactions().to_vec(),
            positives,
            n_posts: train.n_posts(),
            negatives,
            batch_size: batch_size.max(1),
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn positives(&self) -> &[Vec<usize>] {
        &self.positives
    }

    /// All mini-batches of one epoch.
    pub fn epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<Triple>>> {
        let mut pairs = self.pairs.clone();
        pairs.shuffle(rng);
        pairs
            .chunks(self.batch_size)
            .map(|chunk| {
                let mut batch = Vec::with_capacity(chunk.len() * self.negatives);
                for it in chunk {
                    let negs = sample_negatives(
                        rng,
                        it.user,
                        &self.positives[it.user],
                        self.n_posts,
                        self.negatives,
                    )?;
                    batch.extend(negs.into_iter().map(|neg| Triple {
                        user: it.user,
                        pos: it.post,
                        neg,
                    }));
                }
                Ok(batch)
            })
            .collect()
    }
}

/// Per-epoch mean of the training objective.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_objective: Vec<f64>,
}

/// A model trained on sampled triples by Adam.
pub(crate) trait PairwiseModel: ParamSet {
    /// Read-only side data the model needs (e.g. post features).
    type Context: ?Sized;

    /// Batch objective (to maximize) and the gradient of its negation.
    fn batch_gradients(
        &self,
        ctx: &Self::Context,
        triples: &[Triple],
        cfg: &TrainConfig,
    ) -> (f64, Self);

    /// Hook run after each optimizer step, given the parameters before it.
    fn after_update(&mut self, _before: &Self, _optimizer: &mut Adam) {}

    /// Whether `after_update` needs the previous parameters.
    const NEEDS_PREVIOUS: bool = false;
}

/// Shared training loop: shuffled positive pairs, uniform negatives, Adam.
pub(crate) fn train_pairwise<M: PairwiseModel>(
    mut model: M,
    ctx: &M::Context,
    train: &InteractionDataset,
    cfg: &TrainConfig,
    name: &str,
) -> Result<(M, TrainTrace, Adam)> {
    cfg.validate()?;
    let sampler = TripleSampler::new(train, cfg.batch_size, cfg.negatives)?;
    let mut rng = stream_rng(cfg.seed, "sampling");
    let mut optimizer = Adam::new(cfg.learning_rate);
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        let batches = sampler.epoch(&mut rng)?;
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let (objective, grad) = model.batch_gradients(ctx, batch, cfg);
            if !objective.is_finite() || !all_finite(&grad) {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    param_norm: norm(&model),
                });
            }
            let before = M::NEEDS_PREVIOUS.then(|| model.clone());
            optimizer.update(&mut model, &grad);
            if let Some(before) = before {
                model.after_update(&before, &mut optimizer);
            }
            total += objective;
        }
        let mean = total / batches.len().max(1) as f64;
        log::debug!("{name} epoch {}: objective {mean:.6}", epoch + 1);
        trace.epoch_objective.push(mean);
    }
    Ok((model, trace, optimizer))
}

/// Groups triples by distinct users and posts, in first-seen order.
pub(crate) struct BatchIndex {
    pub users: Vec<usize>,
    pub posts: Vec<usize>,
    /// (row in `users`, row of pos in `posts`, row of neg in `posts`)
    pub rows: Vec<(usize, usize, usize)>,
}

impl BatchIndex {
    pub fn new(triples: &[Triple]) -> Self {
        use std::collections::HashMap;
        let mut users = Vec::new();
        let mut posts = Vec::new();
        let mut u_map = HashMap::new();
        let mut p_map = HashMap::new();
        let slot = |map: &mut HashMap<usize, usize>, list: &mut Vec<usize>, k: usize| {
            *map.entry(k).or_insert_with(|| {
                list.push(k);
                list.len() - 1
            })
        };
        let rows = triples
            .iter()
            .map(|t| {
                let u = slot(&mut u_map, &mut users, t.user);
                let p = slot(&mut p_map, &mut posts, t.pos);
                let n = slot(&mut p_map, &mut posts, t.neg);
                (u, p, n)
            })
            .collect();
        BatchIndex { users, posts, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn forced_negative_when_one_candidate_left() {
        let mut rng = stream_rng(0, "t");
        let negs = sample_negatives(&mut rng, 0, &[0], 2, 20).unwrap();
        assert_eq!(negs, vec![1; 20]);
        assert!(matches!(
            sample_negatives(&mut rng, 3, &[0, 1], 2, 1),
            Err(Error::NoNegatives { user: 3 })
        ));
    }

    #[test]
    fn never_returns_a_positive() {
        let mut rng = stream_rng(1, "t");
        let pos = [0, 3, 4, 9];
        let negs = sample_negatives(&mut rng, 0, &pos, 10, 2000).unwrap();
        assert!(negs.iter().all(|n| !pos.contains(n) && *n < 10));
        for cand in [1, 2, 5, 6, 7, 8] {
            assert!(negs.contains(&cand));
        }
    }

    #[test]
    fn uniformity_chi_square() {
        // 100 candidates out of 110 posts, 1e5 draws; chi-square with 99 dof,
        // critical value at alpha = 0.01 is 134.642
        let mut rng = stream_rng(2, "t");
        let pos: Vec<usize> = (0..110).step_by(11).collect();
        let draws = sample_negatives(&mut rng, 0, &pos, 110, 100_000).unwrap();
        let mut counts = vec![0usize; 110];
        for d in draws {
            counts[d] += 1;
        }
        let expected = 100_000.0 / 100.0;
        let chi2: f64 = (0..110)
            .filter(|p| !pos.contains(p))
            .map(|p| (counts[p] as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 134.642, "chi2 = {chi2}");
    }

    #[test]
    fn default_config_matches_training_protocol() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.negatives), (30, 64, 20));
        assert_eq!(c.dropout, 0.3);
        c.validate().unwrap();
        assert!(TrainConfig {
            dropout: 1.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig { negatives: 0, ..c }.validate().is_err());
    }

    #[test]
    fn epoch_expands_pairs_deterministically() {
        let ds = crate::dataset::fixtures::small();
        let sampler = TripleSampler::new(&ds, 3, 4).unwrap();
        let a = sampler.epoch(&mut stream_rng(5, "s")).unwrap();
        let b = sampler.epoch(&mut stream_rng(5, "s")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let total: usize = a.iter().map(Vec::len).sum();
        assert_eq!(total, 7 * 4);
        let pos = ds.user_positives();
        for t in a.iter().flatten() {
            assert!(pos[t.user].contains(&t.pos));
            assert!(!pos[t.user].contains(&t.neg));
        }
    }

    #[test]
    fn batch_index_dedups() {
        let t = [
            Triple {
                user: 5,
                pos: 1,
                neg: 2,
            },
            Triple {
                user: 5,
                pos: 1,
                neg: 3,
            },
            Triple {
                user: 7,
                pos: 2,
                neg: 1,
            },
        ];
        let b = BatchIndex::new(&t);
        assert_eq!(b.users, [5, 7]);
        assert_eq!(b.posts, [1, 2, 3]);
        assert_eq!(b.rows, [(0, 0, 1), (0, 0, 2), (1, 1, 0)]);
    }
}
