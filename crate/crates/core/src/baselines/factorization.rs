//! MF and degree-two FM over one-hot user and item features.
//!
//! With only the two one-hot blocks active, the FM pairwise sum reduces to
//! the single ⟨v_u, v_i⟩ term, so FM scores are `w0 + w_u + w_i + ⟨p_u, q_i⟩`.
//! MF keeps the embedding term and `w0`, with the linear weights frozen at 0.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bpr::{train_pairwise, PairwiseModel, TrainConfig, TrainTrace, Triple};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::{
    axpy, flat, flat_mut, log_sigmoid, normal_matrix, sigmoid, sum_squares, zeros_like, Adam,
    ParamSet,
};
use crate::recommender::Scorer;
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizationConfig {
    pub dim: usize,
    pub init_std: f64,
    pub train: TrainConfig,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        FactorizationConfig {
            dim: 32,
            init_std: 0.1,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentFactorModel {
    /// Users × d.
    pub p: Array2<f64>,
    /// Posts × d.
    pub q: Array2<f64>,
    /// Global bias, stored as a length-1 array.
    pub w0: Array1<f64>,
    pub w_user: Array1<f64>,
    pub w_item: Array1<f64>,
    /// Include the linear terms.
    pub fm: bool,
}

impl LatentFactorModel {
    pub fn new(
        n_users: usize,
        n_posts: usize,
        dim: usize,
        init_std: f64,
        fm: bool,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("latent dimension must be at least 1".into()));
        }
        let mut rng = stream_rng(seed, "init");
        Ok(LatentFactorModel {
            p: normal_matrix(n_users, dim, init_std, &mut rng),
            q: normal_matrix(n_posts, dim, init_std, &mut rng),
            w0: Array1::zeros(1),
            w_user: Array1::zeros(n_users),
            w_item: Array1::zeros(n_posts),
            fm,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.ncols()
    }
}

impl ParamSet for LatentFactorModel {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        vec![
            ("p".into(), flat(&self.p)),
            ("q".into(), flat(&self.q)),
            ("w0".into(), flat(&self.w0)),
            ("w_user".into(), flat(&self.w_user)),
            ("w_item".into(), flat(&self.w_item)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            flat_mut(&mut self.p),
            flat_mut(&mut self.q),
            flat_mut(&mut self.w0),
            flat_mut(&mut self.w_user),
            flat_mut(&mut self.w_item),
        ]
    }
}

impl Scorer for LatentFactorModel {
    fn n_users(&self) -> usize {
        self.p.nrows()
    }

    fn n_posts(&self) -> usize {
        self.q.nrows()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        let mut s = self.w0[0] + self.p.row(user).dot(&self.q.row(post));
        if self.fm {
            s += self.w_user[user] + self.w_item[post];
        }
        s
    }
}

impl PairwiseModel for LatentFactorModel {
    type Context = ();

    fn batch_gradients(&self, _: &(), triples: &[Triple], cfg: &TrainConfig) -> (f64, Self) {
        let mut grad = zeros_like(self);
        let n = triples.len().max(1) as f64;
        let mut sum = 0.0;
        for t in triples {
            let delta = self.score_unchecked(t.user, t.pos) - self.score_unchecked(t.user, t.neg);
            sum += log_sigmoid(delta);
            let g = -sigmoid(-delta) / n;
            let pu = self.p.row(t.user);
            grad.p.row_mut(t.user).scaled_add(g, &self.q.row(t.pos));
            grad.p.row_mut(t.user).scaled_add(-g, &self.q.row(t.neg));
            grad.q.row_mut(t.pos).scaled_add(g, &pu);
            grad.q.row_mut(t.neg).scaled_add(-g, &pu);
            if self.fm {
                // w0 and w_user cancel inside Δ
                grad.w_item[t.pos] += g;
                grad.w_item[t.neg] -= g;
            }
        }
        axpy(&mut grad, 2.0 * cfg.weight_decay, self);
        (sum / n - cfg.weight_decay * sum_squares(self), grad)
    }
}

pub fn train_mf(
    train: &InteractionDataset,
    cfg: &FactorizationConfig,
) -> Result<(LatentFactorModel, TrainTrace, Adam)> {
    train_factorization(train, cfg, false)
}

pub fn train_fm(
    train: &InteractionDataset,
    cfg: &FactorizationConfig,
) -> Result<(LatentFactorModel, TrainTrace, Adam)> {
    train_factorization(train, cfg, true)
}

fn train_factorization(
    train: &InteractionDataset,
    cfg: &FactorizationConfig,
    fm: bool,
) -> Result<(LatentFactorModel, TrainTrace, Adam)> {
    let model = LatentFactorModel::new(
        train.n_users(),
        train.n_posts(),
        cfg.dim,
        cfg.init_std,
        fm,
        cfg.train.seed,
    )?;
    train_pairwise(model, &(), train, &cfg.train, if fm { "fm" } else { "mf" })
}
