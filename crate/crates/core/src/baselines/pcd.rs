//! Personalized content discovery with users in place of brands.
//!
//! A user is a weighted combination of shared association vectors,
//! `x_u = w_uᵀ A`. A post goes through two leaky-ReLU affine layers. Pairs
//! are scored by cosine similarity and trained with a margin hinge, an L1
//! penalty on the weights of the batch's users, and an L2 norm penalty on
//! the remaining parameters.

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bpr::{train_pairwise, BatchIndex, PairwiseModel, TrainConfig, TrainTrace, Triple};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::{flat, flat_mut, leaky_relu, zeros_like, Adam, Dense, ParamSet};
use crate::recommender::{check_index, Scorer};
use crate::rng::stream_rng;

const NORM_EPS: f64 = 1e-12;

/// Position of `weights` in the parameter list.
const WEIGHTS_TENSOR: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcdConfig {
    /// Number of association vectors.
    pub n_assoc: usize,
    /// Size of the shared latent space.
    pub latent_dim: usize,
    /// Width of the first post layer.
    pub hidden: usize,
    pub margin: f64,
    pub alpha: f64,
    pub beta: f64,
    pub leaky_slope: f64,
    pub train: TrainConfig,
}

impl Default for PcdConfig {
    fn default() -> Self {
        PcdConfig {
            n_assoc: 32,
            latent_dim: 32,
            hidden: 64,
            margin: 0.1,
            alpha: 0.01,
            beta: 1e-5,
            leaky_slope: 0.01,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcdPenalty {
    pub margin: f64,
    pub alpha: f64,
    pub beta: f64,
    pub leaky_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcdModel {
    /// n_assoc × latent.
    pub assoc: Array2<f64>,
    /// users × n_assoc.
    pub weights: Array2<f64>,
    pub layer1: Dense,
    pub layer2: Dense,
    pub penalty: PcdPenalty,
}

/// Cosine with a small norm floor; also returns both norms.
fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> (f64, f64, f64) {
    let na = (a.dot(&a) + NORM_EPS).sqrt();
    let nb = (b.dot(&b) + NORM_EPS).sqrt();
    (a.dot(&b) / (na * nb), na, nb)
}

/// Scales every non-zero row to unit L2 norm.
fn normalize_rows(m: &mut Array2<f64>) {
    for mut r in m.rows_mut() {
        let n = r.dot(&r).sqrt();
        if n > 0.0 {
            r /= n;
        }
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    cosine(ndarray::ArrayView1::from(a), ndarray::ArrayView1::from(b)).0
}

struct PostForward {
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    out: Array2<f64>,
}

impl PcdModel {
    pub fn new(n_users: usize, post_dim: usize, cfg: &PcdConfig) -> Result<Self> {
        if cfg.n_assoc == 0 || cfg.latent_dim == 0 || cfg.hidden == 0 {
            return Err(Error::Config(
                "PCD n_assoc, latent_dim and hidden must be at least 1".into(),
            ));
        }
        if post_dim == 0 {
            return Err(Error::Dimension("PCD needs post features".into()));
        }
        let mut rng = stream_rng(cfg.train.seed, "init");
        let bound = 1.0 / (cfg.n_assoc as f64).sqrt();
        let assoc = Array2::from_shape_fn((cfg.n_assoc, cfg.latent_dim), |_| {
            rng.gen_range(-bound..bound)
        });
        let mut weights =
            Array2::from_shape_fn((n_users, cfg.n_assoc), |_| rng.gen_range(-bound..bound));
        normalize_rows(&mut weights);
        let layer1 = Dense::uniform_fan_in(post_dim, cfg.hidden, &mut rng);
        let layer2 = Dense::uniform_fan_in(cfg.hidden, cfg.latent_dim, &mut rng);
        Ok(PcdModel {
            assoc,
            weights,
            layer1,
            layer2,
            penalty: PcdPenalty {
                margin: cfg.margin,
                alpha: cfg.alpha,
                beta: cfg.beta,
                leaky_slope: cfg.leaky_slope,
            },
        })
    }

    pub fn user_vectors(&self, users: &[usize]) -> Array2<f64> {
        self.weights.select(Axis(0), users).dot(&self.assoc)
    }

    fn post_forward(&self, x: Array2<f64>) -> PostForward {
        let slope = self.penalty.leaky_slope;
        let z1 = self.layer1.forward(&x);
        let h1 = z1.mapv(|v| leaky_relu(v, slope));
        let z2 = self.layer2.forward(&h1);
        let out = z2.mapv(|v| leaky_relu(v, slope));
        PostForward { z1, h1, z2, out }
    }

    pub fn post_vectors(&self, post_x: &Array2<f64>) -> Array2<f64> {
        self.post_forward(post_x.clone()).out
    }

    /// Fraction of attention weights with |w| below `tol`.
    pub fn weight_sparsity(&self, tol: f64) -> f64 {
        let n = self.weights.len().max(1) as f64;
        self.weights.iter().filter(|w| w.abs() < tol).count() as f64 / n
    }

    fn theta_sq(&self) -> f64 {
        self.tensors()
            .into_iter()
            .filter(|(n, _)| n != "weights")
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn scorer(&self, post_x: &Array2<f64>) -> Result<PcdScorer> {
        if post_x.ncols() != self.layer1.fan_in() {
            return Err(Error::Dimension(format!(
                "PCD expects {} post features, got {}",
                self.layer1.fan_in(),
                post_x.ncols()
            )));
        }
        let normalize = |mut m: Array2<f64>| {
            for mut r in m.rows_mut() {
                let n = (r.dot(&r) + NORM_EPS).sqrt();
                r /= n;
            }
            m
        };
        let all: Vec<usize> = (0..self.weights.nrows()).collect();
        Ok(PcdScorer {
            users: normalize(self.user_vectors(&all)),
            posts: normalize(self.post_vectors(post_x)),
        })
    }

    /// Loss to minimize for one batch and its (sub)gradient.
    pub fn loss_and_gradient(&self, post_x: &Array2<f64>, triples: &[Triple]) -> (f64, PcdModel) {
        let pen = self.penalty;
        let idx = BatchIndex::new(triples);
        let xu = self.user_vectors(&idx.users);
        let pf = self.post_forward(post_x.select(Axis(0), &idx.posts));
        let xp = &pf.out;
        let mut dxu = Array2::<f64>::zeros(xu.raw_dim());
        let mut dxp = Array2::<f64>::zeros(xp.raw_dim());
        let n = triples.len().max(1) as f64;
        let mut hinge = 0.0;
        // d cos(u, p) with weight `c` into dxu[ur] and dxp[pr]
        let add_cos_grad =
            |ur: usize, pr: usize, c: f64, dxu: &mut Array2<f64>, dxp: &mut Array2<f64>| {
                let (u, p) = (xu.row(ur), xp.row(pr));
                let (f, nu, np) = cosine(u, p);
                let mut gu = dxu.row_mut(ur);
                gu.scaled_add(c / (nu * np), &p);
                gu.scaled_add(-c * f / (nu * nu), &u);
                let mut gp = dxp.row_mut(pr);
                gp.scaled_add(c / (nu * np), &u);
                gp.scaled_add(-c * f / (np * np), &p);
            };
        for &(ur, pr, nr) in &idx.rows {
            let f_pos = cosine(xu.row(ur), xp.row(pr)).0;
            let f_neg = cosine(xu.row(ur), xp.row(nr)).0;
            let h = f_neg - f_pos + pen.margin;
            if h > 0.0 {
                hinge += h;
                add_cos_grad(ur, nr, 1.0 / n, &mut dxu, &mut dxp);
                add_cos_grad(ur, pr, -1.0 / n, &mut dxu, &mut dxp);
            }
        }
        let mut grad = zeros_like(self);
        // x_u = w_u A
        let wb = self.weights.select(Axis(0), &idx.users);
        grad.assoc += &wb.t().dot(&dxu);
        let dwb = dxu.dot(&self.assoc.t());
        let slope = pen.leaky_slope;
        let lrelu_grad = |z: &Array2<f64>| z.mapv(|v| if v > 0.0 { 1.0 } else { slope });
        let dz2 = &dxp * &lrelu_grad(&pf.z2);
        let dh1 = self.layer2.backward(&pf.h1, &dz2, &mut grad.layer2);
        let dz1 = dh1 * lrelu_grad(&pf.z1);
        self.layer1
            .backward_params(&post_x.select(Axis(0), &idx.posts), &dz1, &mut grad.layer1);

        // α/|U_b| Σ_u ‖w_u‖₁ over the batch's users
        let nu = idx.users.len().max(1) as f64;
        let mut l1 = 0.0;
        for (r, &u) in idx.users.iter().enumerate() {
            let w = self.weights.row(u);
            l1 += w.iter().map(|x| x.abs()).sum::<f64>();
            let k = pen.alpha / nu;
            for ((g, &wj), &smooth) in grad.weights.row_mut(u).iter_mut().zip(w).zip(dwb.row(r)) {
                *g = if wj != 0.0 {
                    smooth + k * wj.signum()
                } else {
                    // minimum-norm element of the subdifferential at 0
                    smooth.signum() * (smooth.abs() - k).max(0.0)
                };
            }
        }
        // β‖θ‖₂ on everything but the attention weights
        let theta = self.theta_sq().sqrt();
        if theta > 0.0 {
            let k = pen.beta / theta;
            grad.assoc.scaled_add(k, &self.assoc);
            for (g, p) in [
                (&mut grad.layer1, &self.layer1),
                (&mut grad.layer2, &self.layer2),
            ] {
                g.weight.scaled_add(k, &p.weight);
                g.bias.scaled_add(k, &p.bias);
            }
        }
        let loss = hinge / n + pen.alpha * l1 / nu + pen.beta * theta;
        (loss, grad)
    }
}

impl ParamSet for PcdModel {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = vec![
            ("assoc".to_string(), flat(&self.assoc)),
            ("weights".to_string(), flat(&self.weights)),
        ];
        self.layer1.push_tensors("layer1", &mut v);
        self.layer2.push_tensors("layer2", &mut v);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![flat_mut(&mut self.assoc), flat_mut(&mut self.weights)];
        self.layer1.push_tensors_mut(&mut v);
        self.layer2.push_tensors_mut(&mut v);
        v
    }
}

impl PairwiseModel for PcdModel {
    type Context = Array2<f64>;

    const NEEDS_PREVIOUS: bool = true;

    fn batch_gradients(
        &self,
        post_x: &Array2<f64>,
        triples: &[Triple],
        _: &TrainConfig,
    ) -> (f64, Self) {
        let (loss, grad) = self.loss_and_gradient(post_x, triples);
        (-loss, grad)
    }

    /// Truncation: a weight whose sign flipped in this step is set to 0 and
    /// its optimizer moments are cleared. Rows are then put back on the unit
    /// sphere; the cosine score ignores their scale, and without this the L1
    /// term only shrinks every weight uniformly.
    fn after_update(&mut self, before: &Self, optimizer: &mut Adam) {
        for (j, (w, &b)) in self
            .weights
            .iter_mut()
            .zip(before.weights.iter())
            .enumerate()
        {
            if *w * b < 0.0 {
                *w = 0.0;
                optimizer.reset_moments(WEIGHTS_TENSOR, j);
            }
        }
        normalize_rows(&mut self.weights);
    }
}

/// Trains PCD on `post_x` (posts × features). The trace holds −L_PCD.
pub fn train_pcd(
    train: &InteractionDataset,
    post_x: &Array2<f64>,
    cfg: &PcdConfig,
) -> Result<(PcdModel, TrainTrace, Adam)> {
    if post_x.nrows() != train.n_posts() {
        return Err(Error::Dimension(format!(
            "post features cover {} posts, dataset has {}",
            post_x.nrows(),
            train.n_posts()
        )));
    }
    let model = PcdModel::new(train.n_users(), post_x.ncols(), cfg)?;
    train_pairwise(model, post_x, train, &cfg.train, "pcd")
}

/// Unit-normalized user and post vectors.
#[derive(Clone, Debug)]
pub struct PcdScorer {
    users: Array2<f64>,
    posts: Array2<f64>,
}

impl Scorer for PcdScorer {
    fn n_users(&self) -> usize {
        self.users.nrows()
    }

    fn n_posts(&self) -> usize {
        self.posts.nrows()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        self.users.row(user).dot(&self.posts.row(post))
    }

    fn score_user(&self, user: usize) -> Result<Vec<f64>> {
        check_index("user", user, self.n_users())?;
        Ok(self.posts.dot(&self.users.row(user)).to_vec())
    }
}
