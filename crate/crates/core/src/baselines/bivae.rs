//! Bilateral VAE for binary interaction matrices.
//!
//! Users are encoded from their rows of X and items from their columns, each
//! into a diagonal Gaussian. A cell's likelihood is Bernoulli with logit
//! `p_u · q_i`. Training alternates: a user half with item samples held
//! fixed, then an item half with user samples held fixed.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::{norm, sigmoid, softplus, zeros_like, Adam, Dense, ParamSet};
use crate::recommender::Scorer;
use crate::rng::{stream_rng, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BivaeConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    /// Rows per mini-batch in each half.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Floor added to the softplus scale.
    pub min_sigma: f64,
    /// Joint samples behind each epoch's ELBO estimate.
    pub elbo_samples: usize,
    pub seed: u64,
}

impl Default for BivaeConfig {
    fn default() -> Self {
        BivaeConfig {
            latent_dim: 32,
            hidden: 64,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            min_sigma: 1e-4,
            elbo_samples: 32,
            seed: 0,
        }
    }
}

/// KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ (σ² + μ² − 1 − ln σ²).
pub fn kl_standard_normal(mu: &[f64], sigma: &[f64]) -> f64 {
    mu.iter()
        .zip(sigma)
        .map(|(&m, &s)| 0.5 * (s * s + m * m - 1.0 - (s * s).ln()))
        .sum()
}

fn kl_matrix(mu: &Array2<f64>, sigma: &Array2<f64>) -> f64 {
    mu.iter()
        .zip(sigma.iter())
        .map(|(&m, &s)| 0.5 * (s * s + m * m - 1.0 - (s * s).ln()))
        .sum()
}

/// One tanh hidden layer, then linear μ and softplus σ heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianEncoder {
    pub hidden: Dense,
    pub mu: Dense,
    pub sigma: Dense,
    pub min_sigma: f64,
}

pub(crate) struct Encoded {
    h: Array2<f64>,
    s: Array2<f64>,
    pub mu: Array2<f64>,
    pub sigma: Array2<f64>,
}

impl GaussianEncoder {
    pub fn new(
        input: usize,
        hidden: usize,
        latent: usize,
        min_sigma: f64,
        rng: &mut StreamRng,
    ) -> Self {
        GaussianEncoder {
            hidden: Dense::uniform_fan_in(input, hidden, rng),
            mu: Dense::uniform_fan_in(hidden, latent, rng),
            sigma: Dense::uniform_fan_in(hidden, latent, rng),
            min_sigma,
        }
    }

    pub(crate) fn encode(&self, x: &Array2<f64>) -> Encoded {
        let h = self.hidden.forward(x).mapv(f64::tanh);
        let mu = self.mu.forward(&h);
        let s = self.sigma.forward(&h);
        let sigma = s.mapv(|v| softplus(v) + self.min_sigma);
        Encoded { h, s, mu, sigma }
    }

    pub fn means(&self, x: &Array2<f64>) -> Array2<f64> {
        self.encode(x).mu
    }

    fn backward(
        &self,
        x: &Array2<f64>,
        e: &Encoded,
        dmu: &Array2<f64>,
        dsigma: &Array2<f64>,
        grad: &mut GaussianEncoder,
    ) {
        let ds = dsigma * &e.s.mapv(sigmoid);
        let dh = self.mu.backward(&e.h, dmu, &mut grad.mu)
            + self.sigma.backward(&e.h, &ds, &mut grad.sigma);
        let dz = dh * &e.h.mapv(|t| 1.0 - t * t);
        self.hidden.backward_params(x, &dz, &mut grad.hidden);
    }
}

impl ParamSet for GaussianEncoder {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::new();
        self.hidden.push_tensors("hidden", &mut v);
        self.mu.push_tensors("mu", &mut v);
        self.sigma.push_tensors("sigma", &mut v);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.hidden.push_tensors_mut(&mut v);
        self.mu.push_tensors_mut(&mut v);
        self.sigma.push_tensors_mut(&mut v);
        v
    }
}

/// Terms of one half-step batch, unnormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfStep {
    pub log_likelihood: f64,
    pub kl: f64,
}

/// ELBO terms for a batch of rows `x` (B × m) encoded by `enc`, against fixed
/// latent samples `other` (m × d) of the opposite side, with reparameterization
/// noise `eps` (B × d). The gradient is of the loss `−(loglik − KL) / (B·m)`.
pub fn half_step(
    enc: &GaussianEncoder,
    x: &Array2<f64>,
    other: &Array2<f64>,
    eps: &Array2<f64>,
) -> (HalfStep, GaussianEncoder) {
    let e = enc.encode(x);
    let z = &e.mu + &(&e.sigma * eps);
    let logits = z.dot(&other.t());
    let log_likelihood: f64 = logits
        .iter()
        .zip(x.iter())
        .map(|(&l, &xv)| xv * l - softplus(l))
        .sum();
    let kl = kl_matrix(&e.mu, &e.sigma);
    // d(loglik)/dlogits = x − σ(logits)
    let dlogits = x - &logits.mapv(sigmoid);
    let dz = dlogits.dot(other);
    let scale = -1.0 / (x.nrows() * x.ncols()).max(1) as f64;
    let dmu = (&dz - &e.mu) * scale;
    let dsigma = (&dz * eps - &(&e.sigma - &e.sigma.mapv(|s| 1.0 / s))) * scale;
    let mut grad = zeros_like(enc);
    enc.backward(x, &e, &dmu, &dsigma, &mut grad);
    (HalfStep { log_likelihood, kl }, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivaeModel {
    pub user_encoder: GaussianEncoder,
    pub item_encoder: GaussianEncoder,
    /// Posterior means from the training matrix, used for scoring.
    pub user_mu: Array2<f64>,
    pub item_mu: Array2<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BivaeTrace {
    /// Per-cell ELBO of the model at the end of each epoch.
    pub epoch_elbo: Vec<f64>,
    /// Per-cell average of the training batches' terms, ½ of each half's
    /// log-likelihood minus both KLs.
    pub epoch_batch_elbo: Vec<f64>,
}

impl BivaeModel {
    pub fn new(n_users: usize, n_posts: usize, cfg: &BivaeConfig) -> Result<Self> {
        if cfg.latent_dim == 0 || cfg.hidden == 0 {
            return Err(Error::Config(
                "BiVAE latent_dim and hidden must be at least 1".into(),
            ));
        }
        if !(cfg.min_sigma > 0.0) {
            return Err(Error::Config("BiVAE min_sigma must be positive".into()));
        }
        let mut rng = stream_rng(cfg.seed, "init");
        let user_encoder =
            GaussianEncoder::new(n_posts, cfg.hidden, cfg.latent_dim, cfg.min_sigma, &mut rng);
        let item_encoder =
            GaussianEncoder::new(n_users, cfg.hidden, cfg.latent_dim, cfg.min_sigma, &mut rng);
        Ok(BivaeModel {
            user_encoder,
            item_encoder,
            user_mu: Array2::zeros((n_users, cfg.latent_dim)),
            item_mu: Array2::zeros((n_posts, cfg.latent_dim)),
        })
    }

    /// Recomputes the cached posterior means from `x`.
    pub fn refresh_means(&mut self, x: &Array2<f64>) {
        self.user_mu = self.user_encoder.means(x);
        self.item_mu = self
            .item_encoder
            .means(&x.t().as_standard_layout().into_owned());
    }
}

impl Scorer for BivaeModel {
    fn n_users(&self) -> usize {
        self.user_mu.nrows()
    }

    fn n_posts(&self) -> usize {
        self.item_mu.nrows()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        sigmoid(self.user_mu.row(user).dot(&self.item_mu.row(post)))
    }
}

/// Dense binary users × posts matrix of a dataset's interactions.
pub fn interaction_matrix(ds: &InteractionDataset) -> Array2<f64> {
    let mut x = Array2::zeros((ds.n_users(), ds.n_posts()));
    for it in ds.interactions() {
        x[[it.user, it.post]] = 1.0;
    }
    x
}

/// Per-cell ELBO of `model` on `x`: Monte Carlo log-likelihood over
/// `samples` joint draws of both sides, minus the closed-form KLs.
pub fn elbo(model: &BivaeModel, x: &Array2<f64>, samples: usize, rng: &mut StreamRng) -> f64 {
    let xt = x.t().as_standard_layout().into_owned();
    let u = model.user_encoder.encode(x);
    let i = model.item_encoder.encode(&xt);
    let kl = |e: &Encoded| kl_matrix(&e.mu, &e.sigma);
    let draw = |e: &Encoded, rng: &mut StreamRng| {
        let eps: Array2<f64> =
            Array2::from_shape_fn(e.mu.raw_dim(), |_| StandardNormal.sample(rng));
        &e.mu + &(&e.sigma * &eps)
    };
    let samples = samples.max(1);
    let mut ll = 0.0;
    for _ in 0..samples {
        let logits = draw(&u, rng).dot(&draw(&i, rng).t());
        ll += logits
            .iter()
            .zip(x.iter())
            .map(|(&l, &xv)| xv * l - softplus(l))
            .sum::<f64>();
    }
    let cells = x.len().max(1) as f64;
    (ll / samples as f64 - kl(&u) - kl(&i)) / cells
}

fn sample_latents(enc: &GaussianEncoder, x: &Array2<f64>, rng: &mut StreamRng) -> Array2<f64> {
    let e = enc.encode(x);
    let eps: Array2<f64> = Array2::from_shape_fn(e.mu.raw_dim(), |_| StandardNormal.sample(rng));
    e.mu + e.sigma * eps
}

/// One half epoch over the rows of `x`; returns summed log-likelihood and KL.
fn train_half(
    enc: &mut GaussianEncoder,
    opt: &mut Adam,
    x: &Array2<f64>,
    other: &Array2<f64>,
    cfg: &BivaeConfig,
    shuffle: &mut StreamRng,
    noise: &mut StreamRng,
    epoch: usize,
) -> Result<HalfStep> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.shuffle(shuffle);
    let mut total = HalfStep {
        log_likelihood: 0.0,
        kl: 0.0,
    };
    for (batch, rows) in order.chunks(cfg.batch_size.max(1)).enumerate() {
        let xb = x.select(Axis(0), rows);
        let eps: Array2<f64> = Array2::from_shape_fn((rows.len(), cfg.latent_dim), |_| {
            StandardNormal.sample(noise)
        });
        let (terms, grad) = half_step(enc, &xb, other, &eps);
        if !terms.log_likelihood.is_finite() || !terms.kl.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch,
                param_norm: norm(enc),
            });
        }
        opt.update(enc, &grad);
        total.log_likelihood += terms.log_likelihood;
        total.kl += terms.kl;
    }
    Ok(total)
}

/// Alternating ELBO maximization on binary `x` (users × posts).
pub fn train_bivae_matrix(x: &Array2<f64>, cfg: &BivaeConfig) -> Result<(BivaeModel, BivaeTrace)> {
    if x.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidDataset(
            "BiVAE needs a binary interaction matrix".into(),
        ));
    }
    let (n, m) = x.dim();
    let mut model = BivaeModel::new(n, m, cfg)?;
    let xt = x.t().as_standard_layout().into_owned();
    let mut shuffle = stream_rng(cfg.seed, "sampling");
    let mut noise = stream_rng(cfg.seed, "reparam");
    let mut monitor = stream_rng(cfg.seed, "elbo");
    let mut user_opt = Adam::new(cfg.learning_rate);
    let mut item_opt = Adam::new(cfg.learning_rate);
    let mut trace = BivaeTrace::default();
    let cells = (n * m).max(1) as f64;
    for epoch in 0..cfg.epochs {
        let items = sample_latents(&model.item_encoder, &xt, &mut noise);
        let u = train_half(
            &mut model.user_encoder,
            &mut user_opt,
            x,
            &items,
            cfg,
            &mut shuffle,
            &mut noise,
            epoch,
        )?;
        let users = sample_latents(&model.user_encoder, x, &mut noise);
        let i = train_half(
            &mut model.item_encoder,
            &mut item_opt,
            &xt,
            &users,
            cfg,
            &mut shuffle,
            &mut noise,
            epoch,
        )?;
        let batch_elbo = (0.5 * (u.log_likelihood + i.log_likelihood) - u.kl - i.kl) / cells;
        let value = elbo(&model, x, cfg.elbo_samples, &mut monitor);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                param_norm: norm(&model.user_encoder).hypot(norm(&model.item_encoder)),
            });
        }
        log::debug!(
            "bivae epoch {}: elbo/cell {value:.6} (batches {batch_elbo:.6})",
            epoch + 1
        );
        trace.epoch_elbo.push(value);
        trace.epoch_batch_elbo.push(batch_elbo);
    }
    model.refresh_means(x);
    Ok((model, trace))
}

pub fn train_bivae(
    train: &InteractionDataset,
    cfg: &BivaeConfig,
) -> Result<(BivaeModel, BivaeTrace)> {
    train_bivae_matrix(&interaction_matrix(train), cfg)
}
