//! Neural matrix factorization: a GMF path and an MLP path joined by a
//! linear output layer.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::bpr::{train_pairwise, PairwiseModel, TrainConfig, TrainTrace, Triple};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::{
    axpy, flat, flat_mut, log_sigmoid, normal_matrix, sigmoid, sum_squares, zeros_like, Adam,
    Dense, ParamSet,
};
use crate::recommender::Scorer;
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuCfConfig {
    /// Embedding size of each path.
    pub dim: usize,
    /// MLP widths, starting with the input width 2·dim.
    pub mlp_layers: Vec<usize>,
    pub init_std: f64,
    pub train: TrainConfig,
}

impl Default for NeuCfConfig {
    fn default() -> Self {
        NeuCfConfig {
            dim: 32,
            mlp_layers: vec![64, 32, 16],
            init_std: 0.1,
            train: TrainConfig::default(),
        }
    }
}

impl NeuCfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("NeuCF dim must be at least 1".into()));
        }
        match self.mlp_layers.first() {
            Some(&w) if w == 2 * self.dim && self.mlp_layers.iter().all(|&w| w > 0) => Ok(()),
            _ => Err(Error::Config(format!(
                "NeuCF mlp_layers must start with 2·dim = {} and be positive, got {:?}",
                2 * self.dim,
                self.mlp_layers
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuCfModel {
    pub gmf_user: Array2<f64>,
    pub gmf_item: Array2<f64>,
    pub mlp_user: Array2<f64>,
    pub mlp_item: Array2<f64>,
    /// ReLU layers of the MLP path.
    pub mlp: Vec<Dense>,
    /// Output weights over the GMF product.
    pub out_gmf: Array1<f64>,
    /// Output weights over the last MLP layer.
    pub out_mlp: Array1<f64>,
}

struct Forward {
    /// Per layer input.
    inputs: Vec<Array2<f64>>,
    /// Per layer ReLU gate.
    gates: Vec<Array2<f64>>,
    phi_mlp: Array2<f64>,
    phi_gmf: Array2<f64>,
    scores: Array1<f64>,
}

impl NeuCfModel {
    pub fn new(n_users: usize, n_posts: usize, cfg: &NeuCfConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, "init");
        let d = cfg.dim;
        let gmf_user = normal_matrix(n_users, d, cfg.init_std, &mut rng);
        let gmf_item = normal_matrix(n_posts, d, cfg.init_std, &mut rng);
        let mlp_user = normal_matrix(n_users, d, cfg.init_std, &mut rng);
        let mlp_item = normal_matrix(n_posts, d, cfg.init_std, &mut rng);
        let mlp: Vec<Dense> = cfg
            .mlp_layers
            .windows(2)
            .map(|w| Dense::uniform_fan_in(w[0], w[1], &mut rng))
            .collect();
        let last = *cfg.mlp_layers.last().expect("validated");
        let bound = 1.0 / ((d + last) as f64).sqrt();
        let mut uniform =
            |n: usize| Array1::from_shape_fn(n, |_| rand::Rng::gen_range(&mut rng, -bound..bound));
        let out_gmf = uniform(d);
        let out_mlp = uniform(last);
        Ok(NeuCfModel {
            gmf_user,
            gmf_item,
            mlp_user,
            mlp_item,
            mlp,
            out_gmf,
            out_mlp,
        })
    }

    fn forward(&self, users: &[usize], items: &[usize]) -> Forward {
        let phi_gmf = self.gmf_user.select(Axis(0), users) * self.gmf_item.select(Axis(0), items);
        let mut h = concatenate![
            Axis(1),
            self.mlp_user.select(Axis(0), users),
            self.mlp_item.select(Axis(0), items)
        ];
        let mut inputs = Vec::with_capacity(self.mlp.len());
        let mut gates = Vec::with_capacity(self.mlp.len());
        for layer in &self.mlp {
            let z = layer.forward(&h);
            let gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let out = &z * &gate;
            inputs.push(h);
            gates.push(gate);
            h = out;
        }
        let scores = phi_gmf.dot(&self.out_gmf) + h.dot(&self.out_mlp);
        Forward {
            inputs,
            gates,
            phi_mlp: h,
            phi_gmf,
            scores,
        }
    }

    /// Accumulates gradients given dL/dscore per (user, item) row.
    fn backward(
        &self,
        f: &Forward,
        users: &[usize],
        items: &[usize],
        dscore: &Array1<f64>,
        grad: &mut NeuCfModel,
    ) {
        let ds = dscore.view().insert_axis(Axis(1));
        grad.out_gmf += &f.phi_gmf.t().dot(dscore);
        grad.out_mlp += &f.phi_mlp.t().dot(dscore);
        let dphi_gmf = &ds * &self.out_gmf;
        let mut g = &ds * &self.out_mlp;
        for l in (0..self.mlp.len()).rev() {
            let dz = &g * &f.gates[l];
            g = self.mlp[l].backward(&f.inputs[l], &dz, &mut grad.mlp[l]);
        }
        let d = self.gmf_user.ncols();
        for (r, (&u, &i)) in users.iter().zip(items).enumerate() {
            let dg = dphi_gmf.row(r);
            let mut gu = grad.gmf_user.row_mut(u);
            gu.scaled_add(1.0, &(&dg * &self.gmf_item.row(i)));
            let mut gi = grad.gmf_item.row_mut(i);
            gi.scaled_add(1.0, &(&dg * &self.gmf_user.row(u)));
            let mut mu = grad.mlp_user.row_mut(u);
            mu += &g.slice(s![r, ..d]);
            let mut mi = grad.mlp_item.row_mut(i);
            mi += &g.slice(s![r, d..]);
        }
    }
}

impl ParamSet for NeuCfModel {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = vec![
            ("gmf_user".to_string(), flat(&self.gmf_user)),
            ("gmf_item".to_string(), flat(&self.gmf_item)),
            ("mlp_user".to_string(), flat(&self.mlp_user)),
            ("mlp_item".to_string(), flat(&self.mlp_item)),
        ];
        for (i, l) in self.mlp.iter().enumerate() {
            l.push_tensors(&format!("mlp.{i}"), &mut v);
        }
        v.push(("out_gmf".into(), flat(&self.out_gmf)));
        v.push(("out_mlp".into(), flat(&self.out_mlp)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![
            flat_mut(&mut self.gmf_user),
            flat_mut(&mut self.gmf_item),
            flat_mut(&mut self.mlp_user),
            flat_mut(&mut self.mlp_item),
        ];
        for l in &mut self.mlp {
            l.push_tensors_mut(&mut v);
        }
        v.push(flat_mut(&mut self.out_gmf));
        v.push(flat_mut(&mut self.out_mlp));
        v
    }
}

impl Scorer for NeuCfModel {
    fn n_users(&self) -> usize {
        self.gmf_user.nrows()
    }

    fn n_posts(&self) -> usize {
        self.gmf_item.nrows()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        self.forward(&[user], &[post]).scores[0]
    }

    fn score_user(&self, user: usize) -> Result<Vec<f64>> {
        crate::recommender::check_index("user", user, self.n_users())?;
        let items: Vec<usize> = (0..self.n_posts()).collect();
        Ok(self
            .forward(&vec![user; items.len()], &items)
            .scores
            .to_vec())
    }
}

impl PairwiseModel for NeuCfModel {
    type Context = ();

    fn batch_gradients(&self, _: &(), triples: &[Triple], cfg: &TrainConfig) -> (f64, Self) {
        // rows [0, n) are positives, [n, 2n) negatives
        let n = triples.len();
        let users: Vec<usize> = triples.iter().chain(triples).map(|t| t.user).collect();
        let items: Vec<usize> = triples
            .iter()
            .map(|t| t.pos)
            .chain(triples.iter().map(|t| t.neg))
            .collect();
        let f = self.forward(&users, &items);
        let denom = n.max(1) as f64;
        let mut dscore = Array1::zeros(2 * n);
        let mut sum = 0.0;
        for k in 0..n {
            let delta = f.scores[k] - f.scores[n + k];
            sum += log_sigmoid(delta);
            let g = -sigmoid(-delta) / denom;
            dscore[k] = g;
            dscore[n + k] = -g;
        }
        let mut grad = zeros_like(self);
        self.backward(&f, &users, &items, &dscore, &mut grad);
        axpy(&mut grad, 2.0 * cfg.weight_decay, self);
        (sum / denom - cfg.weight_decay * sum_squares(self), grad)
    }
}

pub fn train_neucf(
    train: &InteractionDataset,
    cfg: &NeuCfConfig,
) -> Result<(NeuCfModel, TrainTrace, Adam)> {
    let model = NeuCfModel::new(train.n_users(), train.n_posts(), cfg, cfg.train.seed)?;
    train_pairwise(model, &(), train, &cfg.train, "neucf")
}
