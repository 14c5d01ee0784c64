use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ablation::FeatureAblationSpec;
use crate::dataset::PERS_DIM;
use crate::error::{Error, Result};
use crate::features::{FeatureSet, PostFeatureBundle, UserFeatureBundle};
use crate::nn::{flat, flat_mut, Dense, ParamSet};
use crate::recommender::{check_index, Scorer};
use crate::rng::{stream_rng, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersicConfig {
    /// Shared latent size D_p; the user tower emits D_p − 12.
    pub latent_dim: usize,
    /// Hidden widths before the last layer of ψ (empty = single layer).
    pub user_hidden: Vec<usize>,
    /// Hidden widths before the last layer of γ.
    pub post_hidden: Vec<usize>,
}

impl Default for PersicConfig {
    fn default() -> Self {
        PersicConfig {
            latent_dim: 512,
            user_hidden: Vec::new(),
            post_hidden: Vec::new(),
        }
    }
}

impl PersicConfig {
    pub fn user_tower_dim(&self) -> usize {
        self.latent_dim - PERS_DIM
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim <= PERS_DIM {
            return Err(Error::Config(format!(
                "latent_dim must exceed {PERS_DIM}, got {}",
                self.latent_dim
            )));
        }
        if self
            .user_hidden
            .iter()
            .chain(&self.post_hidden)
            .any(|&h| h == 0)
        {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Dense inputs for one ablation, one row per user or post.
#[derive(Clone, Debug, PartialEq)]
pub struct PersicInputs {
    pub ablation: FeatureAblationSpec,
    /// Tower input; zero columns for `OneHot`.
    pub user_x: Array2<f64>,
    /// Personality block; all zeros when the ablation leaves it out.
    pub user_pers: Array2<f64>,
    pub post_x: Array2<f64>,
}

impl PersicInputs {
    pub fn build(features: &FeatureSet, ablation: FeatureAblationSpec) -> Result<Self> {
        let user_rows: Vec<Vec<f64>> = features
            .users
            .iter()
            .map(|b| ablation.user_row(b))
            .collect();
        let post_rows: Vec<Vec<f64>> = features
            .posts
            .iter()
            .map(PostFeatureBundle::concat)
            .collect();
        let user_x = stack("user", &user_rows)?;
        let post_x = stack("post", &post_rows)?;
        let mut user_pers = Array2::zeros((features.users.len(), PERS_DIM));
        if ablation.uses_pers() {
            for (i, b) in features.users.iter().enumerate() {
                if b.pers.len() != PERS_DIM {
                    return Err(Error::Dimension(format!(
                        "user {i} has pers of length {}, expected {PERS_DIM}",
                        b.pers.len()
                    )));
                }
                user_pers
                    .row_mut(i)
                    .assign(&ndarray::ArrayView1::from(&b.pers[..]));
            }
        }
        Ok(PersicInputs {
            ablation,
            user_x,
            user_pers,
            post_x,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_x.nrows()
    }

    pub fn n_posts(&self) -> usize {
        self.post_x.nrows()
    }
}

fn stack(kind: &str, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Dimension(format!(
            "{kind} {i} has {} input features, expected {width}",
            r.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), width), flat).expect("rows have equal width"))
}

/// Inverted dropout applied to tower outputs in training mode.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut StreamRng,
}

impl Dropout<'_> {
    pub(crate) fn mask(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        let keep = 1.0 - self.rate;
        let rng = &mut *self.rng;
        Array2::from_shape_fn((rows, cols), |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
    }
}

/// Stack of affine + ReLU layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub layers: Vec<Dense>,
}

pub(crate) struct TowerCache {
    inputs: Vec<Array2<f64>>,
    /// ReLU derivative times dropout multiplier, per layer.
    gates: Vec<Array2<f64>>,
}

impl Tower {
    pub fn new<R: Rng>(input: usize, hidden: &[usize], output: usize, rng: &mut R) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        Tower {
            layers: widths
                .windows(2)
                .map(|w| Dense::uniform_fan_in(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("tower has a layer").fan_out()
    }

    /// `masks`, when given, holds one multiplier matrix per layer.
    pub(crate) fn forward(
        &self,
        x: Array2<f64>,
        masks: Option<&[Array2<f64>]>,
    ) -> (Array2<f64>, TowerCache) {
        let mut cache = TowerCache {
            inputs: Vec::with_capacity(self.layers.len()),
            gates: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            let mut gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(m) = masks {
                gate *= &m[l];
            }
            let out = &z * &gate;
            cache.inputs.push(h);
            cache.gates.push(gate);
            h = out;
        }
        (h, cache)
    }

    /// Accumulates parameter gradients; the input gradient is not needed.
    pub(crate) fn backward(&self, cache: &TowerCache, grad_out: Array2<f64>, grad: &mut Tower) {
        let mut g = grad_out;
        for l in (0..self.layers.len()).rev() {
            let dz = &g * &cache.gates[l];
            if l == 0 {
                self.layers[l].backward_params(&cache.inputs[l], &dz, &mut grad.layers[l]);
            } else {
                g = self.layers[l].backward(&cache.inputs[l], &dz, &mut grad.layers[l]);
            }
        }
    }

    pub(crate) fn masks(&self, rows: usize, dropout: &mut Dropout<'_>) -> Vec<Array2<f64>> {
        self.layers
            .iter()
            .map(|l| dropout.mask(rows, l.fan_out()))
            .collect()
    }

    fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [f64])>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.push_tensors(&format!("{prefix}.{i}"), out);
        }
    }

    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for l in &mut self.layers {
            l.push_tensors_mut(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UserEncoder {
    /// ψ over the ablation's feature parts, then pers appended.
    Tower { tower: Tower },
    /// Learned per-user vectors of size D_p.
    Embedding { table: Array2<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersicModel {
    pub ablation: FeatureAblationSpec,
    pub config: PersicConfig,
    pub user: UserEncoder,
    pub post: Tower,
}

impl PersicModel {
    /// Fresh parameters drawn from the `init` stream of `seed`.
    pub fn init(config: &PersicConfig, inputs: &PersicInputs, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, "init");
        let d = config.latent_dim;
        let user = if inputs.ablation.is_one_hot() {
            let bound = (3.0 / d as f64).sqrt();
            UserEncoder::Embedding {
                table: Array2::from_shape_fn((inputs.n_users(), d), |_| {
                    rng.gen_range(-bound..bound)
                }),
            }
        } else {
            if inputs.user_x.ncols() == 0 {
                return Err(Error::Dimension("user tower has no input features".into()));
            }
            UserEncoder::Tower {
                tower: Tower::new(
                    inputs.user_x.ncols(),
                    &config.user_hidden,
                    config.user_tower_dim(),
                    &mut rng,
                ),
            }
        };
        if inputs.post_x.ncols() == 0 {
            return Err(Error::Dimension("post tower has no input features".into()));
        }
        let post = Tower::new(inputs.post_x.ncols(), &config.post_hidden, d, &mut rng);
        Ok(PersicModel {
            ablation: inputs.ablation,
            config: config.clone(),
            user,
            post,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Checks that `inputs` fit this model's layout.
    pub fn check_inputs(&self, inputs: &PersicInputs) -> Result<()> {
        if inputs.ablation != self.ablation {
            return Err(Error::Dimension(format!(
                "inputs built for ablation {}, model uses {}",
                inputs.ablation, self.ablation
            )));
        }
        match &self.user {
            UserEncoder::Tower { tower } if tower.input_dim() != inputs.user_x.ncols() => {
                return Err(Error::Dimension(format!(
                    "user tower expects {} inputs, got {}",
                    tower.input_dim(),
                    inputs.user_x.ncols()
                )))
            }
            UserEncoder::Embedding { table } if table.nrows() != inputs.n_users() => {
                return Err(Error::Dimension(format!(
                    "embedding table has {} users, inputs have {}",
                    table.nrows(),
                    inputs.n_users()
                )))
            }
            _ => {}
        }
        if self.post.input_dim() != inputs.post_x.ncols() {
            return Err(Error::Dimension(format!(
                "post tower expects {} inputs, got {}",
                self.post.input_dim(),
                inputs.post_x.ncols()
            )));
        }
        Ok(())
    }

    /// User latent u. `user` indexes the embedding table for `OneHot`
    /// and is otherwise ignored.
    pub fn encode_user(
        &self,
        user: usize,
        bundle: &UserFeatureBundle,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Vec<f64>> {
        match &self.user {
            UserEncoder::Embedding { table } => {
                check_index("user", user, table.nrows())?;
                Ok(table.row(user).to_vec())
            }
            UserEncoder::Tower { tower } => {
                let row = self.ablation.user_row(bundle);
                if row.len() != tower.input_dim() {
                    return Err(Error::Dimension(format!(
                        "user bundle gives {} inputs, tower expects {}",
                        row.len(),
                        tower.input_dim()
                    )));
                }
                let x = Array2::from_shape_vec((1, row.len()), row).expect("one row");
                let masks = dropout.map(|d| tower.masks(1, d));
                let (h, _) = tower.forward(x, masks.as_deref());
                let mut u = h.into_raw_vec_and_offset().0;
                if self.ablation.uses_pers() {
                    if bundle.pers.len() != PERS_DIM {
                        return Err(Error::Dimension(format!(
                            "pers has length {}, expected {PERS_DIM}",
                            bundle.pers.len()
                        )));
                    }
                    u.extend_from_slice(&bundle.pers);
                } else {
                    u.extend([0.0; PERS_DIM]);
                }
                Ok(u)
            }
        }
    }

    /// Post latent p.
    pub fn encode_post(
        &self,
        bundle: &PostFeatureBundle,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Vec<f64>> {
        let row = bundle.concat();
        if row.len() != self.post.input_dim() {
            return Err(Error::Dimension(format!(
                "post bundle gives {} inputs, tower expects {}",
                row.len(),
                self.post.input_dim()
            )));
        }
        let x = Array2::from_shape_vec((1, row.len()), row).expect("one row");
        let masks = dropout.map(|d| self.post.masks(1, d));
        let (h, _) = self.post.forward(x, masks.as_deref());
        Ok(h.into_raw_vec_and_offset().0)
    }

    /// Inference-mode dot product of the two latents.
    pub fn score(
        &self,
        user: usize,
        ub: &UserFeatureBundle,
        pb: &PostFeatureBundle,
    ) -> Result<f64> {
        let u = self.encode_user(user, ub, None)?;
        let p = self.encode_post(pb, None)?;
        Ok(u.iter().zip(&p).map(|(a, b)| a * b).sum())
    }

    /// Latents for the given user rows; returns the tower cache when a tower ran.
    pub(crate) fn user_latents(
        &self,
        inputs: &PersicInputs,
        users: &[usize],
        masks: Option<&[Array2<f64>]>,
    ) -> (Array2<f64>, Option<TowerCache>) {
        match &self.user {
            UserEncoder::Embedding { table } => (table.select(Axis(0), users), None),
            UserEncoder::Tower { tower } => {
                let x = inputs.user_x.select(Axis(0), users);
                let (h, cache) = tower.forward(x, masks);
                let du = h.ncols();
                let mut u = Array2::zeros((users.len(), du + PERS_DIM));
                u.slice_mut(s![.., ..du]).assign(&h);
                u.slice_mut(s![.., du..])
                    .assign(&inputs.user_pers.select(Axis(0), users));
                (u, Some(cache))
            }
        }
    }

    pub(crate) fn post_latents(
        &self,
        inputs: &PersicInputs,
        posts: &[usize],
        masks: Option<&[Array2<f64>]>,
    ) -> (Array2<f64>, TowerCache) {
        self.post
            .forward(inputs.post_x.select(Axis(0), posts), masks)
    }
}

impl ParamSet for PersicModel {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::new();
        match &self.user {
            UserEncoder::Tower { tower } => tower.push_tensors("psi", &mut v),
            UserEncoder::Embedding { table } => v.push(("user_embedding".into(), flat(table))),
        }
        self.post.push_tensors("gamma", &mut v);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        match &mut self.user {
            UserEncoder::Tower { tower } => tower.push_tensors_mut(&mut v),
            UserEncoder::Embedding { table } => v.push(flat_mut(table)),
        }
        self.post.push_tensors_mut(&mut v);
        v
    }
}

/// Precomputed inference latents for fast full-catalogue scoring.
#[derive(Clone, Debug)]
pub struct PersicScorer {
    users: Array2<f64>,
    posts: Array2<f64>,
}

impl PersicScorer {
    pub fn new(model: &PersicModel, inputs: &PersicInputs) -> Result<Self> {
        model.check_inputs(inputs)?;
        let all_users: Vec<usize> = (0..inputs.n_users()).collect();
        let all_posts: Vec<usize> = (0..inputs.n_posts()).collect();
        let (users, _) = model.user_latents(inputs, &all_users, None);
        let (posts, _) = model.post_latents(inputs, &all_posts, None);
        Ok(PersicScorer { users, posts })
    }

    pub fn user_latents(&self) -> &Array2<f64> {
        &self.users
    }

    pub fn post_latents(&self) -> &Array2<f64> {
        &self.posts
    }
}

impl Scorer for PersicScorer {
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
