use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Dropout, PersicInputs, PersicModel, UserEncoder};
use crate::bpr::{BatchIndex, TrainConfig, TrainTrace, Triple, TripleSampler};
use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::{all_finite, axpy, log_sigmoid, norm, sigmoid, sum_squares, zeros_like, Adam};
use crate::rng::stream_rng;

/// Dropout multipliers for one batch, row-aligned with the batch's distinct
/// users and posts in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct DropoutMasks {
    user: Option<Vec<Array2<f64>>>,
    post: Option<Vec<Array2<f64>>>,
}

impl DropoutMasks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn for_batch(model: &PersicModel, triples: &[Triple], dropout: &mut Dropout<'_>) -> Self {
        if dropout.rate == 0.0 {
            return Self::none();
        }
        let idx = BatchIndex::new(triples);
        let user = match &model.user {
            UserEncoder::Tower { tower } => Some(tower.masks(idx.users.len(), dropout)),
            UserEncoder::Embedding { .. } => None,
        };
        let post = Some(model.post.masks(idx.posts.len(), dropout));
        DropoutMasks { user, post }
    }
}

/// Mean of ln σ(Δ).
pub fn bpr_mean_log_sigmoid(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    deltas.iter().map(|&d| log_sigmoid(d)).sum::<f64>() / deltas.len() as f64
}

/// Inference-mode maximization objective: mean ln σ(Δ) − λ‖Θ‖².
pub fn bpr_objective(
    model: &PersicModel,
    inputs: &PersicInputs,
    triples: &[Triple],
    weight_decay: f64,
) -> f64 {
    let idx = BatchIndex::new(triples);
    let (u, _) = model.user_latents(inputs, &idx.users, None);
    let (p, _) = model.post_latents(inputs, &idx.posts, None);
    let deltas: Vec<f64> = idx
        .rows
        .iter()
        .map(|&(ur, pr, nr)| u.row(ur).dot(&p.row(pr)) - u.row(ur).dot(&p.row(nr)))
        .collect();
    bpr_mean_log_sigmoid(&deltas) - weight_decay * sum_squares(model)
}

/// Maximization objective of one batch and the gradient of its negation
/// (the loss actually minimized), under fixed dropout masks.
pub fn gradients(
    model: &PersicModel,
    inputs: &PersicInputs,
    triples: &[Triple],
    weight_decay: f64,
    masks: &DropoutMasks,
) -> (f64, PersicModel) {
    let idx = BatchIndex::new(triples);
    let (u, ucache) = model.user_latents(inputs, &idx.users, masks.user.as_deref());
    let (p, pcache) = model.post_latents(inputs, &idx.posts, masks.post.as_deref());
    let mut du = Array2::zeros(u.raw_dim());
    let mut dp = Array2::zeros(p.raw_dim());
    let n = triples.len().max(1) as f64;
    let mut sum = 0.0;
    for &(ur, pr, nr) in &idx.rows {
        let urow = u.row(ur);
        let delta = urow.dot(&p.row(pr)) - urow.dot(&p.row(nr));
        sum += log_sigmoid(delta);
        // d(−ln σ(Δ))/dΔ = −σ(−Δ)
        let g = -sigmoid(-delta) / n;
        {
            let mut d = du.row_mut(ur);
            d.scaled_add(g, &p.row(pr));
            d.scaled_add(-g, &p.row(nr));
        }
        dp.row_mut(pr).scaled_add(g, &urow);
        dp.row_mut(nr).scaled_add(-g, &urow);
    }

    let mut grad = zeros_like(model);
    match (&model.user, &mut grad.user) {
        (UserEncoder::Tower { tower }, UserEncoder::Tower { tower: gt }) => {
            let width = tower.output_dim();
            let cache = ucache.expect("tower forward leaves a cache");
            tower.backward(&cache, du.slice(s![.., ..width]).to_owned(), gt);
        }
        (UserEncoder::Embedding { .. }, UserEncoder::Embedding { table }) => {
            for (r, &user) in idx.users.iter().enumerate() {
                let mut row = table.row_mut(user);
                row += &du.row(r);
            }
        }
        _ => unreachable!("gradient mirrors the model"),
    }
    model.post.backward(&pcache, dp, &mut grad.post);

    axpy(&mut grad, 2.0 * weight_decay, model);
    let objective = sum / n - weight_decay * sum_squares(model);
    (objective, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: PersicModel,
    pub trace: TrainTrace,
    pub optimizer: Adam,
}

/// Mini-batch BPR training with Adam. Sampling and dropout draw from the
/// `sampling` and `dropout` streams of `cfg.seed`.
pub fn train(
    model: PersicModel,
    inputs: &PersicInputs,
    train: &InteractionDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.check_inputs(inputs)?;
    if inputs.n_users() != train.n_users() || inputs.n_posts() != train.n_posts() {
        return Err(Error::Dimension(format!(
            "inputs cover {}×{} users×posts, dataset has {}×{}",
            inputs.n_users(),
            inputs.n_posts(),
            train.n_users(),
            train.n_posts()
        )));
    }
    let sampler = TripleSampler::new(train, cfg.batch_size, cfg.negatives)?;
    let mut sampling = stream_rng(cfg.seed, "sampling");
    let mut drop_rng = stream_rng(cfg.seed, "dropout");
    let mut model = model;
    let mut optimizer = Adam::new(cfg.learning_rate);
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        let batches = sampler.epoch(&mut sampling)?;
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let masks = DropoutMasks::for_batch(
                &model,
                batch,
                &mut Dropout {
                    rate: cfg.dropout,
                    rng: &mut drop_rng,
                },
            );
            let (objective, grad) = gradients(&model, inputs, batch, cfg.weight_decay, &masks);
            if !objective.is_finite() || !all_finite(&grad) {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    param_norm: norm(&model),
                });
            }
            optimizer.update(&mut model, &grad);
            total += objective;
        }
        let mean = total / batches.len().max(1) as f64;
        log::debug!(
            "persic[{}] epoch {}: objective {mean:.6}",
            model.ablation,
            epoch + 1
        );
        trace.epoch_objective.push(mean);
    }
    Ok(TrainOutcome {
        model,
        trace,
        optimizer,
    })
}
