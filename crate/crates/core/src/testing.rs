//! Small planted instances shared by unit tests and the acceptance suite.

use ndarray::Array2;
use rand::Rng;

use crate::baselines::{
    half_step, BivaeConfig, BivaeModel, LatentFactorModel, NeuCfConfig, NeuCfModel, PcdConfig,
    PcdModel,
};
use crate::bpr::{PairwiseModel, TrainConfig, Triple};
use crate::dataset::{Interaction, InteractionDataset, PostRecord, UserRecord, PERS_DIM};
use crate::eval::auc;
use crate::gradcheck;
use crate::nn::ParamSet;
use crate::persic::{
    gradients, Dropout, DropoutMasks, FeatureAblationSpec, PersicConfig, PersicInputs, PersicModel,
};
use crate::recommender::{rank_posts, Scorer};
use crate::rng::stream_rng;

fn user(id: usize) -> UserRecord {
    UserRecord {
        user_id: format!("u{id}"),
        timeline_texts: vec![format!("timeline of user {id}")],
        timeline_concepts: vec![vec![0.5, 0.5]],
        liked_texts: vec![],
        liked_concepts: vec![],
        pers: vec![0.0; PERS_DIM],
        mbti: None,
    }
}

fn post(id: usize) -> PostRecord {
    PostRecord {
        post_id: format!("p{id}"),
        brand_id: "b0".into(),
        text: format!("post number {id}"),
        concepts: vec![0.5, 0.5],
    }
}

/// Bare dataset from index pairs.
pub fn dataset_from_pairs(
    n_users: usize,
    n_posts: usize,
    pairs: &[(usize, usize)],
) -> InteractionDataset {
    let interactions = pairs
        .iter()
        .map(|&(user, post)| Interaction { user, post })
        .collect();
    InteractionDataset::new(
        (0..n_users).map(user).collect(),
        (0..n_posts).map(post).collect(),
        interactions,
    )
    .expect("valid toy dataset")
}

/// Two users with disjoint tastes over four posts: user 0 likes posts 0 and
/// 1, user 1 likes posts 2 and 3. Features identify the user and the
/// post's group.
pub fn separable_toy() -> (InteractionDataset, PersicInputs) {
    let ds = dataset_from_pairs(2, 4, &[(0, 0), (0, 1), (1, 2), (1, 3)]);
    let user_x = ndarray::array![[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]];
    let post_x = ndarray::array![
        [1.0, 0.0, 0.2],
        [0.9, 0.1, 0.3],
        [0.0, 1.0, 0.2],
        [0.1, 0.9, 0.3]
    ];
    let inputs = PersicInputs {
        ablation: FeatureAblationSpec::PostsLikes,
        user_x,
        user_pers: Array2::zeros((2, PERS_DIM)),
        post_x,
    };
    (ds, inputs)
}

/// Mean per-user AUC over the training positives against every other post.
pub fn training_auc(scorer: &dyn Scorer, ds: &InteractionDataset) -> f64 {
    let pos = ds.user_positives();
    let aucs: Vec<f64> = (0..ds.n_users())
        .filter_map(|u| {
            let s = scorer.score_user(u).unwrap();
            let scored: Vec<(f64, bool)> = (0..ds.n_posts())
                .map(|p| (s[p], pos[u].contains(&p)))
                .collect();
            auc(&scored)
        })
        .collect();
    aucs.iter().sum::<f64>() / aucs.len() as f64
}

/// Preferences a_u·b_i; each user likes the half of the catalogue they
/// prefer, so item popularity carries no signal.
pub fn rank_one_dataset() -> InteractionDataset {
    let mut rng = stream_rng(11, "rank-one");
    let (n, m, k) = (60, 40, 20);
    let a: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let mut pairs = Vec::new();
    for (u, &au) in a.iter().enumerate() {
        let prefs: Vec<f64> = b.iter().map(|&bi| au * bi).collect();
        let all: Vec<usize> = (0..m).collect();
        for &p in rank_posts(&prefs, &all).iter().take(k) {
            pairs.push((u, p));
        }
    }
    dataset_from_pairs(n, m, &pairs)
}

/// Two blocks of users with their own block of items, plus noise.
pub fn block_matrix(seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, "block-matrix");
    Array2::from_shape_fn((50, 50), |(u, i)| {
        let p = if (u < 25) == (i < 25) { 0.4 } else { 0.03 };
        if rng.gen_bool(p) {
            1.0
        } else {
            0.0
        }
    })
}

/// Gaussian inputs; pers is filled only when the ablation uses it.
pub fn random_inputs(
    seed: u64,
    ablation: FeatureAblationSpec,
    n_users: usize,
    n_posts: usize,
    user_in: usize,
    post_in: usize,
) -> PersicInputs {
    let mut rng = stream_rng(seed, "toy-inputs");
    let user_in = if ablation.is_one_hot() { 0 } else { user_in };
    let mut normal = |r: usize, c: usize| crate::nn::normal_matrix(r, c, 1.0, &mut rng);
    let user_x = normal(n_users, user_in);
    let pers = normal(n_users, PERS_DIM);
    let post_x = normal(n_posts, post_in);
    PersicInputs {
        ablation,
        user_x,
        user_pers: if ablation.uses_pers() {
            pers
        } else {
            Array2::zeros((n_users, PERS_DIM))
        },
        post_x,
    }
}

/// Random triples with `pos != neg`.
pub fn random_triples(seed: u64, n_users: usize, n_posts: usize, n: usize) -> Vec<Triple> {
    let mut rng = stream_rng(seed, "toy-triples");
    (0..n)
        .map(|_| {
            let pos = rng.gen_range(0..n_posts);
            let mut neg = rng.gen_range(0..n_posts - 1);
            if neg >= pos {
                neg += 1;
            }
            Triple {
                user: rng.gen_range(0..n_users),
                pos,
                neg,
            }
        })
        .collect()
}

/// Moves every bias off zero so no pre-activation sits exactly on a kink.
pub fn jitter_biases<P: ParamSet>(model: &mut P, seed: u64) {
    let mut rng = stream_rng(seed, "bias");
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    for (t, name) in names.iter().enumerate() {
        if name.ends_with("bias") {
            model.tensors_mut()[t]
                .iter_mut()
                .for_each(|b| *b = rng.gen_range(-0.1..0.1));
        }
    }
}

/// Worst per-tensor relative error of a pairwise model's batch gradient.
fn check_pairwise<M: PairwiseModel>(
    model: &M,
    ctx: &M::Context,
    triples: &[Triple],
    cfg: &TrainConfig,
) -> f64 {
    let (_, g) = model.batch_gradients(ctx, triples, cfg);
    let checks = gradcheck::check(model, &g, 1e-5, |m| -m.batch_gradients(ctx, triples, cfg).0);
    gradcheck::worst(&checks)
}

const TOY_USERS: usize = 5;
const TOY_POSTS: usize = 7;

fn toy_train_config() -> TrainConfig {
    TrainConfig {
        weight_decay: 1e-3,
        ..TrainConfig::default()
    }
}

/// PersiC with dropout masks drawn once and held fixed; cycles through
/// ablations and adds a hidden layer on every fifth seed.
pub fn gradcheck_persic(seed: u64) -> f64 {
    let variants = [
        FeatureAblationSpec::PostsLikesPers,
        FeatureAblationSpec::OneHot,
        FeatureAblationSpec::Posts,
        FeatureAblationSpec::PostsPers,
    ];
    let ablation = variants[seed as usize % variants.len()];
    let hidden = if seed % 5 == 4 { vec![7] } else { vec![] };
    let inputs = random_inputs(seed, ablation, TOY_USERS, TOY_POSTS, 10, 16);
    let cfg = PersicConfig {
        latent_dim: PERS_DIM + 6,
        user_hidden: hidden.clone(),
        post_hidden: hidden,
    };
    let mut m = PersicModel::init(&cfg, &inputs, seed).expect("toy model");
    jitter_biases(&mut m, seed);
    let triples = random_triples(seed, TOY_USERS, TOY_POSTS, 12);
    let mut rng = stream_rng(seed, "dropout");
    let masks = DropoutMasks::for_batch(
        &m,
        &triples,
        &mut Dropout {
            rate: 0.3,
            rng: &mut rng,
        },
    );
    let lambda = 1e-3;
    let (_, g) = gradients(&m, &inputs, &triples, lambda, &masks);
    let checks = gradcheck::check(&m, &g, 1e-5, |p| {
        -gradients(p, &inputs, &triples, lambda, &masks).0
    });
    gradcheck::worst(&checks)
}

pub fn gradcheck_factorization(seed: u64, fm: bool) -> f64 {
    let mut m = LatentFactorModel::new(TOY_USERS, TOY_POSTS, 4, 0.5, fm, seed).expect("toy model");
    if fm {
        let mut rng = stream_rng(seed, "linear");
        m.w_item
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-0.5..0.5));
    }
    let triples = random_triples(seed, TOY_USERS, TOY_POSTS, 12);
    check_pairwise(&m, &(), &triples, &toy_train_config())
}

pub fn gradcheck_neucf(seed: u64) -> f64 {
    let cfg = NeuCfConfig {
        dim: 4,
        mlp_layers: vec![8, 6, 4],
        init_std: 0.5,
        ..NeuCfConfig::default()
    };
    let mut m = NeuCfModel::new(TOY_USERS, TOY_POSTS, &cfg, seed).expect("toy model");
    jitter_biases(&mut m, seed);
    let triples = random_triples(seed, TOY_USERS, TOY_POSTS, 12);
    check_pairwise(&m, &(), &triples, &toy_train_config())
}

pub fn gradcheck_pcd(seed: u64) -> f64 {
    let cfg = PcdConfig {
        n_assoc: 5,
        latent_dim: 6,
        hidden: 8,
        margin: 0.5,
        alpha: 0.05,
        beta: 0.01,
        ..PcdConfig::default()
    };
    let mut m = PcdModel::new(
        TOY_USERS,
        10,
        &PcdConfig {
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            ..cfg
        },
    )
    .expect("toy model");
    jitter_biases(&mut m, seed);
    let post_x = crate::nn::normal_matrix(TOY_POSTS, 10, 1.0, &mut stream_rng(seed, "posts"));
    let triples = random_triples(seed, TOY_USERS, TOY_POSTS, 12);
    check_pairwise(&m, &post_x, &triples, &TrainConfig::default())
}

/// One user-side half step with the reparameterization noise and the item
/// samples frozen.
pub fn gradcheck_bivae(seed: u64) -> f64 {
    let cfg = BivaeConfig {
        latent_dim: 4,
        hidden: 8,
        seed,
        ..BivaeConfig::default()
    };
    let mut rng = stream_rng(seed, "toy-matrix");
    let x = Array2::from_shape_fn((TOY_USERS, TOY_POSTS), |_| {
        if rng.gen_bool(0.4) {
            1.0
        } else {
            0.0
        }
    });
    let mut m = BivaeModel::new(TOY_USERS, TOY_POSTS, &cfg).expect("toy model");
    jitter_biases(&mut m.user_encoder, seed);
    let other = crate::nn::normal_matrix(TOY_POSTS, 4, 1.0, &mut rng);
    let eps = crate::nn::normal_matrix(TOY_USERS, 4, 1.0, &mut rng);
    let enc = &m.user_encoder;
    let (_, g) = half_step(enc, &x, &other, &eps);
    let cells = x.len() as f64;
    let checks = gradcheck::check(enc, &g, 1e-5, |e| {
        let (t, _) = half_step(e, &x, &other, &eps);
        -(t.log_likelihood - t.kl) / cells
    });
    gradcheck::worst(&checks)
}
