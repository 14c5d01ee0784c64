use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;
use crate::bpr::{PairwiseModel, TrainConfig, Triple};
use crate::dataset::{split_dataset, SplitSpec};
use crate::eval::{evaluate_model, EvalOptions};
use crate::nn::{sigmoid, ParamSet};
use crate::recommender::{rank_posts, Scorer};
use crate::rng::stream_rng;
use crate::testing::{
    self, block_matrix, dataset_from_pairs, random_triples, rank_one_dataset, separable_toy,
    training_auc,
};

#[test]
fn mf_recovers_rank_one_preferences() {
    let ds = rank_one_dataset();
    let (train, test) = split_dataset(
        &ds,
        &SplitSpec {
            train_fraction: 0.75,
            seed: 3,
        },
    )
    .unwrap();
    let cfg = FactorizationConfig {
        dim: 1,
        ..FactorizationConfig::default()
    };
    let (model, _, _) = train_mf(&train, &cfg).unwrap();
    let m = evaluate_model(&model, &train, &test, &EvalOptions::default()).unwrap();
    assert!(m.auc > 0.95, "test AUC {}", m.auc);
}

#[test]
fn zero_dimension_is_rejected() {
    assert!(LatentFactorModel::new(3, 4, 0, 0.1, false, 0).is_err());
    let ds = dataset_from_pairs(2, 3, &[(0, 0), (0, 1), (1, 2), (1, 0)]);
    let cfg = FactorizationConfig {
        dim: 0,
        ..FactorizationConfig::default()
    };
    assert!(train_mf(&ds, &cfg).is_err());
    assert!(train_fm(&ds, &cfg).is_err());
}

#[test]
fn fm_without_linear_terms_scores_like_mf() {
    let mf = LatentFactorModel::new(4, 5, 3, 0.5, false, 7).unwrap();
    let fm = LatentFactorModel {
        fm: true,
        ..mf.clone()
    };
    for u in 0..4 {
        for p in 0..5 {
            assert_eq!(mf.score(u, p).unwrap(), fm.score(u, p).unwrap());
        }
    }
}

#[test]
fn zero_embeddings_score_the_global_bias() {
    let mut m = LatentFactorModel::new(3, 4, 2, 0.1, false, 0).unwrap();
    m.p.fill(0.0);
    m.q.fill(0.0);
    m.w0[0] = 0.7;
    for u in 0..3 {
        assert!(m.score_user(u).unwrap().iter().all(|&s| s == 0.7));
    }
}

#[test]
fn hand_set_two_dimensional_scores() {
    let mut m = LatentFactorModel::new(1, 2, 2, 0.1, false, 0).unwrap();
    m.p = array![[1.0, 2.0]];
    m.q = array![[3.0, -1.0], [0.5, 0.25]];
    m.w0[0] = 0.5;
    assert_eq!(m.score(0, 0).unwrap(), 1.5);
    assert_eq!(m.score(0, 1).unwrap(), 1.5);
    m.fm = true;
    m.w_user[0] = 0.25;
    m.w_item = array![-0.5, 1.0];
    assert_eq!(m.score(0, 0).unwrap(), 1.25);
    assert_eq!(m.score(0, 1).unwrap(), 2.75);
}

#[test]
fn unknown_indices_are_rejected() {
    let m = LatentFactorModel::new(3, 4, 2, 0.1, true, 0).unwrap();
    assert!(m.score(3, 0).is_err());
    assert!(m.score(0, 4).is_err());
    assert!(m.score_user(5).is_err());
}

#[test]
fn fm_bpr_leaves_global_and_user_bias_untouched() {
    let m = LatentFactorModel::new(5, 7, 3, 0.5, true, 1).unwrap();
    let triples = random_triples(1, 5, 7, 30);
    let (_, g) = m.batch_gradients(&(), &triples, &TrainConfig::default());
    assert_eq!(g.w0[0], 0.0);
    assert!(g.w_user.iter().all(|&x| x == 0.0));
    assert!(g.w_item.iter().any(|&x| x != 0.0));
}

#[test]
fn mf_keeps_linear_weights_at_zero() {
    let ds = dataset_from_pairs(3, 5, &[(0, 0), (0, 1), (1, 2), (1, 3), (2, 4), (2, 0)]);
    let cfg = FactorizationConfig {
        dim: 2,
        train: TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        },
        ..FactorizationConfig::default()
    };
    let (m, _, _) = train_mf(&ds, &cfg).unwrap();
    assert!(m.w_item.iter().chain(&m.w_user).all(|&x| x == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..20 {
        let checks = [
            ("mf", testing::gradcheck_factorization(seed, false)),
            ("fm", testing::gradcheck_factorization(seed, true)),
            ("neucf", testing::gradcheck_neucf(seed)),
            ("pcd", testing::gradcheck_pcd(seed)),
            ("bivae", testing::gradcheck_bivae(seed)),
        ];
        for (name, err) in checks {
            assert!(err < 1e-4, "{name} seed {seed}: relative error {err:.3e}");
        }
    }
}

#[test]
fn neucf_with_gmf_only_output_is_mf() {
    let cfg = NeuCfConfig {
        dim: 4,
        mlp_layers: vec![8, 4],
        ..NeuCfConfig::default()
    };
    let mut m = NeuCfModel::new(3, 5, &cfg, 2).unwrap();
    m.out_mlp.fill(0.0);
    m.out_gmf.fill(1.0);
    for u in 0..3 {
        let scores = m.score_user(u).unwrap();
        for p in 0..5 {
            let want = m.gmf_user.row(u).dot(&m.gmf_item.row(p));
            assert!((scores[p] - want).abs() < 1e-12);
            assert!((m.score(u, p).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn neucf_rejects_mismatched_tower() {
    let cfg = NeuCfConfig {
        dim: 4,
        mlp_layers: vec![6, 4],
        ..NeuCfConfig::default()
    };
    assert!(NeuCfModel::new(2, 2, &cfg, 0).is_err());
}

#[test]
fn neucf_separates_toy_instance() {
    let (ds, _) = separable_toy();
    let (m, _, _) = train_neucf(&ds, &NeuCfConfig::default()).unwrap();
    assert_eq!(training_auc(&m, &ds), 1.0);
}

#[test]
fn gaussian_kl_closed_form() {
    assert_eq!(kl_standard_normal(&[0.0], &[1.0]), 0.0);
    assert_eq!(kl_standard_normal(&[1.0], &[1.0]), 0.5);
    let want = 0.5 * (0.25 + 4.0 - 1.0 - 0.25f64.ln());
    assert!((kl_standard_normal(&[2.0], &[0.5]) - want).abs() < 1e-15);
    assert_eq!(kl_standard_normal(&[0.0, 1.0], &[1.0, 1.0]), 0.5);
}

#[test]
fn bivae_elbo_rises_over_training() {
    let runs: Vec<Vec<f64>> = (0..3)
        .map(|seed| {
            let cfg = BivaeConfig {
                seed,
                ..BivaeConfig::default()
            };
            train_bivae_matrix(&block_matrix(seed), &cfg)
                .unwrap()
                .1
                .epoch_elbo
        })
        .collect();
    let mean: Vec<f64> = (0..30)
        .map(|e| runs.iter().map(|r| r[e]).sum::<f64>() / 3.0)
        .collect();
    for e in 1..mean.len() {
        assert!(
            mean[e] >= mean[e - 1] - 1e-2,
            "epoch {e}: {} -> {}",
            mean[e - 1],
            mean[e]
        );
    }
    assert!(mean[29] > mean[0]);
}

#[test]
fn bivae_scores_are_probabilities() {
    let x = block_matrix(4);
    let cfg = BivaeConfig {
        epochs: 3,
        ..BivaeConfig::default()
    };
    let (m, _) = train_bivae_matrix(&x, &cfg).unwrap();
    for u in 0..50 {
        assert!(m.score_user(u).unwrap().iter().all(|&s| s > 0.0 && s < 1.0));
    }
    // means come from the training matrix
    let mu = m.user_encoder.means(&x);
    let want = sigmoid(
        mu.row(3)
            .dot(&m.item_encoder.means(&x.t().to_owned()).row(7)),
    );
    assert!((m.score(3, 7).unwrap() - want).abs() < 1e-12);
}

#[test]
fn bivae_rejects_non_binary_input() {
    let x = array![[1.0, 0.5], [0.0, 1.0]];
    assert!(train_bivae_matrix(&x, &BivaeConfig::default()).is_err());
}

#[test]
fn cosine_of_identical_vectors_is_one() {
    assert!((cosine_similarity(&[0.3, -2.0, 5.0], &[0.3, -2.0, 5.0]) - 1.0).abs() < 1e-12);
    assert!((cosine_similarity(&[1.0, 0.0], &[0.0, 4.0])).abs() < 1e-12);
}

fn pcd_toy(alpha: f64, margin: f64) -> (PcdModel, Array2<f64>) {
    let cfg = PcdConfig {
        n_assoc: 4,
        latent_dim: 5,
        hidden: 6,
        margin,
        alpha,
        beta: 0.0,
        ..PcdConfig::default()
    };
    let m = PcdModel::new(3, 4, &cfg).unwrap();
    let x = crate::nn::normal_matrix(6, 4, 1.0, &mut stream_rng(5, "posts"));
    (m, x)
}

#[test]
fn satisfied_margin_gives_no_hinge_gradient() {
    let (m, x) = pcd_toy(0.0, 0.1);
    let s = m.scorer(&x).unwrap();
    let mut triples = Vec::new();
    for u in 0..3 {
        for p in 0..6 {
            for n in 0..6 {
                if s.score(u, p).unwrap() >= s.score(u, n).unwrap() + 0.1 + 1e-9 {
                    triples.push(Triple {
                        user: u,
                        pos: p,
                        neg: n,
                    });
                }
            }
        }
    }
    assert!(!triples.is_empty());
    let (loss, g) = m.loss_and_gradient(&x, &triples);
    assert_eq!(loss, 0.0);
    assert!(g.tensors().iter().all(|(_, t)| t.iter().all(|&v| v == 0.0)));
}

#[test]
fn violated_margin_is_penalized() {
    let (m, x) = pcd_toy(0.0, 0.1);
    let s = m.scorer(&x).unwrap();
    let (u, p, n) = (0, 0, 1);
    let want = (s.score(u, n).unwrap() - s.score(u, p).unwrap() + 0.1).max(0.0);
    let (loss, _) = m.loss_and_gradient(
        &x,
        &[Triple {
            user: u,
            pos: p,
            neg: n,
        }],
    );
    assert!((loss - want).abs() < 1e-9);
}

#[test]
fn truncation_zeroes_sign_flips() {
    let (mut m, _) = pcd_toy(0.1, 0.1);
    let before = m.clone();
    m.weights[[0, 0]] = -before.weights[[0, 0]];
    m.weights[[1, 1]] = before.weights[[1, 1]] * 0.5;
    m.after_update(&before, &mut crate::nn::Adam::new(1e-3));
    assert_eq!(m.weights[[0, 0]], 0.0);
    // kept sign, rows back on the unit sphere
    assert!(m.weights[[1, 1]] * before.weights[[1, 1]] > 0.0);
    for r in m.weights.rows() {
        assert!((r.dot(&r) - 1.0).abs() < 1e-12);
    }
}

fn pcd_sparsity(alpha: f64) -> f64 {
    let ds = rank_one_dataset();
    let x = crate::nn::normal_matrix(ds.n_posts(), 8, 1.0, &mut stream_rng(2, "post-x"));
    let cfg = PcdConfig {
        alpha,
        ..PcdConfig::default()
    };
    let (m, _, _) = train_pcd(&ds, &x, &cfg).unwrap();
    m.weight_sparsity(1e-3)
}

#[test]
fn pcd_sparsity_grows_with_alpha() {
    let s: Vec<f64> = [0.0, 0.01, 0.1].iter().map(|&a| pcd_sparsity(a)).collect();
    assert!(s[0] <= s[1] && s[1] <= s[2], "{s:?}");
    assert!(s[2] > s[0], "{s:?}");
}

#[test]
fn pcd_scores_are_cosines() {
    let (m, x) = pcd_toy(0.0, 0.1);
    let s = m.scorer(&x).unwrap();
    let u = m.user_vectors(&[1]);
    let p = m.post_vectors(&x);
    let want = cosine_similarity(u.row(0).as_slice().unwrap(), p.row(2).to_vec().as_slice());
    assert!((s.score(1, 2).unwrap() - want).abs() < 1e-9);
    assert!(m.scorer(&Array2::zeros((6, 3))).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ranking_ignores_monotone_transforms(seed in 0u64..1000, shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let m = LatentFactorModel::new(3, 9, 2, 1.0, true, seed).unwrap();
        let all: Vec<usize> = (0..9).collect();
        for u in 0..3 {
            let s = m.score_user(u).unwrap();
            let t: Vec<f64> = s.iter().map(|v| (scale * v + shift).exp()).collect();
            prop_assert_eq!(rank_posts(&s, &all), rank_posts(&t, &all));
        }
    }

    #[test]
    fn bivae_sigma_stays_positive(seed in 0u64..1000) {
        let mut rng = stream_rng(seed, "enc");
        let enc = GaussianEncoder::new(6, 4, 3, 1e-4, &mut rng);
        let x = crate::nn::normal_matrix(5, 6, 30.0, &mut rng);
        let e = enc.encode(&x);
        prop_assert!(e.sigma.iter().all(|&s| s >= 1e-4));
    }
}
