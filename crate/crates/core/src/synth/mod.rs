//! Synthetic datasets with planted, personality-dependent preferences.
//!
//! Every post has a concept distribution and a topic mix. A user's utility
//! for a post blends a trait part, which rewards the concepts planted for
//! the user's four MBTI poles and penalizes those of the opposite poles,
//! with a taste part over topics. The blend
//! weight is `personality_effect`. Likes are Bernoulli draws from
//! `σ((s − τ_u) / T)` with a per-user threshold `τ_u` set to hit the target
//! density and a temperature `T` growing with the noise level (a hard top-k
//! at noise 0).
//!
//! Text follows the topic mix through a vocabulary partitioned per topic.
//! Timelines show the user's taste only, liked posts show the full
//! utility, and the personality vector is a noisy one-hot code of the
//! traits.

mod text;

use std::path::Path;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::{Dirichlet, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    save_dataset, Interaction, InteractionDataset, Mbti, PostRecord, TraitPole, UserRecord,
    CONCEPTS_FILE, PERS_DIM,
};
use crate::error::{Error, Result};
use crate::features::CategoryLexicon;
use crate::recommender::{check_index, Scorer};
use crate::rng::{stream_rng, StreamRng};

pub use text::{concept_names, word, Vocabulary};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const LEXICON_FILE: &str = "lexicon.json";

/// Number of planted concepts, one per trait pole.
pub const PLANTED_CONCEPTS: usize = 8;

const MAX_RESAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_posts: usize,
    /// Concept vocabulary; the first eight are planted, one per trait pole.
    pub n_concepts: usize,
    pub vocab_size: usize,
    /// Number of taste topics.
    pub latent_dim: usize,
    /// Share of the utility variance driven by MBTI traits, in [0, 1].
    pub personality_effect: f64,
    /// Expected fraction of (user, post) pairs that are likes.
    pub density: f64,
    /// 0 gives deterministic likes (top-k by utility); towards 1 likes
    /// become independent of utility.
    pub noise: f64,
    /// Gaussian noise on the personality vector.
    pub pers_noise: f64,
    pub timeline_posts: usize,
    pub liked_posts: usize,
    /// Fresh posts the external likes are picked from.
    pub liked_pool: usize,
    pub words_per_post: usize,
    pub n_brands: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 200,
            n_posts: 100,
            n_concepts: 24,
            vocab_size: 400,
            latent_dim: 8,
            personality_effect: 0.6,
            density: 0.05,
            noise: 0.3,
            pers_noise: 0.3,
            timeline_posts: 5,
            liked_posts: 3,
            liked_pool: 20,
            words_per_post: 16,
            n_brands: 10,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Expected likes per user.
    pub fn target_per_user(&self) -> f64 {
        self.density * self.n_posts as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_users == 0 || self.n_posts < 3 {
            return bad(format!(
                "need at least 1 user and 3 posts, got {} and {}",
                self.n_users, self.n_posts
            ));
        }
        if self.n_concepts < PLANTED_CONCEPTS {
            return bad(format!(
                "n_concepts must be at least {PLANTED_CONCEPTS}, got {}",
                self.n_concepts
            ));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if self.vocab_size < 2 * self.latent_dim || self.vocab_size > text::MAX_VOCAB {
            return bad(format!(
                "vocab_size must lie in [{}, {}], got {}",
                2 * self.latent_dim,
                text::MAX_VOCAB,
                self.vocab_size
            ));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return bad(format!("density must lie in (0, 1), got {}", self.density));
        }
        if !(0.0..=1.0).contains(&self.personality_effect) {
            return bad(format!(
                "personality_effect must lie in [0, 1], got {}",
                self.personality_effect
            ));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1), got {}", self.noise));
        }
        if !(self.pers_noise >= 0.0 && self.pers_noise.is_finite()) {
            return bad(format!("pers_noise must be ≥ 0, got {}", self.pers_noise));
        }
        if self.words_per_post == 0 || self.n_brands == 0 {
            return bad("words_per_post and n_brands must be at least 1".into());
        }
        if self.liked_posts > self.liked_pool {
            return bad(format!(
                "liked_posts ({}) exceeds liked_pool ({})",
                self.liked_posts, self.liked_pool
            ));
        }
        let k = self.target_per_user();
        if k < 2.0 || k > (self.n_posts - 1) as f64 {
            return bad(format!(
                "density {} gives {k:.2} expected likes per user over {} posts; every user \
                 needs at least 2 likes and 1 non-liked post",
                self.density, self.n_posts
            ));
        }
        Ok(())
    }

    /// Softmax temperature of the like probabilities.
    pub fn temperature(&self) -> f64 {
        self.noise / (1.0 - self.noise)
    }
}

/// Everything the generator knows that the dataset does not show.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub mbti: Vec<Mbti>,
    /// users × (concepts + topics); utility is `user_pref · post_attr`.
    pub user_pref: Array2<f64>,
    /// posts × (concepts + topics): concept distribution then topic mix.
    pub post_attr: Array2<f64>,
    /// Per-user thresholds τ_u.
    pub thresholds: Vec<f64>,
    /// users × posts; the probabilities the likes were drawn from.
    pub like_prob: Array2<f64>,
    /// Planted concept per pole, in pole order E I S N T F J P.
    pub planted: Vec<usize>,
}

impl GroundTruth {
    pub fn n_users(&self) -> usize {
        self.user_pref.nrows()
    }

    pub fn n_posts(&self) -> usize {
        self.post_attr.nrows()
    }

    /// users × posts utilities.
    pub fn utility(&self) -> Array2<f64> {
        self.user_pref.dot(&self.post_attr.t())
    }

    /// Mass of a user's four pole concepts minus that of the opposite poles,
    /// per post. This is the whole utility when the personality effect is 1.
    pub fn trait_scores(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n_users(), self.n_posts()), |(u, p)| {
            TraitPole::all()
                .into_iter()
                .map(|pole| {
                    let mass = self.post_attr[[p, self.planted[pole.index()]]];
                    if self.mbti[u].has(pole) {
                        mass
                    } else {
                        -mass
                    }
                })
                .sum()
        })
    }

    /// Scores by true utility, which orders each user's posts exactly as the
    /// like probabilities do and breaks their ties.
    pub fn oracle(&self) -> OracleScorer {
        OracleScorer {
            utility: self.utility(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::features::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::features::read_json(path.as_ref())
    }
}

/// A user's posts, most likely first.
pub fn oracle_rank(gt: &GroundTruth, user: usize) -> Result<Vec<usize>> {
    check_index("user", user, gt.n_users())?;
    let s = gt.user_pref.row(user).dot(&gt.post_attr.t());
    let all: Vec<usize> = (0..gt.n_posts()).collect();
    Ok(crate::recommender::rank_posts(
        s.as_slice().expect("fresh vector"),
        &all,
    ))
}

#[derive(Clone, Debug)]
pub struct OracleScorer {
    utility: Array2<f64>,
}

impl Scorer for OracleScorer {
    fn n_users(&self) -> usize {
        self.utility.nrows()
    }

    fn n_posts(&self) -> usize {
        self.utility.ncols()
    }

    fn score_unchecked(&self, user: usize, post: usize) -> f64 {
        self.utility[[user, post]]
    }
}

/// E[X | X ≥ 2] for X a sum of independent Bernoulli(p_i).
fn conditional_mean(p: &[f64]) -> f64 {
    let (mut q0, mut q1, mut sum) = (1.0, 0.0, 0.0);
    for &pi in p {
        q1 = q1 * (1.0 - pi) + q0 * pi;
        q0 *= 1.0 - pi;
        sum += pi;
    }
    let rest = 1.0 - q0 - q1;
    if rest <= 1e-300 {
        return 2.0;
    }
    (sum - q1) / rest
}

fn like_probs(s: &[f64], tau: f64, temp: f64) -> Vec<f64> {
    s.iter()
        .map(|&v| crate::nn::sigmoid((v - tau) / temp))
        .collect()
}

/// Threshold whose like probabilities give `target` likes per user once
/// rows with fewer than two likes are redrawn.
fn calibrate(s: &[f64], target: f64, temp: f64) -> f64 {
    let lo_s = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_s = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_s - 60.0 * temp, hi_s + 60.0 * temp);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if conditional_mean(&like_probs(s, mid, temp)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standardizes to zero mean and unit variance over all entries; returns
/// the scale used.
fn unit_scale(m: &Array2<f64>) -> f64 {
    let n = m.len() as f64;
    let mean = m.sum() / n;
    let var = m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / var.sqrt()
    } else {
        0.0
    }
}

fn dirichlet(alpha: f64, dim: usize, rng: &mut StreamRng) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    Dirichlet::new_with_size(alpha, dim)
        .expect("valid Dirichlet")
        .sample(rng)
}

/// Concept distributions and topic mixes share these concentrations.
const CONCEPT_ALPHA: f64 = 0.2;
const TOPIC_ALPHA: f64 = 0.3;
/// Sharpness of a user's topic preferences on their own timeline.
const TIMELINE_FOCUS: f64 = 1.5;

struct Item {
    concepts: Vec<f64>,
    topics: Vec<f64>,
}

fn draw_item(spec: &SynthSpec, rng: &mut StreamRng) -> Item {
    Item {
        concepts: dirichlet(CONCEPT_ALPHA, spec.n_concepts, rng),
        topics: dirichlet(TOPIC_ALPHA, spec.latent_dim, rng),
    }
}

impl Item {
    fn attr(&self) -> Vec<f64> {
        [self.concepts.as_slice(), &self.topics].concat()
    }
}

/// Draws a dataset and the ground truth behind it.
pub fn generate(spec: &SynthSpec) -> Result<(InteractionDataset, GroundTruth)> {
    spec.validate()?;
    let (nu, np, c, l) = (spec.n_users, spec.n_posts, spec.n_concepts, spec.latent_dim);
    let vocab = Vocabulary::new(spec.vocab_size, l);
    let seed = spec.seed;

    let mut rng = stream_rng(seed, "traits");
    let mbti: Vec<Mbti> = (0..nu)
        .map(|_| Mbti([rng.gen(), rng.gen(), rng.gen(), rng.gen()]))
        .collect();
    let planted: Vec<usize> = (0..PLANTED_CONCEPTS).collect();

    let mut rng = stream_rng(seed, "posts");
    let items: Vec<Item> = (0..np).map(|_| draw_item(spec, &mut rng)).collect();
    let post_attr =
        Array2::from_shape_vec((np, c + l), items.iter().flat_map(Item::attr).collect())
            .expect("rows of equal width");

    // trait part: +1 on the user's own pole concepts, −1 on the opposite ones
    let mut trait_pref = Array2::<f64>::zeros((nu, c));
    for (u, m) in mbti.iter().enumerate() {
        for pole in TraitPole::all() {
            trait_pref[[u, planted[pole.index()]]] = if m.has(pole) { 1.0 } else { -1.0 };
        }
    }
    let mut rng = stream_rng(seed, "taste");
    let taste: Array2<f64> = Array2::from_shape_fn((nu, l), |_| rng.sample(StandardNormal));

    let concepts = post_attr.slice(s![.., ..c]);
    let topics = post_attr.slice(s![.., c..]);
    let trait_w = spec.personality_effect.sqrt() * unit_scale(&trait_pref.dot(&concepts.t()));
    let taste_w = (1.0 - spec.personality_effect).sqrt() * unit_scale(&taste.dot(&topics.t()));
    let mut user_pref = Array2::<f64>::zeros((nu, c + l));
    user_pref
        .slice_mut(s![.., ..c])
        .assign(&(&trait_pref * trait_w));
    user_pref.slice_mut(s![.., c..]).assign(&(&taste * taste_w));
    let utility = user_pref.dot(&post_attr.t());

    let temp = spec.temperature();
    let target = spec.target_per_user();
    let k = target.round() as usize;
    let mut like_prob = Array2::<f64>::zeros((nu, np));
    let mut thresholds = Vec::with_capacity(nu);
    let mut interactions = Vec::new();
    let mut rng = stream_rng(seed, "likes");
    for u in 0..nu {
        let s = utility.row(u).to_vec();
        if temp == 0.0 {
            let all: Vec<usize> = (0..np).collect();
            let top = crate::recommender::rank_posts(&s, &all);
            for &p in &top[..k] {
                like_prob[[u, p]] = 1.0;
                interactions.push(Interaction { user: u, post: p });
            }
            thresholds.push(0.5 * (s[top[k - 1]] + s[top[k]]));
            continue;
        }
        let tau = calibrate(&s, target, temp);
        let probs = like_probs(&s, tau, temp);
        let mut row = Vec::new();
        for attempt in 0.. {
            row = (0..np).filter(|&p| rng.gen::<f64>() < probs[p]).collect();
            if row.len() >= 2 {
                break;
            }
            if attempt == MAX_RESAMPLES {
                return Err(Error::Config(format!(
                    "user {u} drew fewer than 2 likes in {MAX_RESAMPLES} attempts; raise density"
                )));
            }
        }
        interactions.extend(row.into_iter().map(|post| Interaction { user: u, post }));
        like_prob.row_mut(u).assign(&Array1::from(probs));
        thresholds.push(tau);
    }

    let mut rng = stream_rng(seed, "post-text");
    let posts: Vec<PostRecord> = items
        .iter()
        .enumerate()
        .map(|(p, it)| PostRecord {
            post_id: format!("p{p}"),
            brand_id: format!("b{}", p % spec.n_brands),
            text: vocab.document(&it.topics, spec.words_per_post, &mut rng),
            concepts: it.concepts.clone(),
        })
        .collect();

    let users = user_records(spec, &vocab, &mbti, &user_pref, temp)?;
    let ds = InteractionDataset::new(users, posts, interactions)?;
    let gt = GroundTruth {
        spec: spec.clone(),
        mbti,
        user_pref,
        post_attr,
        thresholds,
        like_prob,
        planted,
    };
    Ok((ds, gt))
}

fn user_records(
    spec: &SynthSpec,
    vocab: &Vocabulary,
    mbti: &[Mbti],
    user_pref: &Array2<f64>,
    temp: f64,
) -> Result<Vec<UserRecord>> {
    let c = spec.n_concepts;
    let mut timeline_rng = stream_rng(spec.seed, "timelines");
    let mut liked_rng = stream_rng(spec.seed, "external-likes");
    let mut pers_rng = stream_rng(spec.seed, "pers");
    let pers_noise = Normal::new(0.0, spec.pers_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut users = Vec::with_capacity(mbti.len());
    for (u, m) in mbti.iter().enumerate() {
        let pref = user_pref.row(u);
        let taste = pref.slice(s![c..]);
        // timelines follow the user's taste only
        let scale = taste.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let focus: Vec<f64> = taste
            .iter()
            .map(|v| (TIMELINE_FOCUS * v / scale * (taste.len() as f64).sqrt()).exp())
            .collect();
        let mut timeline_texts = Vec::with_capacity(spec.timeline_posts);
        let mut timeline_concepts = Vec::with_capacity(spec.timeline_posts);
        for _ in 0..spec.timeline_posts {
            timeline_texts.push(vocab.document(&focus, spec.words_per_post, &mut timeline_rng));
            timeline_concepts.push(dirichlet(CONCEPT_ALPHA, c, &mut timeline_rng));
        }

        // external likes: the best of a fresh pool under the full utility
        let pool: Vec<Item> = (0..spec.liked_pool)
            .map(|_| draw_item(spec, &mut liked_rng))
            .collect();
        let noisy: Vec<f64> = pool
            .iter()
            .map(|it| {
                let s = pref.dot(&Array1::from(it.attr()));
                let e: f64 = liked_rng.gen_range(1e-12..1.0);
                s + temp * (e / (1.0 - e)).ln()
            })
            .collect();
        let all: Vec<usize> = (0..pool.len()).collect();
        let picked = &crate::recommender::rank_posts(&noisy, &all)[..spec.liked_posts];
        let liked_texts = picked
            .iter()
            .map(|&i| vocab.document(&pool[i].topics, spec.words_per_post, &mut liked_rng))
            .collect();
        let liked_concepts = picked.iter().map(|&i| pool[i].concepts.clone()).collect();

        let mut pers = vec![0.0; PERS_DIM];
        for (k, pair) in crate::dataset::TraitPair::ALL.iter().enumerate() {
            let slot = usize::from(!m.pole(*pair).first);
            pers[3 * k + slot] = 1.0;
        }
        for v in &mut pers {
            *v += pers_noise.sample(&mut pers_rng);
        }

        users.push(UserRecord {
            user_id: format!("u{u}"),
            timeline_texts,
            timeline_concepts,
            liked_texts,
            liked_concepts,
            pers,
            mbti: Some(*m),
        });
    }
    Ok(users)
}

/// Writes the dataset bundle, `concepts.json`, `lexicon.json` (one category
/// per topic) and `ground_truth.json` into `dir`.
pub fn write_bundle(dir: &Path, ds: &InteractionDataset, gt: &GroundTruth) -> Result<()> {
    save_dataset(ds, dir)?;
    let names = concept_names(gt.spec.n_concepts);
    crate::features::write_json(&dir.join(CONCEPTS_FILE), &names)?;
    let lexicon: CategoryLexicon =
        Vocabulary::new(gt.spec.vocab_size, gt.spec.latent_dim).lexicon();
    crate::features::write_json(&dir.join(LEXICON_FILE), &lexicon)?;
    gt.save(dir.join(GROUND_TRUTH_FILE))
}

/// Posts ranked by a user's topic taste alone, ignoring traits.
pub fn taste_scores(gt: &GroundTruth) -> Array2<f64> {
    let c = gt.spec.n_concepts;
    gt.user_pref
        .slice(s![.., c..])
        .dot(&gt.post_attr.slice(s![.., c..]).t())
}
