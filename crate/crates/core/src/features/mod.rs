//! Text and visual-concept feature extraction for users and posts.

mod lexicon;
mod lsa;
mod tfidf;
mod tokenize;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{InteractionDataset, PostRecord, UserRecord};
use crate::error::{Error, Result};

pub use lexicon::{lexicon_features, CategoryLexicon};
pub use lsa::{LsaModel, SvdMethod, DEFAULT_LSA_DIM};
pub use tfidf::{SparseVec, TfidfConfig, TfidfModel};
pub use tokenize::Tokenizer;

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

/// Feature bundle of one user: text, visual and lexicon features of their
/// own timeline (`*_posts`) and of the posts they liked (`*_likes`), plus
/// the personality vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserFeatureBundle {
    pub text_posts: Vec<f64>,
    pub concepts_posts: Vec<f64>,
    pub text_likes: Vec<f64>,
    pub concepts_likes: Vec<f64>,
    pub lexicon_posts: Vec<f64>,
    pub lexicon_likes: Vec<f64>,
    pub pers: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostFeatureBundle {
    pub text: Vec<f64>,
    pub concepts: Vec<f64>,
}

impl PostFeatureBundle {
    pub fn concat(&self) -> Vec<f64> {
        [self.text.as_slice(), &self.concepts].concat()
    }
}

/// Elementwise mean of concept distributions; zeros for an empty list.
pub fn mean_concepts(vectors: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Dimension(format!(
                "concept vector of length {} among vectors of length {dim}",
                v.len()
            )));
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    if !vectors.is_empty() {
        let n = vectors.len() as f64;
        out.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

fn text_features<S: AsRef<str>>(
    docs: &[S],
    tfidf: &TfidfModel,
    lsa: &LsaModel,
) -> Result<Vec<f64>> {
    if tfidf.vocab_size() != lsa.vocab_size() {
        return Err(Error::Dimension(format!(
            "tf-idf vocabulary has {} terms but LSA expects {}",
            tfidf.vocab_size(),
            lsa.vocab_size()
        )));
    }
    let tokens = tfidf.tokenizer.tokenize_all(docs);
    Ok(lsa.transform(&tfidf.transform_tokens(&tokens)))
}

pub fn build_user_bundle(
    user: &UserRecord,
    tfidf: &TfidfModel,
    lsa: &LsaModel,
    lexicon: &CategoryLexicon,
    concept_dim: usize,
) -> Result<UserFeatureBundle> {
    let tok = &tfidf.tokenizer;
    Ok(UserFeatureBundle {
        text_posts: text_features(&user.timeline_texts, tfidf, lsa)?,
        concepts_posts: mean_concepts(&user.timeline_concepts, concept_dim)?,
        text_likes: text_features(&user.liked_texts, tfidf, lsa)?,
        concepts_likes: mean_concepts(&user.liked_concepts, concept_dim)?,
        lexicon_posts: lexicon_features(lexicon, tok, &user.timeline_texts),
        lexicon_likes: lexicon_features(lexicon, tok, &user.liked_texts),
        pers: user.pers.clone(),
    })
}

/// The post's concept vector passes through unchanged.
pub fn build_post_bundle(
    post: &PostRecord,
    tfidf: &TfidfModel,
    lsa: &LsaModel,
) -> Result<PostFeatureBundle> {
    Ok(PostFeatureBundle {
        text: text_features(&[post.text.as_str()], tfidf, lsa)?,
        concepts: post.concepts.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub lsa_dim: usize,
    pub tfidf: TfidfConfig,
    pub svd: SvdMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lsa_dim: DEFAULT_LSA_DIM,
            tfidf: TfidfConfig::default(),
            svd: SvdMethod::Auto,
        }
    }
}

/// Fitted text models plus the lexicon, shared by users and posts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub tfidf: TfidfModel,
    pub lsa: LsaModel,
    pub lexicon: CategoryLexicon,
    pub concept_dim: usize,
}

/// The documents the text space is fitted on: every post text, then each
/// user's concatenated timeline and concatenated liked posts.
pub fn fitting_corpus(ds: &InteractionDataset) -> Vec<String> {
    let mut docs: Vec<String> = ds.posts().iter().map(|p| p.text.clone()).collect();
    for u in ds.users() {
        docs.push(u.timeline_texts.join("\n"));
        docs.push(u.liked_texts.join("\n"));
    }
    docs
}

impl FeaturePipeline {
    pub fn fit(
        ds: &InteractionDataset,
        lexicon: CategoryLexicon,
        config: &PipelineConfig,
    ) -> Result<Self> {
        let corpus = fitting_corpus(ds);
        let tfidf = TfidfModel::fit(&corpus, &config.tfidf)?;
        let rows: Vec<SparseVec> = corpus.iter().map(|d| tfidf.transform(d)).collect();
        let lsa = LsaModel::fit(&rows, tfidf.vocab_size(), config.lsa_dim, config.svd)?;
        log::info!(
            "fitted text pipeline: {} documents, {} terms, {} latent dims",
            corpus.len(),
            tfidf.vocab_size(),
            lsa.dim()
        );
        Ok(FeaturePipeline {
            format_version: PIPELINE_FORMAT_VERSION,
            config: config.clone(),
            tfidf,
            lsa,
            lexicon,
            concept_dim: ds.concept_dim(),
        })
    }

    pub fn text_dim(&self) -> usize {
        self.lsa.dim()
    }

    pub fn user_bundle(&self, user: &UserRecord) -> Result<UserFeatureBundle> {
        build_user_bundle(
            user,
            &self.tfidf,
            &self.lsa,
            &self.lexicon,
            self.concept_dim,
        )
    }

    pub fn post_bundle(&self, post: &PostRecord) -> Result<PostFeatureBundle> {
        if post.concepts.len() != self.concept_dim {
            return Err(Error::Dimension(format!(
                "post `{}` has {} concepts, pipeline expects {}",
                post.post_id,
                post.concepts.len(),
                self.concept_dim
            )));
        }
        build_post_bundle(post, &self.tfidf, &self.lsa)
    }

    pub fn build(&self, ds: &InteractionDataset) -> Result<FeatureSet> {
        let users = ds
            .users()
            .iter()
            .map(|u| self.user_bundle(u))
            .collect::<Result<_>>()?;
        let posts = ds
            .posts()
            .iter()
            .map(|p| self.post_bundle(p))
            .collect::<Result<_>>()?;
        Ok(FeatureSet {
            pipeline_checksum: self.checksum(),
            user_ids: ds.user_ids(),
            post_ids: ds.post_ids(),
            users,
            posts,
        })
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("pipeline serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p: FeaturePipeline = read_json(path.as_ref())?;
        if p.format_version != PIPELINE_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "pipeline format version {} is not supported (expected {PIPELINE_FORMAT_VERSION})",
                p.format_version
            )));
        }
        Ok(p)
    }
}

/// Precomputed bundles for every user and post of a dataset, in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub pipeline_checksum: String,
    pub user_ids: Vec<String>,
    pub post_ids: Vec<String>,
    pub users: Vec<UserFeatureBundle>,
    pub posts: Vec<PostFeatureBundle>,
}

impl FeatureSet {
    /// Checks that bundles line up with the dataset's user and post order.
    pub fn check_aligned(&self, ds: &InteractionDataset) -> Result<()> {
        if self.user_ids != ds.user_ids() || self.post_ids != ds.post_ids() {
            return Err(Error::Dimension(
                "feature bundles were built for a different dataset (ids do not match)".into(),
            ));
        }
        Ok(())
    }

    pub fn text_dim(&self) -> usize {
        self.posts.first().map_or(0, |p| p.text.len())
    }

    pub fn concept_dim(&self) -> usize {
        self.posts.first().map_or(0, |p| p.concepts.len())
    }

    pub fn lexicon_dim(&self) -> usize {
        self.users.first().map_or(0, |u| u.lexicon_posts.len())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, value)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Interaction, PERS_DIM};

    fn user(id: &str, timeline: &[&str], liked: &[&str]) -> UserRecord {
        UserRecord {
            user_id: id.into(),
            timeline_texts: timeline.iter().map(|s| s.to_string()).collect(),
            timeline_concepts: timeline.iter().map(|_| vec![0.2, 0.8]).collect(),
            liked_texts: liked.iter().map(|s| s.to_string()).collect(),
            liked_concepts: liked.iter().map(|_| vec![0.6, 0.4]).collect(),
            pers: (0..PERS_DIM).map(|i| i as f64).collect(),
            mbti: None,
        }
    }

    fn post(id: &str, text: &str) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            brand_id: "b".into(),
            text: text.into(),
            concepts: vec![0.3, 0.7],
        }
    }

    fn toy() -> InteractionDataset {
        let users = vec![
            user(
                "u0",
                &["good coffee morning", "sunny beach day"],
                &["great pizza night"],
            ),
            user("u1", &[], &["sad rainy day", "coffee again"]),
        ];
        let posts = vec![
            post("p0", "fresh coffee beans"),
            post("p1", "beach party tonight"),
            post("p2", ""),
        ];
        let pairs = vec![
            Interaction { user: 0, post: 0 },
            Interaction { user: 0, post: 1 },
            Interaction { user: 1, post: 1 },
            Interaction { user: 1, post: 2 },
        ];
        InteractionDataset::new(users, posts, pairs).unwrap()
    }

    fn pipeline(ds: &InteractionDataset, k: usize) -> FeaturePipeline {
        let cfg = PipelineConfig {
            lsa_dim: k,
            ..Default::default()
        };
        FeaturePipeline::fit(ds, CategoryLexicon::demo(), &cfg).unwrap()
    }

    #[test]
    fn mean_concepts_examples() {
        assert_eq!(mean_concepts(&[vec![0.1, 0.9]], 2).unwrap(), vec![0.1, 0.9]);
        assert_eq!(
            mean_concepts(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(mean_concepts(&[], 3).unwrap(), vec![0.0; 3]);
        assert!(mean_concepts(&[vec![1.0], vec![1.0, 2.0]], 1).is_err());
    }

    #[test]
    fn empty_timeline_gives_zero_post_side() {
        let ds = toy();
        let p = pipeline(&ds, 3);
        let b = p.user_bundle(&ds.users()[1]).unwrap();
        assert!(b.text_posts.iter().all(|&x| x == 0.0));
        assert!(b.concepts_posts.iter().all(|&x| x == 0.0));
        assert!(b.lexicon_posts.iter().all(|&x| x == 0.0));
        assert!(b.text_likes.iter().any(|&x| x != 0.0));
        assert_eq!(b.concepts_likes, vec![0.6, 0.4]);
        assert_eq!(b.pers.len(), PERS_DIM);
    }

    #[test]
    fn identical_timeline_and_likes_give_symmetric_parts() {
        let ds = toy();
        let p = pipeline(&ds, 3);
        let mut u = user("x", &["good coffee", "beach"], &["good coffee", "beach"]);
        u.liked_concepts = u.timeline_concepts.clone();
        let b = p.user_bundle(&u).unwrap();
        assert_eq!(b.text_posts, b.text_likes);
        assert_eq!(b.concepts_posts, b.concepts_likes);
        assert_eq!(b.lexicon_posts, b.lexicon_likes);
    }

    #[test]
    fn user_bundle_composes_sub_features() {
        let ds = toy();
        let p = pipeline(&ds, 3);
        let u = &ds.users()[0];
        let b = p.user_bundle(u).unwrap();
        let joined = u.timeline_texts.join(" ");
        assert_eq!(b.text_posts, p.lsa.transform(&p.tfidf.transform(&joined)));
        assert_eq!(b.concepts_posts, vec![0.2, 0.8]);
        // "good" is one of 6 timeline tokens and belongs to posemo
        let posemo = p
            .lexicon
            .categories()
            .iter()
            .position(|c| c == "posemo")
            .unwrap();
        assert!((b.lexicon_posts[posemo] - 1.0 / 6.0).abs() < 1e-12);
        let leisure = p
            .lexicon
            .categories()
            .iter()
            .position(|c| c == "leisure")
            .unwrap();
        // coffee and beach
        assert!((b.lexicon_posts[leisure] - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn post_bundle_examples() {
        let ds = toy();
        let p = pipeline(&ds, 3);
        let empty = p.post_bundle(&ds.posts()[2]).unwrap();
        assert!(empty.text.iter().all(|&x| x == 0.0));
        assert_eq!(empty.concepts, ds.posts()[2].concepts);
        let b = p.post_bundle(&ds.posts()[0]).unwrap();
        let corpus = fitting_corpus(&ds);
        let row = p.tfidf.transform(&corpus[0]);
        assert_eq!(b.text, p.lsa.transform(&row));
        assert_eq!(b.text.len(), 3);
    }

    #[test]
    fn refit_is_deterministic_and_checksum_stable() {
        let ds = toy();
        let a = pipeline(&ds, 3);
        let b = pipeline(&ds, 3);
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.json");
        a.save(&path).unwrap();
        let back = FeaturePipeline::load(&path).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.checksum(), a.checksum());
    }

    #[test]
    fn feature_set_alignment() {
        let ds = toy();
        let set = pipeline(&ds, 2).build(&ds).unwrap();
        set.check_aligned(&ds).unwrap();
        assert_eq!(
            (set.text_dim(), set.concept_dim(), set.lexicon_dim()),
            (2, 2, 6)
        );
        let (filtered, _) = ds.filter_min_interactions(3).unwrap();
        assert!(set.check_aligned(&filtered).is_err());
    }
}
