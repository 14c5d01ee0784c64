//! Implicit-feedback interaction data: users, posts, and who liked what.

mod io;
mod mbti;
mod split;
mod stats;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_concept_names, load_dataset, load_dataset_with_report, save_dataset, LoadReport,
    CONCEPTS_FILE, INTERACTIONS_FILE, POSTS_FILE, USERS_FILE,
};
pub use mbti::{Mbti, TraitPair, TraitPole};
pub use split::{split_dataset, SplitSpec};
pub use stats::{dataset_stats, sparsity, StatsReport};

/// Width of the personality feature vector (three activations per trait pair).
pub const PERS_DIM: usize = 12;

/// Users with fewer interactions than this are dropped at load time.
pub const MIN_USER_INTERACTIONS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    #[serde(default)]
    pub timeline_texts: Vec<String>,
    #[serde(default)]
    pub timeline_concepts: Vec<Vec<f64>>,
    #[serde(default)]
    pub liked_texts: Vec<String>,
    #[serde(default)]
    pub liked_concepts: Vec<Vec<f64>>,
    pub pers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mbti: Option<Mbti>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    #[serde(default)]
    pub brand_id: String,
    #[serde(default)]
    pub text: String,
    pub concepts: Vec<f64>,
}

/// A positive (user, post) pair in dense index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub post: usize,
}

/// Users, posts and their implicit-feedback pairs.
///
/// Records are shared behind `Arc`, so the train and test halves of a split
/// reference the same user and post tables and agree on every index.
/// Interactions are kept sorted by `(user, post)` and deduplicated.
#[derive(Clone, Debug)]
pub struct InteractionDataset {
    users: Arc<[UserRecord]>,
    posts: Arc<[PostRecord]>,
    user_index: Arc<HashMap<String, usize>>,
    post_index: Arc<HashMap<String, usize>>,
    interactions: Vec<Interaction>,
    concept_dim: usize,
}

impl InteractionDataset {
    /// Validates records and builds the dataset. Duplicate pairs are merged.
    ///
    /// The minimum-interaction filter is not applied here; see
    /// [`InteractionDataset::filter_min_interactions`].
    pub fn new(
        users: Vec<UserRecord>,
        posts: Vec<PostRecord>,
        interactions: Vec<Interaction>,
    ) -> Result<Self> {
        let concept_dim = infer_concept_dim(&users, &posts);
        let user_index = index_ids(users.iter().map(|u| u.user_id.as_str()), "user")?;
        let post_index = index_ids(posts.iter().map(|p| p.post_id.as_str()), "post")?;
        for u in &users {
            validate_user(u, concept_dim)?;
        }
        for p in &posts {
            validate_post(p, concept_dim)?;
        }
        for it in &interactions {
            if it.user >= users.len() || it.post >= posts.len() {
                return Err(Error::InvalidDataset(format!(
                    "interaction ({}, {}) out of range for {} users / {} posts",
                    it.user,
                    it.post,
                    users.len(),
                    posts.len()
                )));
            }
        }
        Ok(InteractionDataset {
            users: users.into(),
            posts: posts.into(),
            user_index: Arc::new(user_index),
            post_index: Arc::new(post_index),
            interactions: normalize(interactions),
            concept_dim,
        })
    }

    /// Same users and posts, different interaction set.
    pub fn with_interactions(&self, interactions: Vec<Interaction>) -> Result<Self> {
        if let Some(it) = interactions
            .iter()
            .find(|it| it.user >= self.users.len() || it.post >= self.posts.len())
        {
            return Err(Error::InvalidDataset(format!(
                "interaction ({}, {}) out of range",
                it.user, it.post
            )));
        }
        Ok(InteractionDataset {
            interactions: normalize(interactions),
            ..self.clone()
        })
    }

    /// Drops users with fewer than `min` interactions (and their pairs).
    /// Returns the filtered dataset and the number of users removed.
    pub fn filter_min_interactions(&self, min: usize) -> Result<(Self, usize)> {
        let counts = self.user_counts();
        let keep: Vec<usize> = (0..self.n_users()).filter(|&u| counts[u] >= min).collect();
        let dropped = self.n_users() - keep.len();
        if dropped == 0 {
            return Ok((self.clone(), 0));
        }
        let mut remap = vec![usize::MAX; self.n_users()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let users: Vec<UserRecord> = keep.iter().map(|&u| self.users[u].clone()).collect();
        let interactions = self
            .interactions
            .iter()
            .filter(|it| remap[it.user] != usize::MAX)
            .map(|it| Interaction {
                user: remap[it.user],
                post: it.post,
            })
            .collect();
        let ds = InteractionDataset::new(users, self.posts.to_vec(), interactions)?;
        Ok((ds, dropped))
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn posts(&self) -> &[PostRecord] {
        &self.posts
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_posts(&self) -> usize {
        self.posts.len()
    }

    /// Length of every concept-distribution vector (0 when there are none).
    pub fn concept_dim(&self) -> usize {
        self.concept_dim
    }

    pub fn user_idx(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn post_idx(&self, id: &str) -> Option<usize> {
        self.post_index.get(id).copied()
    }

    pub fn user_ids(&self) -> Vec<String> {
        self.users.iter().map(|u| u.user_id.clone()).collect()
    }

    pub fn post_ids(&self) -> Vec<String> {
        self.posts.iter().map(|p| p.post_id.clone()).collect()
    }

    /// Number of interactions per user.
    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users()];
        for it in &self.interactions {
            counts[it.user] += 1;
        }
        counts
    }

    /// Sorted positive post indices for every user.
    pub fn user_positives(&self) -> Vec<Vec<usize>> {
        let mut pos = vec![Vec::new(); self.n_users()];
        for it in &self.interactions {
            pos[it.user].push(it.post);
        }
        pos
    }

    /// Whether both datasets share the same record tables.
    pub fn shares_records_with(&self, other: &InteractionDataset) -> bool {
        Arc::ptr_eq(&self.users, &other.users) && Arc::ptr_eq(&self.posts, &other.posts)
    }

    /// Order-insensitive equality on records and interactions (by id).
    pub fn same_contents(&self, other: &InteractionDataset) -> bool {
        let mut a_users: Vec<&UserRecord> = self.users.iter().collect();
        let mut b_users: Vec<&UserRecord> = other.users.iter().collect();
        a_users.sort_by(|x, y| x.user_id.cmp(&y.user_id));
        b_users.sort_by(|x, y| x.user_id.cmp(&y.user_id));
        let mut a_posts: Vec<&PostRecord> = self.posts.iter().collect();
        let mut b_posts: Vec<&PostRecord> = other.posts.iter().collect();
        a_posts.sort_by(|x, y| x.post_id.cmp(&y.post_id));
        b_posts.sort_by(|x, y| x.post_id.cmp(&y.post_id));
        a_users == b_users && a_posts == b_posts && self.id_pairs() == other.id_pairs()
    }

    fn id_pairs(&self) -> HashSet<(&str, &str)> {
        self.interactions
            .iter()
            .map(|it| {
                (
                    self.users[it.user].user_id.as_str(),
                    self.posts[it.post].post_id.as_str(),
                )
            })
            .collect()
    }
}

fn normalize(mut interactions: Vec<Interaction>) -> Vec<Interaction> {
    interactions.sort_unstable();
    interactions.dedup();
    interactions
}

fn infer_concept_dim(users: &[UserRecord], posts: &[PostRecord]) -> usize {
    posts
        .iter()
        .map(|p| p.concepts.len())
        .chain(
            users
                .iter()
                .flat_map(|u| u.timeline_concepts.iter().chain(&u.liked_concepts))
                .map(Vec::len),
        )
        .next()
        .unwrap_or(0)
}

fn index_ids<'a>(ids: impl Iterator<Item = &'a str>, kind: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(Error::InvalidDataset(format!("duplicate {kind} id `{id}`")));
        }
    }
    Ok(map)
}

pub(crate) fn check_concepts(v: &[f64], dim: usize, what: &str) -> std::result::Result<(), String> {
    if v.len() != dim {
        return Err(format!(
            "{what} has {} concept weights, expected {dim}",
            v.len()
        ));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("{what} has invalid concept weight {x}"));
    }
    Ok(())
}

pub(crate) fn validate_user_fields(
    u: &UserRecord,
    concept_dim: usize,
) -> std::result::Result<(), String> {
    if u.pers.len() != PERS_DIM {
        return Err(format!(
            "user `{}` has {} personality features, expected {PERS_DIM}",
            u.user_id,
            u.pers.len()
        ));
    }
    if u.pers.iter().any(|x| !x.is_finite()) {
        return Err(format!(
            "user `{}` has non-finite personality features",
            u.user_id
        ));
    }
    for c in u.timeline_concepts.iter().chain(&u.liked_concepts) {
        check_concepts(c, concept_dim, &format!("user `{}`", u.user_id))?;
    }
    Ok(())
}

fn validate_user(u: &UserRecord, concept_dim: usize) -> Result<()> {
    validate_user_fields(u, concept_dim).map_err(Error::InvalidDataset)
}

fn validate_post(p: &PostRecord, concept_dim: usize) -> Result<()> {
    check_concepts(&p.concepts, concept_dim, &format!("post `{}`", p.post_id))
        .map_err(Error::InvalidDataset)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn user(id: &str) -> UserRecord {
        UserRecord {
            user_id: id.to_string(),
            timeline_texts: vec![format!("hello from {id}")],
            timeline_concepts: vec![vec![0.5, 0.5]],
            liked_texts: vec!["liked text".into()],
            liked_concepts: vec![vec![1.0, 0.0]],
            pers: vec![0.1; PERS_DIM],
            mbti: Some("INTP".parse().unwrap()),
        }
    }

    pub fn post(id: &str) -> PostRecord {
        PostRecord {
            post_id: id.to_string(),
            brand_id: "brand".into(),
            text: format!("post {id}"),
            concepts: vec![0.25, 0.75],
        }
    }

    /// 3 users, 5 posts, 7 interactions; every user has at least two.
    pub fn small() -> InteractionDataset {
        let users = vec![user("u0"), user("u1"), user("u2")];
        let posts = (0..5).map(|i| post(&format!("p{i}"))).collect();
        let pairs = [(0, 0), (0, 1), (1, 1), (1, 2), (1, 3), (2, 3), (2, 4)];
        let interactions = pairs
            .iter()
            .map(|&(user, post)| Interaction { user, post })
            .collect();
        InteractionDataset::new(users, posts, interactions).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn duplicates_are_merged_and_sorted() {
        let ds = small();
        let mut pairs = ds.interactions().to_vec();
        pairs.push(pairs[0]);
        pairs.reverse();
        let again = ds.with_interactions(pairs).unwrap();
        assert_eq!(again.interactions(), ds.interactions());
    }

    #[test]
    fn rejects_bad_records() {
        let mut u = user("a");
        u.pers.pop();
        assert!(InteractionDataset::new(vec![u], vec![post("p")], vec![]).is_err());
        let mut p = post("p");
        p.concepts = vec![1.0, -0.1];
        assert!(InteractionDataset::new(vec![user("a")], vec![p], vec![]).is_err());
        let mut p = post("p");
        p.concepts = vec![1.0, 0.0, 0.0];
        assert!(InteractionDataset::new(vec![user("a")], vec![p], vec![]).is_err());
        assert!(InteractionDataset::new(vec![user("a"), user("a")], vec![], vec![]).is_err());
    }

    #[test]
    fn filter_drops_single_interaction_users() {
        let ds = small();
        let mut pairs = ds.interactions().to_vec();
        pairs.retain(|it| !(it.user == 2 && it.post == 4));
        let ds = ds.with_interactions(pairs).unwrap();
        let (filtered, dropped) = ds.filter_min_interactions(2).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(filtered.n_users(), 2);
        assert!(filtered.user_idx("u2").is_none());
        assert_eq!(filtered.interactions().len(), 5);
        let (again, dropped) = filtered.filter_min_interactions(2).unwrap();
        assert_eq!(dropped, 0);
        assert!(again.same_contents(&filtered));
    }
}
