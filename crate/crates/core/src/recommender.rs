//! The scoring interface shared by PersiC and every baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trained model that scores known (user, post) index pairs.
pub trait Scorer: Sync {
    fn n_users(&self) -> usize;
    fn n_posts(&self) -> usize;

    /// Score without index checks; callers guarantee both are in range.
    fn score_unchecked(&self, user: usize, post: usize) -> f64;

    fn score(&self, user: usize, post: usize) -> Result<f64> {
        check_index("user", user, self.n_users())?;
        check_index("post", post, self.n_posts())?;
        Ok(self.score_unchecked(user, post))
    }

    /// Scores of every post for one user, in post-index order.
    fn score_user(&self, user: usize) -> Result<Vec<f64>> {
        check_index("user", user, self.n_users())?;
        Ok((0..self.n_posts())
            .map(|p| self.score_unchecked(user, p))
            .collect())
    }
}

pub(crate) fn check_index(kind: &'static str, index: usize, known: usize) -> Result<()> {
    if index >= known {
        return Err(Error::UnknownIndex { kind, index, known });
    }
    Ok(())
}

/// Orders candidate posts by descending score; ties go to the lower index.
pub fn rank_posts(scores: &[f64], candidates: &[usize]) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Model names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mf,
    Fm,
    Neucf,
    Bivae,
    Pcd,
    Persic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mf,
        ModelKind::Fm,
        ModelKind::Neucf,
        ModelKind::Bivae,
        ModelKind::Pcd,
        ModelKind::Persic,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::Fm => "fm",
            ModelKind::Neucf => "neucf",
            ModelKind::Bivae => "bivae",
            ModelKind::Pcd => "pcd",
            ModelKind::Persic => "persic",
        }
    }

    /// Display name used in report rows.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Mf => "MF",
            ModelKind::Fm => "FM",
            ModelKind::Neucf => "NeuCF",
            ModelKind::Bivae => "BiVAECF",
            ModelKind::Pcd => "PCD",
            ModelKind::Persic => "PersiC",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.slug().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model `{s}` (expected one of mf, fm, neucf, bivae, pcd, persic)"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<Vec<f64>>);

    impl Scorer for Fixed {
        fn n_users(&self) -> usize {
            self.0.len()
        }
        fn n_posts(&self) -> usize {
            self.0[0].len()
        }
        fn score_unchecked(&self, u: usize, p: usize) -> f64 {
            self.0[u][p]
        }
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_posts(&[0.3], &[0]), [0]);
        // a, b, c = 0, 1, 2
        assert_eq!(rank_posts(&[0.2, 0.9, 0.9], &[0, 1, 2]), [1, 2, 0]);
        assert_eq!(rank_posts(&[0.2, 0.9, 0.9], &[2, 0, 1]), [1, 2, 0]);
    }

    #[test]
    fn ranking_invariant_under_positive_affine_map() {
        let s = [0.4, -1.0, 2.5, 0.4, 0.0];
        let t: Vec<f64> = s.iter().map(|x| 3.0 * x + 7.0).collect();
        let c = [0, 1, 2, 3, 4];
        assert_eq!(rank_posts(&s, &c), rank_posts(&t, &c));
    }

    #[test]
    fn unknown_indices_are_rejected() {
        let f = Fixed(vec![vec![1.0, 2.0]]);
        assert_eq!(f.score(0, 1).unwrap(), 2.0);
        assert!(matches!(
            f.score(1, 0),
            Err(Error::UnknownIndex { kind: "user", .. })
        ));
        assert!(matches!(
            f.score(0, 2),
            Err(Error::UnknownIndex { kind: "post", .. })
        ));
        assert_eq!(f.score_user(0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn model_kind_parsing() {
        for k in ModelKind::ALL {
            assert_eq!(k.slug().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svd".parse::<ModelKind>().is_err());
    }
}
