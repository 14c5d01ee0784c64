use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::UserFeatureBundle;

/// Which user features feed the user tower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAblationSpec {
    OneHot,
    Posts,
    Likes,
    PostsLikes,
    PostsPers,
    PostsLikesPers,
}

/// One block of the user-side input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserPart {
    TextPosts,
    ConceptsPosts,
    TextLikes,
    ConceptsLikes,
    LexiconPosts,
    LexiconLikes,
}

impl UserPart {
    const ORDER: [UserPart; 6] = [
        UserPart::TextPosts,
        UserPart::ConceptsPosts,
        UserPart::TextLikes,
        UserPart::ConceptsLikes,
        UserPart::LexiconPosts,
        UserPart::LexiconLikes,
    ];

    fn from_posts(self) -> bool {
        matches!(
            self,
            UserPart::TextPosts | UserPart::ConceptsPosts | UserPart::LexiconPosts
        )
    }

    pub fn slice(self, b: &UserFeatureBundle) -> &[f64] {
        match self {
            UserPart::TextPosts => &b.text_posts,
            UserPart::ConceptsPosts => &b.concepts_posts,
            UserPart::TextLikes => &b.text_likes,
            UserPart::ConceptsLikes => &b.concepts_likes,
            UserPart::LexiconPosts => &b.lexicon_posts,
            UserPart::LexiconLikes => &b.lexicon_likes,
        }
    }
}

impl FeatureAblationSpec {
    pub const ALL: [FeatureAblationSpec; 6] = [
        FeatureAblationSpec::OneHot,
        FeatureAblationSpec::Posts,
        FeatureAblationSpec::Likes,
        FeatureAblationSpec::PostsLikes,
        FeatureAblationSpec::PostsPers,
        FeatureAblationSpec::PostsLikesPers,
    ];

    pub fn uses_posts(self) -> bool {
        matches!(
            self,
            Self::Posts | Self::PostsLikes | Self::PostsPers | Self::PostsLikesPers
        )
    }

    pub fn uses_likes(self) -> bool {
        matches!(self, Self::Likes | Self::PostsLikes | Self::PostsLikesPers)
    }

    pub fn uses_pers(self) -> bool {
        matches!(self, Self::PostsPers | Self::PostsLikesPers)
    }

    pub fn is_one_hot(self) -> bool {
        self == Self::OneHot
    }

    /// Selected parts, in fixed order.
    pub fn parts(self) -> Vec<UserPart> {
        UserPart::ORDER
            .into_iter()
            .filter(|p| {
                if p.from_posts() {
                    self.uses_posts()
                } else {
                    self.uses_likes()
                }
            })
            .collect()
    }

    /// Concatenated tower input for one user; empty for `OneHot`.
    pub fn user_row(self, b: &UserFeatureBundle) -> Vec<f64> {
        self.parts()
            .into_iter()
            .flat_map(|p| p.slice(b).iter().copied())
            .collect()
    }

    pub fn slug(self) -> &'static str {
        match self {
            Self::OneHot => "onehot",
            Self::Posts => "posts",
            Self::Likes => "likes",
            Self::PostsLikes => "posts+likes",
            Self::PostsPers => "posts+pers",
            Self::PostsLikesPers => "posts+likes+pers",
        }
    }

    /// Row label for ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::OneHot => "One-hot",
            Self::Posts => "Posts",
            Self::Likes => "Likes",
            Self::PostsLikes => "Posts+Likes",
            Self::PostsPers => "Posts+Pers",
            Self::PostsLikesPers => "Posts+Likes+Pers",
        }
    }
}

impl fmt::Display for FeatureAblationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for FeatureAblationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect();
        Self::ALL
            .into_iter()
            .find(|a| a.slug().replace('+', "") == key.replace('+', ""))
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}`")))
    }
}
