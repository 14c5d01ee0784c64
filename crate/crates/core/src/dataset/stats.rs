use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::InteractionDataset;

/// Corpus counts in the shape of a dataset-statistics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub brands: usize,
    pub posts: usize,
    pub users: usize,
    pub interactions: usize,
    pub user_posts: usize,
    pub user_images: usize,
    pub sparsity: f64,
}

/// `1 - interactions / (users * posts)`; zero for an empty matrix.
pub fn sparsity(users: usize, posts: usize, interactions: usize) -> f64 {
    let cells = users as f64 * posts as f64;
    if cells == 0.0 {
        return 0.0;
    }
    1.0 - interactions as f64 / cells
}

pub fn dataset_stats(ds: &InteractionDataset) -> StatsReport {
    let brands: HashSet<&str> = ds.posts().iter().map(|p| p.brand_id.as_str()).collect();
    StatsReport {
        brands: brands.len(),
        posts: ds.n_posts(),
        users: ds.n_users(),
        interactions: ds.interactions().len(),
        user_posts: ds.users().iter().map(|u| u.timeline_texts.len()).sum(),
        user_images: ds.users().iter().map(|u| u.timeline_concepts.len()).sum(),
        sparsity: sparsity(ds.n_users(), ds.n_posts(), ds.interactions().len()),
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Brands", self.brands.to_string()),
            ("Brand posts", self.posts.to_string()),
            ("Interactions", self.interactions.to_string()),
            ("Users", self.users.to_string()),
            ("User posts", self.user_posts.to_string()),
            ("User images", self.user_images.to_string()),
            ("Sparsity", format!("{:.4}%", 100.0 * self.sparsity)),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<14}{value:>14}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::small;

    #[test]
    fn sparsity_values() {
        assert_eq!(sparsity(1, 1, 1), 0.0);
        assert_eq!(sparsity(2, 2, 1), 0.75);
        let s = sparsity(41901, 4800, 330545);
        assert!((s - 0.99836).abs() < 1e-4, "{s}");
        // the printed table value is 99.835%; the recomputed one rounds to 99.8357%
        assert!((100.0 * s - 99.835).abs() < 0.01);
    }

    #[test]
    fn stats_of_fixture() {
        let r = dataset_stats(&small());
        assert_eq!((r.users, r.posts, r.interactions, r.brands), (3, 5, 7, 1));
        assert!((r.sparsity - (1.0 - 7.0 / 15.0)).abs() < 1e-12);
        assert!(r.to_string().contains("Sparsity"));
    }
}
