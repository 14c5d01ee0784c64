use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Interaction, InteractionDataset};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Per-user train/test partition settings.
///
/// Stratification is by each user's interaction count: every user is split
/// on their own, so users with many and few likes appear on both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Number of held-out interactions for a user with `n` of them.
    pub fn test_count(&self, n: usize) -> usize {
        if n < 2 {
            return 0;
        }
        let raw = ((1.0 - self.train_fraction) * n as f64).round() as usize;
        raw.clamp(1, n - 1)
    }
}

/// Splits every user's interactions into train and test parts.
///
/// Both halves share the record tables of `ds`.
pub fn split_dataset(
    ds: &InteractionDataset,
    spec: &SplitSpec,
) -> Result<(InteractionDataset, InteractionDataset)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, "split");
    let mut train = Vec::with_capacity(ds.interactions().len());
    let mut test = Vec::new();
    let mut no_test = 0usize;
    for (user, mut posts) in ds.user_positives().into_iter().enumerate() {
        posts.shuffle(&mut rng);
        let n_test = spec.test_count(posts.len());
        if n_test == 0 && !posts.is_empty() {
            no_test += 1;
        }
        let (held, kept) = posts.split_at(n_test);
        test.extend(held.iter().map(|&post| Interaction { user, post }));
        train.extend(kept.iter().map(|&post| Interaction { user, post }));
    }
    if no_test > 0 {
        log::warn!("{no_test} users have too few interactions to contribute test rows");
    }
    Ok((ds.with_interactions(train)?, ds.with_interactions(test)?))
}
