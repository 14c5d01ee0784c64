//! PersiC: a two-tower scorer with a personality-aware user tower.
//!
//! The user tower maps the selected user feature parts through ψ and appends
//! the 12-dim personality vector; the post tower maps text and concept
//! features through γ. Both land in one latent space and are scored by a dot
//! product.

mod ablation;
mod model;
mod train;

pub use ablation::{FeatureAblationSpec, UserPart};
pub use model::{
    Dropout, PersicConfig, PersicInputs, PersicModel, PersicScorer, Tower, UserEncoder,
};
pub use train::{
    bpr_mean_log_sigmoid, bpr_objective, gradients, train, DropoutMasks, TrainOutcome,
};
