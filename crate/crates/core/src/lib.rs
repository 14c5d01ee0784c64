pub mod baselines;
pub mod bpr;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod persic;
pub mod recommender;
pub mod rng;
pub mod synth;

#[cfg(any(test, feature = "testing"))]
pub mod gradcheck;
#[cfg(any(test, feature = "testing"))]
pub mod testing;

pub use error::{Error, Result};
pub use recommender::{rank_posts, ModelKind, Scorer};
