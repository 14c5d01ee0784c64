//! Comparison models behind the same scoring interface as PersiC.

pub mod bivae;
pub mod factorization;
pub mod neucf;
pub mod pcd;

pub use bivae::{
    elbo, half_step, interaction_matrix, kl_standard_normal, train_bivae, train_bivae_matrix,
    BivaeConfig, BivaeModel, BivaeTrace, GaussianEncoder, HalfStep,
};
pub use factorization::{train_fm, train_mf, FactorizationConfig, LatentFactorModel};
pub use neucf::{train_neucf, NeuCfConfig, NeuCfModel};
pub use pcd::{cosine_similarity, train_pcd, PcdConfig, PcdModel, PcdPenalty, PcdScorer};

#[cfg(test)]
mod tests;
