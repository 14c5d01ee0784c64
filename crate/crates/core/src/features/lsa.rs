//! Latent semantic analysis: truncated SVD of the tf-idf document-term matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SparseVec;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Default number of latent text dimensions.
pub const DEFAULT_LSA_DIM: usize = 100;

/// Singular values below `RANK_TOL * s_max` count as zero.
const RANK_TOL: f64 = 1e-6;

/// How the right singular vectors are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdMethod {
    #[default]
    /// Dense when the vocabulary has at most 3000 terms, randomized otherwise.
    Auto,
    /// Exact eigendecomposition of the V×V Gram matrix.
    Dense,
    /// Randomized range finder with power iterations.
    Randomized {
        oversample: usize,
        power_iters: usize,
        seed: u64,
    },
}

/// Projection onto the top-k right singular vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaModel {
    /// V×k; each column is a unit-norm right singular vector.
    pub projection: Array2<f64>,
    pub singular_values: Vec<f64>,
}

impl LsaModel {
    /// Fits the projection on the rows of an N×V sparse matrix.
    pub fn fit(rows: &[SparseVec], vocab: usize, k: usize, method: SvdMethod) -> Result<Self> {
        if rows.is_empty() || vocab == 0 {
            return Err(Error::EmptyCorpus);
        }
        if k == 0 {
            return Err(Error::Config("LSA dimension must be at least 1".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.dim != vocab) {
            return Err(Error::Dimension(format!(
                "tf-idf row has dimension {}, expected {vocab}",
                r.dim
            )));
        }
        let method = match method {
            SvdMethod::Auto if vocab <= 3000 => SvdMethod::Dense,
            SvdMethod::Auto => SvdMethod::Randomized {
                oversample: 10,
                power_iters: 4,
                seed: 0,
            },
            m => m,
        };
        let (values, vectors) = match method {
            SvdMethod::Randomized {
                oversample,
                power_iters,
                seed,
            } => randomized_right_vectors(rows, vocab, k, oversample, power_iters, seed),
            _ => gram_right_vectors(rows, vocab),
        };
        let s_max = values.first().copied().unwrap_or(0.0);
        let rank = values
            .iter()
            .filter(|&&s| s > RANK_TOL * s_max && s > 0.0)
            .count();
        if k > rank {
            return Err(Error::RankTooLow { requested: k, rank });
        }
        let mut projection = Array2::zeros((vocab, k));
        for j in 0..k {
            let col = vectors.column(j);
            // sign convention: the largest-magnitude entry is positive
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for i in 0..vocab {
                projection[[i, j]] = sign * col[i];
            }
        }
        Ok(LsaModel {
            projection,
            singular_values: values[..k].to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.projection.nrows()
    }

    pub fn transform(&self, x: &SparseVec) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, v) in x.iter() {
            for (o, p) in out.iter_mut().zip(self.projection.row(i)) {
                *o += v * p;
            }
        }
        out
    }

    pub fn transform_dense(&self, x: &[f64]) -> Vec<f64> {
        let v = ndarray::ArrayView1::from(x);
        v.dot(&self.projection).to_vec()
    }
}

/// Singular values (descending) and right singular vectors from XᵀX.
fn gram_right_vectors(rows: &[SparseVec], vocab: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut gram = DMatrix::<f64>::zeros(vocab, vocab);
    for r in rows {
        for (i, vi) in r.iter() {
            for (j, vj) in r.iter() {
                gram[(i, j)] += vi * vj;
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    sorted_eigenpairs(eig.eigenvalues.as_slice(), &eig.eigenvectors)
}

fn sorted_eigenpairs(values: &[f64], vectors: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sv = order.iter().map(|&i| values[i].max(0.0).sqrt()).collect();
    let cols: Vec<_> = order
        .iter()
        .map(|&i| vectors.column(i).into_owned())
        .collect();
    (sv, DMatrix::from_columns(&cols))
}

fn sparse_times_dense(rows: &[SparseVec], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), m.ncols());
    for (r, row) in rows.iter().enumerate() {
        for (i, v) in row.iter() {
            for c in 0..m.ncols() {
                out[(r, c)] += v * m[(i, c)];
            }
        }
    }
    out
}

fn sparse_t_times_dense(rows: &[SparseVec], vocab: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(vocab, m.ncols());
    for (r, row) in rows.iter().enumerate() {
        for (i, v) in row.iter() {
            for c in 0..m.ncols() {
                out[(i, c)] += v * m[(r, c)];
            }
        }
    }
    out
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn randomized_right_vectors(
    rows: &[SparseVec],
    vocab: usize,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> (Vec<f64>, DMatrix<f64>) {
    let width = (k + oversample)
        .min(vocab)
        .min(rows.len())
        .max(k.min(vocab));
    let mut rng = stream_rng(seed, "lsa");
    let omega = DMatrix::from_fn(vocab, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(sparse_times_dense(rows, &omega));
    for _ in 0..power_iters {
        let z = orthonormalize(sparse_t_times_dense(rows, vocab, &q));
        q = orthonormalize(sparse_times_dense(rows, &z));
    }
    // B = Qᵀ X is small (width × V); its right singular vectors come from B Bᵀ.
    let bt = sparse_t_times_dense(rows, vocab, &q);
    let small = bt.transpose() * &bt;
    let eig = SymmetricEigen::new(small);
    let (sv, u) = sorted_eigenpairs(eig.eigenvalues.as_slice(), &eig.eigenvectors);
    let mut v = &bt * &u;
    for (j, &s) in sv.iter().enumerate() {
        if s > 0.0 {
            v.column_mut(j).scale_mut(1.0 / s);
        }
    }
    (sv, v)
}
