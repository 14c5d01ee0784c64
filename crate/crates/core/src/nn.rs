//! Small dense-layer toolkit with hand-written backward passes.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// A collection of parameter tensors that optimizers and gradient checks
/// can walk in a fixed order. A gradient has the same type as its model.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<(String, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

pub fn sum_squares<P: ParamSet>(p: &P) -> f64 {
    p.tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|x| x * x)
        .sum()
}

pub fn norm<P: ParamSet>(p: &P) -> f64 {
    sum_squares(p).sqrt()
}

pub fn all_finite<P: ParamSet>(p: &P) -> bool {
    p.tensors()
        .iter()
        .all(|(_, t)| t.iter().all(|x| x.is_finite()))
}

pub fn zeros_like<P: ParamSet>(p: &P) -> P {
    let mut z = p.clone();
    for t in z.tensors_mut() {
        t.fill(0.0);
    }
    z
}

/// `dst += alpha * src`
pub fn axpy<P: ParamSet>(dst: &mut P, alpha: f64, src: &P) {
    let src = src.tensors();
    for (d, (_, s)) in dst.tensors_mut().into_iter().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += alpha * b;
        }
    }
}

pub(crate) fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice()
        .expect("parameters are stored in standard layout")
}

pub(crate) fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut()
        .expect("parameters are stored in standard layout")
}

/// Affine layer `y = x Wᵀ + b` on row-major batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// out × in
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Uniform fan-in scaled initialization, bound `1 / sqrt(fan_in)`; zero bias.
    pub fn uniform_fan_in<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..bound));
        Dense {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let v = ndarray::ArrayView1::from(x);
        (self.weight.dot(&v) + &self.bias).to_vec()
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        grad_out: &Array2<f64>,
        grad: &mut Dense,
    ) -> Array2<f64> {
        grad.weight += &grad_out.t().dot(x);
        grad.bias += &grad_out.sum_axis(Axis(0));
        grad_out.dot(&self.weight)
    }

    /// Same as `backward` without computing the input gradient.
    pub fn backward_params(&self, x: &Array2<f64>, grad_out: &Array2<f64>, grad: &mut Dense) {
        grad.weight += &grad_out.t().dot(x);
        grad.bias += &grad_out.sum_axis(Axis(0));
    }

    pub(crate) fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [f64])>) {
        out.push((format!("{prefix}.weight"), flat(&self.weight)));
        out.push((format!("{prefix}.bias"), flat(&self.bias)));
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(flat_mut(&mut self.weight));
        out.push(flat_mut(&mut self.bias));
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::new();
        self.push_tensors("dense", &mut v);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.push_tensors_mut(&mut v);
        v
    }
}

pub fn normal_matrix<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln σ(x) = −softplus(−x)
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Forgets the moment estimates of one coordinate.
    pub fn reset_moments(&mut self, tensor: usize, index: usize) {
        if let (Some(m), Some(v)) = (self.m.get_mut(tensor), self.v.get_mut(tensor)) {
            m[index] = 0.0;
            v[index] = 0.0;
        }
    }

    pub fn update<P: ParamSet>(&mut self, params: &mut P, grads: &P) {
        let grads = grads.tensors();
        if self.m.is_empty() {
            self.m = grads.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, (_, g))) in params.tensors_mut().into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
