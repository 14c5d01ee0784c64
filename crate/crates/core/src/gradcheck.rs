//! Central finite-difference gradient checks for any [`ParamSet`].

use crate::nn::ParamSet;

/// Relative error of one parameter tensor.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub rel_error: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
}

/// Compares `analytic` with central differences of `loss` around `params`,
/// tensor by tensor. Both norms below `1e-10` count as agreement.
pub fn check<P, F>(params: &P, analytic: &P, h: f64, loss: F) -> Vec<TensorCheck>
where
    P: ParamSet,
    F: Fn(&P) -> f64,
{
    let shapes: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len()))
        .collect();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(shapes.len());
    for (ti, (name, len)) in shapes.into_iter().enumerate() {
        let mut numeric = vec![0.0; len];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let orig = probe.tensors_mut()[ti][j];
            probe.tensors_mut()[ti][j] = orig + h;
            let up = loss(&probe);
            probe.tensors_mut()[ti][j] = orig - h;
            let down = loss(&probe);
            probe.tensors_mut()[ti][j] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let a = &analytic[ti];
        let diff: f64 = a
            .iter()
            .zip(&numeric)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let denom = na.max(nn);
        let rel_error = if denom < 1e-10 { 0.0 } else { diff / denom };
        out.push(TensorCheck {
            name,
            rel_error,
            analytic_norm: na,
            numeric_norm: nn,
        });
    }
    out
}

/// Largest relative error across tensors.
pub fn worst(checks: &[TensorCheck]) -> f64 {
    checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
}
