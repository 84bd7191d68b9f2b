//! Central finite-difference checking of [`backward`](super::backward::backward).
//!
//! The checked objective is the task loss plus `sum(probe * output)`, so every
//! output entry receives a distinct, non-trivial upstream gradient.

use super::backward::{backward, Gradients};
use super::forward::{forward, ForwardCache};
use super::head::{head_backward, loss, pool_and_head};
use super::matrix::Matrix;
use super::params::RHgatParams;
use super::train::Sample;
use crate::error::{Error, Result};

/// Denominator floor for relative errors; below it errors are effectively absolute.
pub const NORM_FLOOR: f64 = 1e-6;

pub fn objective(params: &RHgatParams, features: &Matrix, sample: &Sample, probe: &Matrix) -> Result<f64> {
    let (out, _) = forward(features, &sample.graph, &sample.graph.edge_constructions(), params)?;
    if probe.shape() != out.shape() {
        return Err(Error::Dimension("probe must have the output's shape".into()));
    }
    let prediction = pool_and_head(&out, params);
    let (value, _) = loss(&prediction, sample.target, params.dims.task)?;
    let linear: f64 = out.as_slice().iter().zip(probe.as_slice()).map(|(o, r)| o * r).sum();
    Ok(value + linear)
}

/// Analytic gradient of [`objective`] plus the forward cache.
pub fn analytic(params: &RHgatParams, sample: &Sample, probe: &Matrix) -> Result<(Gradients, ForwardCache)> {
    let (out, cache) = forward(&sample.features, &sample.graph, &sample.graph.edge_constructions(), params)?;
    if probe.shape() != out.shape() {
        return Err(Error::Dimension("probe must have the output's shape".into()));
    }
    let prediction = pool_and_head(&out, params);
    let (_, d_prediction) = loss(&prediction, sample.target, params.dims.task)?;
    let mut head_grads = params.zeros_like();
    let mut d_out = head_backward(&out, params, &d_prediction, &mut head_grads);
    for (g, r) in d_out.as_mut_slice().iter_mut().zip(probe.as_slice()) {
        *g += r;
    }
    let mut grads = backward(&cache, params, &d_out)?;
    grads.params.add_scaled(1.0, &head_grads);
    Ok((grads, cache))
}

/// Smallest `|pre-activation|` over every ReLU in the network. Finite
/// differences are only meaningful when this is well above the step size.
pub fn kink_margin(cache: &ForwardCache) -> f64 {
    let mut margin = f64::INFINITY;
    for layer in &cache.layers {
        let values = layer
            .node_logits
            .iter()
            .chain(&layer.edge_logits)
            .flatten()
            .chain(layer.ffn_pre.as_slice());
        for v in values {
            margin = margin.min(v.abs());
        }
    }
    margin
}

#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub len: usize,
    pub max_abs_error: f64,
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||, NORM_FLOOR)`.
    pub relative_error: f64,
}

fn compare(name: String, analytic: &[f64], numeric: &[f64]) -> TensorCheck {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let max_abs_error = diff.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let denom = norm(analytic).max(norm(numeric)).max(NORM_FLOOR);
    TensorCheck {
        name,
        len: analytic.len(),
        max_abs_error,
        relative_error: norm(&diff) / denom,
    }
}

/// Checks every parameter tensor and the input features with central
/// differences of size `step`.
pub fn check_gradients(
    params: &RHgatParams,
    sample: &Sample,
    probe: &Matrix,
    step: f64,
) -> Result<Vec<TensorCheck>> {
    let (grads, _) = analytic(params, sample, probe)?;
    let mut report = Vec::new();

    let names: Vec<(String, usize)> = params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let analytic_tensors = grads.params.tensors();
    for (t, (name, len)) in names.into_iter().enumerate() {
        let mut numeric = Vec::with_capacity(len);
        for k in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t].1[k] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[t].1[k] -= step;
            let fp = objective(&plus, &sample.features, sample, probe)?;
            let fm = objective(&minus, &sample.features, sample, probe)?;
            numeric.push((fp - fm) / (2.0 * step));
        }
        report.push(compare(name, analytic_tensors[t].1, &numeric));
    }

    let mut numeric = Vec::with_capacity(sample.features.as_slice().len());
    for k in 0..sample.features.as_slice().len() {
        let mut plus = sample.features.clone();
        plus.as_mut_slice()[k] += step;
        let mut minus = sample.features.clone();
        minus.as_mut_slice()[k] -= step;
        let fp = objective(params, &plus, sample, probe)?;
        let fm = objective(params, &minus, sample, probe)?;
        numeric.push((fp - fm) / (2.0 * step));
    }
    report.push(compare("features".into(), grads.features.as_slice(), &numeric));
    Ok(report)
}
