use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::backward::{backward, Gradients};
use super::forward::forward;
use super::head::{head_backward, loss, pool_and_head, Target};
use super::matrix::Matrix;
use super::params::{ModelDims, RHgatParams, Task};
use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, Hypergraph};

/// One training graph; hyperedge `j` is embedded with its construction id.
#[derive(Clone, Debug)]
pub struct Sample {
    pub features: Matrix,
    pub graph: Hypergraph,
    pub target: Target,
}

pub fn predict(params: &RHgatParams, sample: &Sample) -> Result<Vec<f64>> {
    let (out, _) = forward(&sample.features, &sample.graph, &sample.graph.edge_constructions(), params)?;
    Ok(pool_and_head(&out, params))
}

pub fn sample_loss(params: &RHgatParams, sample: &Sample) -> Result<f64> {
    let prediction = predict(params, sample)?;
    Ok(loss(&prediction, sample.target, params.dims.task)?.0)
}

/// Loss and full gradient for one sample.
pub fn sample_gradients(params: &RHgatParams, sample: &Sample) -> Result<(f64, Gradients)> {
    let (out, cache) = forward(&sample.features, &sample.graph, &sample.graph.edge_constructions(), params)?;
    let prediction = pool_and_head(&out, params);
    let (value, d_prediction) = loss(&prediction, sample.target, params.dims.task)?;
    let mut head_grads = params.zeros_like();
    let d_out = head_backward(&out, params, &d_prediction, &mut head_grads);
    let mut grads = backward(&cache, params, &d_out)?;
    grads.params.add_scaled(1.0, &head_grads);
    Ok((value, grads))
}

fn is_correct(prediction: &[f64], target: Target) -> bool {
    match target {
        Target::Class(t) => {
            let best = prediction
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i);
            best == Some(t)
        }
        Target::Value(_) => false,
    }
}

/// Fraction of classification samples whose arg-max logit is the target.
pub fn accuracy(params: &RHgatParams, dataset: &[Sample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for s in dataset {
        if is_correct(&predict(params, s)?, s.target) {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Decoupled: every step also shrinks each parameter by `lr * weight_decay`.
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 1e-4,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub params: RHgatParams,
    /// Mean dataset loss before training, then after every epoch.
    pub losses: Vec<f64>,
    /// Training accuracy aligned with `losses`; empty for regression.
    pub accuracies: Vec<f64>,
}

fn evaluate(params: &RHgatParams, dataset: &[Sample]) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut correct = 0usize;
    for s in dataset {
        let prediction = predict(params, s)?;
        total += loss(&prediction, s.target, params.dims.task)?.0;
        if is_correct(&prediction, s.target) {
            correct += 1;
        }
    }
    let n = dataset.len() as f64;
    Ok((total / n, correct as f64 / n))
}

/// Per-sample gradient descent over a seeded shuffle each epoch.
pub fn train(mut params: RHgatParams, dataset: &[Sample], config: &TrainConfig) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(config.learning_rate >= 0.0 && config.weight_decay >= 0.0) {
        return Err(Error::Config("learning rate and weight decay must be non-negative".into()));
    }
    let classify = matches!(params.dims.task, Task::Classify { .. });
    let mut losses = Vec::with_capacity(config.epochs + 1);
    let mut accuracies = Vec::new();
    let mut record = |params: &RHgatParams| -> Result<()> {
        let (l, a) = evaluate(params, dataset)?;
        losses.push(l);
        if classify {
            accuracies.push(a);
        }
        Ok(())
    };
    record(&params)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, grads) = sample_gradients(&params, &dataset[i])?;
            if config.weight_decay != 0.0 {
                let shrink = 1.0 - config.learning_rate * config.weight_decay;
                for (_, t) in params.tensors_mut() {
                    t.iter_mut().for_each(|v| *v *= shrink);
                }
            }
            params.add_scaled(-config.learning_rate, &grads.params);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters diverged during training".into()));
        }
        record(&params)?;
    }
    Ok(TrainReport {
        params,
        losses,
        accuracies,
    })
}

/// Initializes parameters from `config.seed` and trains.
pub fn train_toy(dataset: &[Sample], dims: ModelDims, config: &TrainConfig) -> Result<TrainReport> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    if dataset.iter().any(|s| s.features.cols() != dims.d) || first.features.cols() != dims.d {
        return Err(Error::Dimension(format!("every sample needs {} feature columns", dims.d)));
    }
    let params = RHgatParams::init(dims, config.seed)?;
    train(params, dataset, config)
}

/// Construction id whose presence decides the label in [`presence_dataset`].
pub const DESIGNATED_ID: usize = 0;

/// Binary task: label 1 iff some hyperedge carries [`DESIGNATED_ID`].
/// Graphs have 4..=10 nodes and 1..=3 hyperedges of 2..=4 contiguous members;
/// node features are standard normal. Labels alternate, so classes are balanced.
pub fn presence_dataset(size: usize, d: usize, vocab: usize, seed: u64) -> Result<Vec<Sample>> {
    if vocab < 2 {
        return Err(Error::InventoryTooSmall { size: vocab, k: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(size);
    for n in 0..size {
        let label = n % 2;
        let m = rng.random_range(4..=10usize);
        let edge_count = rng.random_range(1..=3usize);
        let mut ids: Vec<usize> = (0..edge_count).map(|_| rng.random_range(1..vocab)).collect();
        if label == 1 {
            let slot = rng.random_range(0..edge_count);
            ids[slot] = DESIGNATED_ID;
        }
        let edges = ids
            .into_iter()
            .map(|construction_id| {
                let len = rng.random_range(2..=4usize.min(m));
                let start = rng.random_range(0..=m - len);
                Hyperedge {
                    construction_id,
                    members: (start..start + len).collect(),
                }
            })
            .collect();
        let features = Matrix::from_fn(m, d, |_, _| rng.sample(StandardNormal));
        out.push(Sample {
            features,
            graph: Hypergraph::new(m, edges)?,
            target: Target::Class(label),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let data = presence_dataset(6, 4, 3, 1).unwrap();
        let dims = ModelDims::new(4, 3, Task::Classify { classes: 2 });
        let config = TrainConfig {
            learning_rate: 0.0,
            weight_decay: 0.0,
            epochs: 3,
            seed: 9,
        };
        let report = train_toy(&data, dims, &config).unwrap();
        assert_eq!(report.params, RHgatParams::init(dims, 9).unwrap());
        assert!(report.losses.iter().all(|&l| l == report.losses[0]));
        assert_eq!(report.losses.len(), 4);
    }

    #[test]
    fn deterministic_given_seed() {
        let data = presence_dataset(8, 4, 3, 2).unwrap();
        let dims = ModelDims::new(4, 3, Task::Classify { classes: 2 });
        let config = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let a = train_toy(&data, dims, &config).unwrap();
        let b = train_toy(&data, dims, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn dataset_shape() {
        let data = presence_dataset(40, 3, 5, 7).unwrap();
        let ones = data.iter().filter(|s| s.target == Target::Class(1)).count();
        assert_eq!(ones, 20);
        for s in &data {
            let has = s.graph.edge_constructions().contains(&DESIGNATED_ID);
            assert_eq!(has, s.target == Target::Class(1));
            assert!((4..=10).contains(&s.graph.node_count()));
        }
        assert!(train(RHgatParams::init(ModelDims::new(3, 5, Task::Regress), 0).unwrap(), &[], &TrainConfig::default()).is_err());
    }
}
