use super::matrix::{dot, Matrix};
use super::params::{LayerParams, RHgatParams};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Intermediates of one layer, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    /// Layer input `H^{l-1}`.
    pub input: Matrix,
    /// Per hyperedge: `Wc z_j`.
    pub edge_query: Vec<Vec<f64>>,
    /// Per node: `Ws h_s`.
    pub node_key: Matrix,
    /// Per node: `Wn h_s`.
    pub node_proj: Matrix,
    /// Per hyperedge, per member: `(Wc z_j)^T Ws h_s`, before the activation.
    pub node_logits: Vec<Vec<f64>>,
    /// `ReLU` of `node_logits`.
    pub node_scores: Vec<Vec<f64>>,
    /// Node-level attention weights, aligned with `node_scores`.
    pub alpha: Vec<Vec<f64>>,
    /// Per hyperedge: attention-pooled node projections.
    pub g: Vec<Vec<f64>>,
    /// Per hyperedge: `g_j + Wg z_j`.
    pub g_prime: Vec<Vec<f64>>,
    /// Per node: `Wo h_i`.
    pub node_query: Matrix,
    /// Per hyperedge: `Wr g'_j`.
    pub edge_key: Vec<Vec<f64>>,
    /// Per hyperedge: `We g'_j`.
    pub edge_value: Vec<Vec<f64>>,
    /// Per node, per incident hyperedge: `(Wo h_i)^T Wr g'_j`, before the activation.
    pub edge_logits: Vec<Vec<f64>>,
    /// `ReLU` of `edge_logits`.
    pub edge_scores: Vec<Vec<f64>>,
    /// Edge-level attention weights, aligned with `edge_scores`.
    pub beta: Vec<Vec<f64>>,
    /// Post-attention node states `H^l`; zero rows for isolated nodes.
    pub attended: Matrix,
    /// `W1 H^l + b1`.
    pub ffn_hidden: Matrix,
    /// `W2 (W1 H^l + b1) + b2`, before the activation.
    pub ffn_pre: Matrix,
    /// Rows normalized to zero mean and (near) unit variance.
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
    /// `H'^l`.
    pub output: Matrix,
}

#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub members: Vec<Vec<usize>>,
    pub node_edges: Vec<Vec<usize>>,
    pub edge_constructions: Vec<usize>,
    pub layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.layers.last().expect("at least one layer").output
    }

    pub fn node_count(&self) -> usize {
        self.node_edges.len()
    }
}

/// Sums in ascending value order, so the result depends only on the multiset
/// of terms and not on node or hyperedge numbering.
pub(crate) fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn canonical_weighted_sum<'a>(
    weights: &[f64],
    vectors: impl Iterator<Item = &'a [f64]> + Clone,
    d: usize,
) -> Vec<f64> {
    (0..d)
        .map(|k| {
            canonical_sum(
                weights
                    .iter()
                    .zip(vectors.clone())
                    .map(|(w, v)| w * v[k])
                    .collect(),
            )
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let denom = canonical_sum(exps.clone());
    exps.into_iter().map(|e| e / denom).collect()
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn validate(
    features: &Matrix,
    graph: &Hypergraph,
    edge_constructions: &[usize],
    params: &RHgatParams,
) -> Result<()> {
    let dims = &params.dims;
    if params.layers.len() != dims.layers || params.ec.shape() != (dims.vocab, dims.d) {
        return Err(Error::Dimension("parameters do not match their declared dims".into()));
    }
    if features.shape() != (graph.node_count(), dims.d) {
        return Err(Error::Dimension(format!(
            "features are {}x{}, expected {}x{}",
            features.rows(),
            features.cols(),
            graph.node_count(),
            dims.d
        )));
    }
    if graph.node_count() == 0 {
        return Err(Error::Dimension("graph has no nodes".into()));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("features".into()));
    }
    if edge_constructions.len() != graph.edge_count() {
        return Err(Error::Dimension(format!(
            "{} construction ids for {} hyperedges",
            edge_constructions.len(),
            graph.edge_count()
        )));
    }
    if let Some(&id) = edge_constructions.iter().find(|&&id| id >= dims.vocab) {
        return Err(Error::UnknownConstruction {
            id,
            size: dims.vocab,
        });
    }
    Ok(())
}

/// Runs every layer over `features` (`m x d`); hyperedge `j` is embedded with
/// `Ec[edge_constructions[j]]`.
pub fn forward(
    features: &Matrix,
    graph: &Hypergraph,
    edge_constructions: &[usize],
    params: &RHgatParams,
) -> Result<(Matrix, ForwardCache)> {
    validate(features, graph, edge_constructions, params)?;
    let members: Vec<Vec<usize>> = graph.edges().iter().map(|e| e.members.clone()).collect();
    let node_edges: Vec<Vec<usize>> = (0..graph.node_count())
        .map(|i| graph.incident_edges(i).map(<[usize]>::to_vec))
        .collect::<Result<_>>()?;
    let z: Vec<&[f64]> = edge_constructions.iter().map(|&c| params.ec.row(c)).collect();

    let mut layers = Vec::with_capacity(params.layers.len());
    let mut input = features.clone();
    for layer in &params.layers {
        let cache = layer_forward(input, &members, &node_edges, &z, layer, params.dims.ln_eps);
        input = cache.output.clone();
        layers.push(cache);
    }
    let cache = ForwardCache {
        members,
        node_edges,
        edge_constructions: edge_constructions.to_vec(),
        layers,
    };
    Ok((cache.output().clone(), cache))
}

fn layer_forward(
    input: Matrix,
    members: &[Vec<usize>],
    node_edges: &[Vec<usize>],
    z: &[&[f64]],
    p: &LayerParams,
    ln_eps: f64,
) -> LayerCache {
    let m = input.rows();
    let d = input.cols();
    let rows_of = |w: &Matrix| Matrix::from_rows(&(0..m).map(|i| w.matvec(input.row(i))).collect::<Vec<_>>());
    let node_key = rows_of(&p.ws).expect("square weights");
    let node_proj = rows_of(&p.wn).expect("square weights");
    let node_query = rows_of(&p.wo).expect("square weights");

    // node-level attention into hyperedges
    let mut edge_query = Vec::with_capacity(members.len());
    let mut node_logits = Vec::with_capacity(members.len());
    let mut node_scores = Vec::with_capacity(members.len());
    let mut alpha = Vec::with_capacity(members.len());
    let mut g = Vec::with_capacity(members.len());
    let mut g_prime = Vec::with_capacity(members.len());
    for (j, nodes) in members.iter().enumerate() {
        let q = p.wc.matvec(z[j]);
        let logits: Vec<f64> = nodes.iter().map(|&s| dot(&q, node_key.row(s))).collect();
        let scores: Vec<f64> = logits.iter().copied().map(relu).collect();
        let a = softmax(&scores);
        let gj = canonical_weighted_sum(&a, nodes.iter().map(|&s| node_proj.row(s)), d);
        let injected = p.wg.matvec(z[j]);
        let gp: Vec<f64> = gj.iter().zip(&injected).map(|(x, y)| x + y).collect();
        edge_query.push(q);
        node_logits.push(logits);
        node_scores.push(scores);
        alpha.push(a);
        g.push(gj);
        g_prime.push(gp);
    }
    let edge_key: Vec<Vec<f64>> = g_prime.iter().map(|gp| p.wr.matvec(gp)).collect();
    let edge_value: Vec<Vec<f64>> = g_prime.iter().map(|gp| p.we.matvec(gp)).collect();

    // edge-level attention back into nodes
    let mut edge_logits = Vec::with_capacity(m);
    let mut edge_scores = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut attended = Matrix::zeros(m, d);
    for (i, incident) in node_edges.iter().enumerate() {
        let logits: Vec<f64> = incident
            .iter()
            .map(|&j| dot(node_query.row(i), &edge_key[j]))
            .collect();
        let scores: Vec<f64> = logits.iter().copied().map(relu).collect();
        let b = if incident.is_empty() {
            Vec::new()
        } else {
            let b = softmax(&scores);
            let hi = canonical_weighted_sum(&b, incident.iter().map(|&j| edge_value[j].as_slice()), d);
            attended.row_mut(i).copy_from_slice(&hi);
            b
        };
        edge_logits.push(logits);
        edge_scores.push(scores);
        beta.push(b);
    }

    // H' = LN(H^{l-1} + ReLU(W2 (W1 H^l + b1) + b2))
    let d_ff = p.b1.len();
    let mut ffn_hidden = Matrix::zeros(m, d_ff);
    let mut ffn_pre = Matrix::zeros(m, d);
    let mut normalized = Matrix::zeros(m, d);
    let mut output = Matrix::zeros(m, d);
    let mut inv_std = Vec::with_capacity(m);
    for i in 0..m {
        let hidden: Vec<f64> = p
            .w1
            .matvec(attended.row(i))
            .iter()
            .zip(&p.b1)
            .map(|(x, b)| x + b)
            .collect();
        let pre: Vec<f64> = p.w2.matvec(&hidden).iter().zip(&p.b2).map(|(x, b)| x + b).collect();
        let y: Vec<f64> = input.row(i).iter().zip(&pre).map(|(x, v)| x + relu(*v)).collect();
        let mean = y.iter().sum::<f64>() / d as f64;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + ln_eps).sqrt();
        for (k, yk) in y.iter().enumerate() {
            let n = (yk - mean) * s;
            normalized.set(i, k, n);
            output.set(i, k, p.ln_gain[k] * n + p.ln_bias[k]);
        }
        ffn_hidden.row_mut(i).copy_from_slice(&hidden);
        ffn_pre.row_mut(i).copy_from_slice(&pre);
        inv_std.push(s);
    }

    LayerCache {
        input,
        edge_query,
        node_key,
        node_proj,
        node_logits,
        node_scores,
        alpha,
        g,
        g_prime,
        node_query,
        edge_key,
        edge_value,
        edge_logits,
        edge_scores,
        beta,
        attended,
        ffn_hidden,
        ffn_pre,
        normalized,
        inv_std,
        output,
    }
}

/// Column-wise mean over all node rows.
pub fn pool(output: &Matrix) -> Vec<f64> {
    let m = output.rows() as f64;
    (0..output.cols())
        .map(|k| canonical_sum((0..output.rows()).map(|i| output.get(i, k)).collect()) / m)
        .collect()
}
