use super::forward::{ForwardCache, LayerCache};
use super::matrix::{axpy, dot, Matrix};
use super::params::{LayerParams, RHgatParams};
use crate::error::{Error, Result};

/// Gradients of a scalar objective with respect to the parameters and the
/// input features.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: RHgatParams,
    pub features: Matrix,
}

fn check(cache: &ForwardCache, params: &RHgatParams, output_gradient: &Matrix) -> Result<()> {
    let d = params.dims.d;
    if cache.layers.len() != params.layers.len() {
        return Err(Error::Dimension(format!(
            "cache has {} layers, parameters have {}",
            cache.layers.len(),
            params.layers.len()
        )));
    }
    if cache.layers.iter().any(|l| l.input.cols() != d || l.ffn_hidden.cols() != params.dims.d_ff) {
        return Err(Error::Dimension("cache was produced with different dims".into()));
    }
    if output_gradient.shape() != (cache.node_count(), d) {
        return Err(Error::Dimension(format!(
            "output gradient is {}x{}, expected {}x{d}",
            output_gradient.rows(),
            output_gradient.cols(),
            cache.node_count()
        )));
    }
    if let Some(&id) = cache.edge_constructions.iter().find(|&&id| id >= params.dims.vocab) {
        return Err(Error::UnknownConstruction {
            id,
            size: params.dims.vocab,
        });
    }
    if !output_gradient.is_finite() {
        return Err(Error::NonFinite("output gradient".into()));
    }
    Ok(())
}

/// Reverse pass for `d objective / d output = output_gradient`.
pub fn backward(cache: &ForwardCache, params: &RHgatParams, output_gradient: &Matrix) -> Result<Gradients> {
    check(cache, params, output_gradient)?;
    let mut grads = params.zeros_like();
    let z: Vec<&[f64]> = cache.edge_constructions.iter().map(|&c| params.ec.row(c)).collect();
    let mut dz = vec![vec![0.0; params.dims.d]; z.len()];

    let mut upstream = output_gradient.clone();
    for l in (0..params.layers.len()).rev() {
        upstream = layer_backward(
            &cache.layers[l],
            &params.layers[l],
            &mut grads.layers[l],
            cache,
            &z,
            &mut dz,
            &upstream,
        );
    }
    for (j, &c) in cache.edge_constructions.iter().enumerate() {
        axpy(grads.ec.row_mut(c), 1.0, &dz[j]);
    }
    Ok(Gradients {
        params: grads,
        features: upstream,
    })
}

/// Softmax backward: `a * (da - sum(a * da))`.
fn softmax_backward(a: &[f64], da: &[f64]) -> Vec<f64> {
    let s: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
    a.iter().zip(da).map(|(x, y)| x * (y - s)).collect()
}

fn relu_mask(grad: &mut [f64], pre: &[f64]) {
    for (g, &u) in grad.iter_mut().zip(pre) {
        if u <= 0.0 {
            *g = 0.0;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    c: &LayerCache,
    p: &LayerParams,
    gp: &mut LayerParams,
    cache: &ForwardCache,
    z: &[&[f64]],
    dz: &mut [Vec<f64>],
    d_out: &Matrix,
) -> Matrix {
    let m = c.input.rows();
    let d = c.input.cols();
    let mut dx = Matrix::zeros(m, d);
    let mut dh = Matrix::zeros(m, d);

    // layer norm, residual and FFN
    for i in 0..m {
        let dy_out = d_out.row(i);
        let n = c.normalized.row(i);
        for k in 0..d {
            gp.ln_gain[k] += dy_out[k] * n[k];
            gp.ln_bias[k] += dy_out[k];
        }
        let dn: Vec<f64> = (0..d).map(|k| dy_out[k] * p.ln_gain[k]).collect();
        let mean_dn = dn.iter().sum::<f64>() / d as f64;
        let mean_dn_n = dot(&dn, n) / d as f64;
        let s = c.inv_std[i];
        let dy: Vec<f64> = (0..d).map(|k| s * (dn[k] - mean_dn - n[k] * mean_dn_n)).collect();
        axpy(dx.row_mut(i), 1.0, &dy);

        let mut dpre = dy;
        relu_mask(&mut dpre, c.ffn_pre.row(i));
        gp.w2.add_outer(&dpre, c.ffn_hidden.row(i));
        axpy(&mut gp.b2, 1.0, &dpre);
        let dhidden = p.w2.matvec_t(&dpre);
        gp.w1.add_outer(&dhidden, c.attended.row(i));
        axpy(&mut gp.b1, 1.0, &dhidden);
        if !cache.node_edges[i].is_empty() {
            dh.row_mut(i).copy_from_slice(&p.w1.matvec_t(&dhidden));
        }
    }

    // edge-level attention
    let edges = cache.members.len();
    let mut d_gprime = vec![vec![0.0; d]; edges];
    let mut d_edge_key = vec![vec![0.0; d]; edges];
    let mut d_edge_value = vec![vec![0.0; d]; edges];
    for (i, incident) in cache.node_edges.iter().enumerate() {
        if incident.is_empty() {
            continue;
        }
        let dhi = dh.row(i);
        let beta = &c.beta[i];
        let dbeta: Vec<f64> = incident.iter().map(|&j| dot(dhi, &c.edge_value[j])).collect();
        for (jj, &j) in incident.iter().enumerate() {
            axpy(&mut d_edge_value[j], beta[jj], dhi);
        }
        let mut dt = softmax_backward(beta, &dbeta);
        relu_mask(&mut dt, &c.edge_logits[i]);
        let mut dq = vec![0.0; d];
        for (jj, &j) in incident.iter().enumerate() {
            axpy(&mut dq, dt[jj], &c.edge_key[j]);
            axpy(&mut d_edge_key[j], dt[jj], c.node_query.row(i));
        }
        gp.wo.add_outer(&dq, c.input.row(i));
        axpy(dx.row_mut(i), 1.0, &p.wo.matvec_t(&dq));
    }

    // injection and node-level attention
    let mut d_node_proj = Matrix::zeros(m, d);
    let mut d_node_key = Matrix::zeros(m, d);
    for (j, nodes) in cache.members.iter().enumerate() {
        gp.wr.add_outer(&d_edge_key[j], &c.g_prime[j]);
        gp.we.add_outer(&d_edge_value[j], &c.g_prime[j]);
        let dg = &mut d_gprime[j];
        axpy(dg, 1.0, &p.wr.matvec_t(&d_edge_key[j]));
        axpy(dg, 1.0, &p.we.matvec_t(&d_edge_value[j]));

        gp.wg.add_outer(dg, z[j]);
        axpy(&mut dz[j], 1.0, &p.wg.matvec_t(dg));

        let alpha = &c.alpha[j];
        let dalpha: Vec<f64> = nodes.iter().map(|&s| dot(dg, c.node_proj.row(s))).collect();
        for (ss, &s) in nodes.iter().enumerate() {
            axpy(d_node_proj.row_mut(s), alpha[ss], dg);
        }
        let mut dr = softmax_backward(alpha, &dalpha);
        relu_mask(&mut dr, &c.node_logits[j]);
        let mut dq = vec![0.0; d];
        for (ss, &s) in nodes.iter().enumerate() {
            axpy(&mut dq, dr[ss], c.node_key.row(s));
            axpy(d_node_key.row_mut(s), dr[ss], &c.edge_query[j]);
        }
        gp.wc.add_outer(&dq, z[j]);
        axpy(&mut dz[j], 1.0, &p.wc.matvec_t(&dq));
    }

    for s in 0..m {
        let x = c.input.row(s);
        gp.wn.add_outer(d_node_proj.row(s), x);
        gp.ws.add_outer(d_node_key.row(s), x);
        let back_n = p.wn.matvec_t(d_node_proj.row(s));
        let back_s = p.ws.matvec_t(d_node_key.row(s));
        let row = dx.row_mut(s);
        axpy(row, 1.0, &back_n);
        axpy(row, 1.0, &back_s);
    }
    dx
}
