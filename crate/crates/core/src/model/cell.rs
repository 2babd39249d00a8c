//! Gated recurrent cell with explicit forward caching and a hand-derived
//! backward pass.

use serde::{Deserialize, Serialize};

use super::math::{concat, sigmoid, Mat};

/// Weights of one gated recurrent cell. Each gate matrix maps the
/// concatenation [input; hidden] to the hidden dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    pub w_update: Mat,
    pub w_reset: Mat,
    pub w_cand: Mat,
    pub b_update: Mat,
    pub b_reset: Mat,
    pub b_cand: Mat,
}

impl GruWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let cat = input_dim + hidden_dim;
        GruWeights {
            w_update: Mat::zeros(hidden_dim, cat),
            w_reset: Mat::zeros(hidden_dim, cat),
            w_cand: Mat::zeros(hidden_dim, cat),
            b_update: Mat::zeros(hidden_dim, 1),
            b_reset: Mat::zeros(hidden_dim, 1),
            b_cand: Mat::zeros(hidden_dim, 1),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_update.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w_update.cols - self.w_update.rows
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub update: Vec<f64>,
    pub reset: Vec<f64>,
    pub cand: Vec<f64>,
}

/// z = sigmoid(Wz [x;h] + bz); r = sigmoid(Wr [x;h] + br);
/// c = tanh(Wc [x; r*h] + bc); h' = (1-z)*h + z*c
pub fn gru_forward(weights: &GruWeights, input: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruCache) {
    let cat = concat(input, h_prev);
    let update: Vec<f64> = weights
        .w_update
        .matvec(&cat)
        .iter()
        .zip(&weights.b_update.data)
        .map(|(a, b)| sigmoid(a + b))
        .collect();
    let reset: Vec<f64> = weights
        .w_reset
        .matvec(&cat)
        .iter()
        .zip(&weights.b_reset.data)
        .map(|(a, b)| sigmoid(a + b))
        .collect();
    let gated: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let cat_c = concat(input, &gated);
    let cand: Vec<f64> = weights
        .w_cand
        .matvec(&cat_c)
        .iter()
        .zip(&weights.b_cand.data)
        .map(|(a, b)| (a + b).tanh())
        .collect();
    let h: Vec<f64> = update
        .iter()
        .zip(&cand)
        .zip(h_prev)
        .map(|((z, c), hp)| (1.0 - z) * hp + z * c)
        .collect();
    (
        h,
        GruCache {
            input: input.to_vec(),
            h_prev: h_prev.to_vec(),
            update,
            reset,
            cand,
        },
    )
}

/// Backward through one step. Accumulates weight gradients into `grads`
/// and returns (d_input, d_h_prev).
pub fn gru_backward(
    weights: &GruWeights,
    grads: &mut GruWeights,
    cache: &GruCache,
    dh: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hidden = weights.hidden_dim();
    let input_dim = cache.input.len();

    let mut d_input = vec![0.0; input_dim];
    let mut d_h_prev = vec![0.0; hidden];

    // h' = (1-z)h + z c
    let dz: Vec<f64> = (0..hidden)
        .map(|i| dh[i] * (cache.cand[i] - cache.h_prev[i]))
        .collect();
    let dc: Vec<f64> = (0..hidden).map(|i| dh[i] * cache.update[i]).collect();
    for i in 0..hidden {
        d_h_prev[i] += dh[i] * (1.0 - cache.update[i]);
    }

    // candidate: c = tanh(Wc [x; r*h] + bc)
    let da_c: Vec<f64> = (0..hidden)
        .map(|i| dc[i] * (1.0 - cache.cand[i] * cache.cand[i]))
        .collect();
    let gated: Vec<f64> = cache
        .reset
        .iter()
        .zip(&cache.h_prev)
        .map(|(r, h)| r * h)
        .collect();
    let cat_c = concat(&cache.input, &gated);
    grads.w_cand.add_outer(&da_c, &cat_c);
    for (g, d) in grads.b_cand.data.iter_mut().zip(&da_c) {
        *g += d;
    }
    let mut d_cat_c = vec![0.0; input_dim + hidden];
    weights.w_cand.matvec_t_acc(&da_c, &mut d_cat_c);
    for i in 0..input_dim {
        d_input[i] += d_cat_c[i];
    }
    let mut dr = vec![0.0; hidden];
    for i in 0..hidden {
        let d_gated = d_cat_c[input_dim + i];
        dr[i] = d_gated * cache.h_prev[i];
        d_h_prev[i] += d_gated * cache.reset[i];
    }

    // gates: z = sigmoid(a_z), r = sigmoid(a_r), both on [x; h]
    let cat = concat(&cache.input, &cache.h_prev);
    let da_z: Vec<f64> = (0..hidden)
        .map(|i| dz[i] * cache.update[i] * (1.0 - cache.update[i]))
        .collect();
    let da_r: Vec<f64> = (0..hidden)
        .map(|i| dr[i] * cache.reset[i] * (1.0 - cache.reset[i]))
        .collect();
    grads.w_update.add_outer(&da_z, &cat);
    grads.w_reset.add_outer(&da_r, &cat);
    for (g, d) in grads.b_update.data.iter_mut().zip(&da_z) {
        *g += d;
    }
    for (g, d) in grads.b_reset.data.iter_mut().zip(&da_r) {
        *g += d;
    }
    let mut d_cat = vec![0.0; input_dim + hidden];
    weights.w_update.matvec_t_acc(&da_z, &mut d_cat);
    weights.w_reset.matvec_t_acc(&da_r, &mut d_cat);
    for i in 0..input_dim {
        d_input[i] += d_cat[i];
    }
    for i in 0..hidden {
        d_h_prev[i] += d_cat[input_dim + i];
    }

    (d_input, d_h_prev)
}
