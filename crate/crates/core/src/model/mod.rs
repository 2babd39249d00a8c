//! Sequence-to-sequence translator: bidirectional recurrent encoder over
//! frame features, additive-attention recurrent decoder over tokens.
//! Forward, backward, and optimization are all implemented directly on
//! dense f64 matrices.

pub mod adam;
pub mod cell;
pub mod checkpoint;
pub mod math;
pub mod net;
pub mod train;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::select::SeededRng;
use cell::GruWeights;
use math::Mat;

/// Architecture sizes. `input_dim` is the per-frame feature width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub max_target_len: usize,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            input_dim: crate::keypoint::FEATURE_DIM,
            hidden_dim: 64,
            embed_dim: 32,
            attn_dim: 64,
            vocab_size: 0,
            dropout_rate: 0.5,
            max_target_len: 30,
        }
    }
}

impl ModelHyper {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.hidden_dim == 0
            || self.embed_dim == 0
            || self.attn_dim == 0
            || self.max_target_len == 0
        {
            return Err(Error::ConfigInvalid(
                "model dimensions must be positive".into(),
            ));
        }
        if self.vocab_size <= crate::corpus::RESERVED.len() {
            return Err(Error::ConfigInvalid(format!(
                "vocab size {} leaves no real tokens",
                self.vocab_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::ConfigInvalid(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// All learnable tensors. Encoder states are `hidden_dim` wide in each
/// direction; the decoder attends over the 2*hidden concatenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub enc_fwd: GruWeights,
    pub enc_bwd: GruWeights,
    pub dec: GruWeights,
    /// decoder init: s0 = tanh(W_init h_bwd_final + b_init)
    pub init_w: Mat,
    pub init_b: Mat,
    pub att_w_s: Mat,
    pub att_w_h: Mat,
    pub att_v: Mat,
    pub embed: Mat,
    pub out_w: Mat,
    pub out_b: Mat,
}

impl ModelParams {
    pub fn zeros(hyper: &ModelHyper) -> Self {
        let h = hyper.hidden_dim;
        ModelParams {
            enc_fwd: GruWeights::zeros(hyper.input_dim, h),
            enc_bwd: GruWeights::zeros(hyper.input_dim, h),
            dec: GruWeights::zeros(hyper.embed_dim + 2 * h, h),
            init_w: Mat::zeros(h, h),
            init_b: Mat::zeros(h, 1),
            att_w_s: Mat::zeros(hyper.attn_dim, h),
            att_w_h: Mat::zeros(hyper.attn_dim, 2 * h),
            att_v: Mat::zeros(hyper.attn_dim, 1),
            embed: Mat::zeros(hyper.vocab_size, hyper.embed_dim),
            out_w: Mat::zeros(hyper.vocab_size, 3 * h),
            out_b: Mat::zeros(hyper.vocab_size, 1),
        }
    }

    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for matrices;
    /// biases start at zero.
    pub fn init(hyper: &ModelHyper, rng: &mut SeededRng) -> Self {
        let mut p = ModelParams::zeros(hyper);
        for (name, m) in p.tensors_mut() {
            if name.starts_with('b') || name.ends_with("_b") || name.contains(".b_") {
                continue;
            }
            let bound = 1.0 / (m.cols as f64).sqrt();
            for v in m.data.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    /// Named views of every tensor, in a fixed order shared by the
    /// optimizer, checkpoints, and gradient checks.
    pub fn tensors(&self) -> Vec<(&'static str, &Mat)> {
        vec![
            ("enc_fwd.w_update", &self.enc_fwd.w_update),
            ("enc_fwd.w_reset", &self.enc_fwd.w_reset),
            ("enc_fwd.w_cand", &self.enc_fwd.w_cand),
            ("enc_fwd.b_update", &self.enc_fwd.b_update),
            ("enc_fwd.b_reset", &self.enc_fwd.b_reset),
            ("enc_fwd.b_cand", &self.enc_fwd.b_cand),
            ("enc_bwd.w_update", &self.enc_bwd.w_update),
            ("enc_bwd.w_reset", &self.enc_bwd.w_reset),
            ("enc_bwd.w_cand", &self.enc_bwd.w_cand),
            ("enc_bwd.b_update", &self.enc_bwd.b_update),
            ("enc_bwd.b_reset", &self.enc_bwd.b_reset),
            ("enc_bwd.b_cand", &self.enc_bwd.b_cand),
            ("dec.w_update", &self.dec.w_update),
            ("dec.w_reset", &self.dec.w_reset),
            ("dec.w_cand", &self.dec.w_cand),
            ("dec.b_update", &self.dec.b_update),
            ("dec.b_reset", &self.dec.b_reset),
            ("dec.b_cand", &self.dec.b_cand),
            ("init_w", &self.init_w),
            ("init_b", &self.init_b),
            ("att_w_s", &self.att_w_s),
            ("att_w_h", &self.att_w_h),
            ("att_v", &self.att_v),
            ("embed", &self.embed),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        vec![
            ("enc_fwd.w_update", &mut self.enc_fwd.w_update),
            ("enc_fwd.w_reset", &mut self.enc_fwd.w_reset),
            ("enc_fwd.w_cand", &mut self.enc_fwd.w_cand),
            ("enc_fwd.b_update", &mut self.enc_fwd.b_update),
            ("enc_fwd.b_reset", &mut self.enc_fwd.b_reset),
            ("enc_fwd.b_cand", &mut self.enc_fwd.b_cand),
            ("enc_bwd.w_update", &mut self.enc_bwd.w_update),
            ("enc_bwd.w_reset", &mut self.enc_bwd.w_reset),
            ("enc_bwd.w_cand", &mut self.enc_bwd.w_cand),
            ("enc_bwd.b_update", &mut self.enc_bwd.b_update),
            ("enc_bwd.b_reset", &mut self.enc_bwd.b_reset),
            ("enc_bwd.b_cand", &mut self.enc_bwd.b_cand),
            ("dec.w_update", &mut self.dec.w_update),
            ("dec.w_reset", &mut self.dec.w_reset),
            ("dec.w_cand", &mut self.dec.w_cand),
            ("dec.b_update", &mut self.dec.b_update),
            ("dec.b_reset", &mut self.dec.b_reset),
            ("dec.b_cand", &mut self.dec.b_cand),
            ("init_w", &mut self.init_w),
            ("init_b", &mut self.init_b),
            ("att_w_s", &mut self.att_w_s),
            ("att_w_h", &mut self.att_w_h),
            ("att_v", &mut self.att_v),
            ("embed", &mut self.embed),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Present the encoder input back-to-front.
    pub reverse_frames: bool,
    /// Stop once the mean epoch loss falls below this, if set.
    pub early_stop_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 7,
            reverse_frames: false,
            early_stop_loss: None,
        }
    }
}
