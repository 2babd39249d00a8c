//! Training loop and greedy decoding.

use rand::RngExt;

use crate::corpus::{EOS, SOS};
use crate::error::{Error, Result};
use crate::select::seeded_rng;

use super::adam::{adam_step, AdamState};
use super::cell::gru_forward;
use super::math::concat;
use super::net::{attention, encode, forward_backward, Example};
use super::{ModelHyper, ModelParams, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
}

/// Mini-batch gradient descent with Adam. Shuffling, dropout, and
/// initialization all draw from one stream seeded by `cfg.seed`, so a
/// run is a pure function of (data, config).
pub fn train(
    hyper: &ModelHyper,
    params: &mut ModelParams,
    examples: &[Example],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    hyper.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.batch_size == 0 {
        return Err(Error::ConfigInvalid("batch size must be positive".into()));
    }
    let data: Vec<Example> = if cfg.reverse_frames {
        examples
            .iter()
            .map(|ex| Example {
                frames: ex.frames.iter().rev().cloned().collect(),
                target: ex.target.clone(),
            })
            .collect()
    } else {
        examples.to_vec()
    };

    let mut rng = seeded_rng(cfg.seed);
    let mut state = AdamState::new(params);
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| data[i].clone()).collect();
            let dropout = if hyper.dropout_rate > 0.0 {
                Some((&mut rng, hyper.dropout_rate))
            } else {
                None
            };
            let (loss, grads) = forward_backward(hyper, params, &batch, dropout)?;
            adam_step(params, &grads, &mut state, cfg)?;
            loss_sum += loss;
            batches += 1;
        }
        let log = EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / batches as f64,
        };
        on_epoch(&log);
        let stop = cfg.early_stop_loss.is_some_and(|t| log.loss < t);
        logs.push(log);
        if stop {
            break;
        }
    }
    Ok(logs)
}

/// Greedy decoding: at each step emit the argmax token (ties resolve to
/// the lowest id) until the terminator or the length cap. The terminator
/// itself is not returned.
pub fn greedy_decode(
    hyper: &ModelHyper,
    params: &ModelParams,
    frames: &[Vec<f64>],
) -> Result<Vec<usize>> {
    let enc = encode(hyper, params, frames, None)?;
    let mut s = enc.s0.clone();
    let mut y_prev = SOS;
    let mut out = Vec::new();
    for _ in 0..hyper.max_target_len {
        let att = attention(params, &s, &enc.hs);
        let x = concat(params.embed.row(y_prev), &att.context);
        let (s_next, _) = gru_forward(&params.dec, &x, &s);
        let out_in = concat(&s_next, &att.context);
        let mut logits = params.out_w.matvec(&out_in);
        for (l, b) in logits.iter_mut().zip(&params.out_b.data) {
            *l += b;
        }
        let mut best = 0usize;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
        y_prev = best;
        s = s_next;
    }
    Ok(out)
}
