//! Forward and backward passes of the translator network.
//!
//! Encoder: two recurrent passes over the frame features (one per
//! direction); the per-frame annotation is the concatenation of both
//! hidden states, with inverted dropout applied during training.
//! Decoder: additive attention over the annotations drives a recurrent
//! cell over target tokens; the output layer maps [state; context] to
//! vocabulary logits.

use rand::RngExt;

use crate::corpus::{PAD, SOS};
use crate::error::{Error, Result};
use crate::select::SeededRng;

use super::cell::{gru_backward, gru_forward, GruCache};
use super::math::{concat, log_softmax, softmax};
use super::{ModelHyper, ModelParams};

/// One training example: frame features (N x input_dim) paired with the
/// target token ids (terminator included, optional trailing padding).
#[derive(Debug, Clone)]
pub struct Example {
    pub frames: Vec<Vec<f64>>,
    pub target: Vec<usize>,
}

/// Encoder output plus everything the backward pass needs.
pub struct Encoded {
    /// Annotations after dropout scaling, one per frame (2*hidden wide).
    pub hs: Vec<Vec<f64>>,
    /// Per-element dropout scale (1/(1-p) kept, 0 dropped, 1 at eval).
    scale: Vec<Vec<f64>>,
    caches_fwd: Vec<GruCache>,
    /// Indexed by original frame position.
    caches_bwd: Vec<GruCache>,
    h_bwd_last: Vec<f64>,
    /// Initial decoder state tanh(W_init h_bwd_last + b_init).
    pub s0: Vec<f64>,
}

pub fn encode(
    hyper: &ModelHyper,
    params: &ModelParams,
    frames: &[Vec<f64>],
    dropout: Option<(&mut SeededRng, f64)>,
) -> Result<Encoded> {
    let n = frames.len();
    if n == 0 {
        return Err(Error::EmptySequence("encoder input has no frames".into()));
    }
    let hidden = hyper.hidden_dim;
    for (t, f) in frames.iter().enumerate() {
        if f.len() != hyper.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "frame {t} has dim {}, model expects {}",
                f.len(),
                hyper.input_dim
            )));
        }
    }

    let mut caches_fwd = Vec::with_capacity(n);
    let mut h_fwd = vec![vec![0.0; hidden]; n];
    let mut h = vec![0.0; hidden];
    for t in 0..n {
        let (next, cache) = gru_forward(&params.enc_fwd, &frames[t], &h);
        caches_fwd.push(cache);
        h_fwd[t] = next.clone();
        h = next;
    }

    let mut caches_bwd: Vec<Option<GruCache>> = (0..n).map(|_| None).collect();
    let mut h_bwd = vec![vec![0.0; hidden]; n];
    let mut h = vec![0.0; hidden];
    for t in (0..n).rev() {
        let (next, cache) = gru_forward(&params.enc_bwd, &frames[t], &h);
        caches_bwd[t] = Some(cache);
        h_bwd[t] = next.clone();
        h = next;
    }
    let h_bwd_last = h_bwd[0].clone();

    let mut hs = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    let mut dropout = dropout;
    for t in 0..n {
        let mut annotation = concat(&h_fwd[t], &h_bwd[t]);
        let mut sc = vec![1.0; 2 * hidden];
        if let Some((ref mut rng, rate)) = dropout {
            if rate > 0.0 {
                let keep = 1.0 - rate;
                for (a, s) in annotation.iter_mut().zip(sc.iter_mut()) {
                    if rng.random::<f64>() < rate {
                        *s = 0.0;
                        *a = 0.0;
                    } else {
                        *s = 1.0 / keep;
                        *a *= *s;
                    }
                }
            }
        }
        hs.push(annotation);
        scale.push(sc);
    }

    let mut pre = params.init_w.matvec(&h_bwd_last);
    for (p, b) in pre.iter_mut().zip(&params.init_b.data) {
        *p += b;
    }
    let s0: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();

    Ok(Encoded {
        hs,
        scale,
        caches_fwd,
        caches_bwd: caches_bwd.into_iter().map(Option::unwrap).collect(),
        h_bwd_last,
        s0,
    })
}

/// Attention scores, weights, and context for one decoder step.
pub struct Attention {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    /// tanh pre-activations, one per frame (attn_dim wide).
    u: Vec<Vec<f64>>,
}

/// score_j = v^T tanh(W_s s + W_h H_j); weights = softmax(scores);
/// context = sum_j weights_j H_j.
pub fn attention(params: &ModelParams, s_prev: &[f64], hs: &[Vec<f64>]) -> Attention {
    let ws_s = params.att_w_s.matvec(s_prev);
    let mut u = Vec::with_capacity(hs.len());
    let mut scores = Vec::with_capacity(hs.len());
    for h in hs {
        let mut pre = params.att_w_h.matvec(h);
        for (p, a) in pre.iter_mut().zip(&ws_s) {
            *p += a;
        }
        let uj: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        scores.push(uj.iter().zip(&params.att_v.data).map(|(a, b)| a * b).sum());
        u.push(uj);
    }
    let weights = softmax(&scores);
    let width = hs[0].len();
    let mut context = vec![0.0; width];
    for (w, h) in weights.iter().zip(hs) {
        for (c, v) in context.iter_mut().zip(h) {
            *c += w * v;
        }
    }
    Attention {
        weights,
        context,
        u,
    }
}

struct StepCache {
    y_prev: usize,
    att: Attention,
    gru: GruCache,
    s: Vec<f64>,
    /// softmax over the vocabulary at this step
    probs: Vec<f64>,
    target: usize,
}

/// Runs the decoder with teacher forcing over one example. Returns the
/// summed negative log likelihood, the token count, and step caches.
fn decode_teacher_forced(
    hyper: &ModelHyper,
    params: &ModelParams,
    enc: &Encoded,
    target: &[usize],
) -> Result<(f64, usize, Vec<StepCache>)> {
    let eff_len = target
        .iter()
        .rposition(|&t| t != PAD)
        .map_or(0, |p| p + 1);
    if eff_len > hyper.max_target_len {
        return Err(Error::SequenceTooLong {
            len: eff_len,
            max: hyper.max_target_len,
        });
    }
    for &tok in &target[..eff_len] {
        if tok >= hyper.vocab_size {
            return Err(Error::ShapeMismatch(format!(
                "token id {tok} outside vocab of size {}",
                hyper.vocab_size
            )));
        }
    }

    let mut steps = Vec::with_capacity(eff_len);
    let mut nll = 0.0;
    let mut s = enc.s0.clone();
    for i in 0..eff_len {
        let y_prev = if i == 0 { SOS } else { target[i - 1] };
        let att = attention(params, &s, &enc.hs);
        let x = concat(params.embed.row(y_prev), &att.context);
        let (s_next, gru) = gru_forward(&params.dec, &x, &s);
        let out_in = concat(&s_next, &att.context);
        let mut logits = params.out_w.matvec(&out_in);
        for (l, b) in logits.iter_mut().zip(&params.out_b.data) {
            *l += b;
        }
        nll -= log_softmax(&logits)[target[i]];
        let probs = softmax(&logits);
        steps.push(StepCache {
            y_prev,
            att,
            gru,
            s: s_next.clone(),
            probs,
            target: target[i],
        });
        s = s_next;
    }
    Ok((nll, eff_len, steps))
}

/// Mean cross-entropy over all non-padding target tokens in the batch.
pub fn forward_loss(
    hyper: &ModelHyper,
    params: &ModelParams,
    batch: &[Example],
    mut dropout: Option<(&mut SeededRng, f64)>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total_nll = 0.0;
    let mut total_tokens = 0usize;
    for ex in batch {
        let enc = encode(
            hyper,
            params,
            &ex.frames,
            dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate)),
        )?;
        let (nll, count, _) = decode_teacher_forced(hyper, params, &enc, &ex.target)?;
        total_nll += nll;
        total_tokens += count;
    }
    if total_tokens == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(total_nll / total_tokens as f64)
}

/// Loss plus gradients of the loss with respect to every parameter.
pub fn forward_backward(
    hyper: &ModelHyper,
    params: &ModelParams,
    batch: &[Example],
    mut dropout: Option<(&mut SeededRng, f64)>,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hidden = hyper.hidden_dim;

    // First pass: forward everything and count tokens so gradients can
    // be scaled by 1/M as they are accumulated.
    let mut encoded = Vec::with_capacity(batch.len());
    let mut decoded = Vec::with_capacity(batch.len());
    let mut total_nll = 0.0;
    let mut total_tokens = 0usize;
    for ex in batch {
        let enc = encode(
            hyper,
            params,
            &ex.frames,
            dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate)),
        )?;
        let (nll, count, steps) = decode_teacher_forced(hyper, params, &enc, &ex.target)?;
        total_nll += nll;
        total_tokens += count;
        encoded.push(enc);
        decoded.push(steps);
    }
    if total_tokens == 0 {
        return Err(Error::EmptyBatch);
    }
    let inv_m = 1.0 / total_tokens as f64;

    let mut grads = ModelParams::zeros(hyper);
    for (enc, steps) in encoded.iter().zip(&decoded) {
        let n = enc.hs.len();
        let mut d_hs = vec![vec![0.0; 2 * hidden]; n];
        let mut ds_carry = vec![0.0; hidden];

        for (i, step) in steps.iter().enumerate().rev() {
            // output layer
            let mut d_logits = step.probs.clone();
            d_logits[step.target] -= 1.0;
            for v in d_logits.iter_mut() {
                *v *= inv_m;
            }
            let out_in = concat(&step.s, &step.att.context);
            grads.out_w.add_outer(&d_logits, &out_in);
            for (g, d) in grads.out_b.data.iter_mut().zip(&d_logits) {
                *g += d;
            }
            let mut d_out_in = vec![0.0; 3 * hidden];
            params.out_w.matvec_t_acc(&d_logits, &mut d_out_in);

            let mut ds: Vec<f64> = d_out_in[..hidden].to_vec();
            for (a, b) in ds.iter_mut().zip(&ds_carry) {
                *a += b;
            }
            let mut d_ctx: Vec<f64> = d_out_in[hidden..].to_vec();

            // decoder cell
            let (d_x, d_s_prev) = gru_backward(&params.dec, &mut grads.dec, &step.gru, &ds);
            let embed_dim = hyper.embed_dim;
            for (g, d) in grads
                .embed
                .row_mut(step.y_prev)
                .iter_mut()
                .zip(&d_x[..embed_dim])
            {
                *g += d;
            }
            for (a, b) in d_ctx.iter_mut().zip(&d_x[embed_dim..]) {
                *a += b;
            }

            // attention: context and softmax-weighted scores
            let s_prev = if i == 0 { &enc.s0 } else { &steps[i - 1].s };
            let att = &step.att;
            let mut da = vec![0.0; n];
            for j in 0..n {
                da[j] = d_ctx.iter().zip(&enc.hs[j]).map(|(a, b)| a * b).sum();
                let w = att.weights[j];
                for (dh, c) in d_hs[j].iter_mut().zip(&d_ctx) {
                    *dh += w * c;
                }
            }
            let dot: f64 = att.weights.iter().zip(&da).map(|(w, d)| w * d).sum();
            let mut ds_prev_att = vec![0.0; hidden];
            for j in 0..n {
                let de = att.weights[j] * (da[j] - dot);
                if de == 0.0 {
                    continue;
                }
                let uj = &att.u[j];
                for (g, u) in grads.att_v.data.iter_mut().zip(uj) {
                    *g += de * u;
                }
                let dpre: Vec<f64> = uj
                    .iter()
                    .zip(&params.att_v.data)
                    .map(|(u, v)| de * v * (1.0 - u * u))
                    .collect();
                grads.att_w_s.add_outer(&dpre, s_prev);
                grads.att_w_h.add_outer(&dpre, &enc.hs[j]);
                params.att_w_s.matvec_t_acc(&dpre, &mut ds_prev_att);
                params.att_w_h.matvec_t_acc(&dpre, &mut d_hs[j]);
            }

            ds_carry = d_s_prev;
            for (a, b) in ds_carry.iter_mut().zip(&ds_prev_att) {
                *a += b;
            }
        }

        // decoder init state s0 = tanh(W_init h_bwd_last + b_init)
        let mut d_h_bwd_last = vec![0.0; hidden];
        if !steps.is_empty() {
            let da: Vec<f64> = ds_carry
                .iter()
                .zip(&enc.s0)
                .map(|(d, s)| d * (1.0 - s * s))
                .collect();
            grads.init_w.add_outer(&da, &enc.h_bwd_last);
            for (g, d) in grads.init_b.data.iter_mut().zip(&da) {
                *g += d;
            }
            params.init_w.matvec_t_acc(&da, &mut d_h_bwd_last);
        }

        // undo dropout scaling, split annotations per direction
        let mut dh_fwd = vec![vec![0.0; hidden]; n];
        let mut dh_bwd = vec![vec![0.0; hidden]; n];
        for t in 0..n {
            for k in 0..hidden {
                dh_fwd[t][k] = d_hs[t][k] * enc.scale[t][k];
                dh_bwd[t][k] = d_hs[t][hidden + k] * enc.scale[t][hidden + k];
            }
        }

        // forward-direction encoder unrolls t = 0..n, so backprop runs
        // from the last frame down
        let mut carry = vec![0.0; hidden];
        for t in (0..n).rev() {
            let mut dh = dh_fwd[t].clone();
            for (a, b) in dh.iter_mut().zip(&carry) {
                *a += b;
            }
            let (_, d_h_prev) =
                gru_backward(&params.enc_fwd, &mut grads.enc_fwd, &enc.caches_fwd[t], &dh);
            carry = d_h_prev;
        }

        // backward-direction encoder unrolls t = n-1..0; its final state
        // (at frame 0) also feeds the decoder init
        let mut carry = d_h_bwd_last;
        for t in 0..n {
            let mut dh = dh_bwd[t].clone();
            for (a, b) in dh.iter_mut().zip(&carry) {
                *a += b;
            }
            let (_, d_h_prev) =
                gru_backward(&params.enc_bwd, &mut grads.enc_bwd, &enc.caches_bwd[t], &dh);
            carry = d_h_prev;
        }
    }

    Ok((total_nll / total_tokens as f64, grads))
}
