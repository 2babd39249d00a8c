//! SASS frame selection: binomial-mixture priority distributions, median
//! reordering, stochastic augmentation, skip sampling, and the baseline
//! selectors used for comparison.
//!
//! When a video is shorter than the target length N, frames are duplicated
//! with priorities drawn from the reordered mixture distribution; when it
//! is longer, an arithmetic-progression skip sampler with uniform jitter
//! picks N frames.

use rand::{Rng, RngExt, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::keypoint::KeypointVideo;

/// Deterministic generator used by all randomized selectors.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent per-video stream derived from the corpus seed and video id.
pub fn video_rng(corpus_seed: u64, video_id: &str) -> SeededRng {
    let mut hasher = Sha256::new();
    hasher.update(corpus_seed.to_le_bytes());
    hasher.update(video_id.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seeded_rng(u64::from_le_bytes(bytes))
}

/// A probability vector over the frame indices 0..T-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDistribution {
    pub probs: Vec<f64>,
}

impl SelectionDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// The symmetric set of binomial parameters {1/2} u {1/(m+2), (m+1)/(m+2)}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilitySet {
    /// Sorted fractions (numerator, denominator) in (0, 1).
    pub fractions: Vec<(u64, u64)>,
}

impl ProbabilitySet {
    pub fn l_p(&self) -> usize {
        self.fractions.len()
    }

    pub fn values(&self) -> Vec<f64> {
        self.fractions
            .iter()
            .map(|&(num, den)| num as f64 / den as f64)
            .collect()
    }
}

/// Probability set of size l_p = 2n + 1, built by the recursion that adds
/// {1/(m+2), (m+1)/(m+2)} at each step.
pub fn probability_set(l_p: usize) -> Result<ProbabilitySet> {
    if l_p == 0 || l_p % 2 == 0 {
        return Err(Error::InvalidLp(l_p));
    }
    let n = (l_p - 1) / 2;
    let mut fractions = vec![(1u64, 2u64)];
    for m in 1..=n as u64 {
        fractions.push((1, m + 2));
        fractions.push((m + 1, m + 2));
    }
    fractions.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    Ok(ProbabilitySet { fractions })
}

fn binomial_coeff_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// pmf of Binomial(T-1, p) over k = 0..T-1. Exact integer binomial
/// coefficients up to T = 65, log-space above to avoid overflow.
pub fn binomial_pmf_row(t: usize, p: f64) -> Result<SelectionDistribution> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if t == 0 {
        return Err(Error::InvalidN(0));
    }
    let n = t - 1;
    let probs = if t <= 65 {
        (0..t)
            .map(|k| {
                binomial_coeff_u128(n, k) as f64 * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
            })
            .collect()
    } else {
        // ln k! as a prefix sum
        let mut ln_fact = vec![0.0f64; t];
        for i in 1..t {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        (0..t)
            .map(|k| {
                let ln_c = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
                (ln_c + k as f64 * lp + (n - k) as f64 * lq).exp()
            })
            .collect()
    };
    Ok(SelectionDistribution { probs })
}

/// Average of the binomial pmf rows over every p in the probability set.
pub fn mixture_distribution(t: usize, l_p: usize) -> Result<SelectionDistribution> {
    let set = probability_set(l_p)?;
    let mut probs = vec![0.0; t];
    for p in set.values() {
        let row = binomial_pmf_row(t, p)?;
        for (acc, v) in probs.iter_mut().zip(row.probs) {
            *acc += v;
        }
    }
    let scale = 1.0 / l_p as f64;
    for v in probs.iter_mut() {
        *v *= scale;
    }
    Ok(SelectionDistribution { probs })
}

/// Permute a distribution into a unimodal shape: ascending up to the
/// middle index, descending after. Sorted values are dealt alternately to
/// the left half (filled left to right) and the right half (filled right
/// to left), so the largest values land in the middle.
pub fn median_reorder(dist: &SelectionDistribution) -> SelectionDistribution {
    let mut sorted = dist.probs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let t = sorted.len();
    let mut out = vec![0.0; t];
    let mut left = 0usize;
    let mut right = t;
    for (i, v) in sorted.into_iter().enumerate() {
        if i % 2 == 0 {
            out[left] = v;
            left += 1;
        } else {
            right -= 1;
            out[right] = v;
        }
    }
    SelectionDistribution { probs: out }
}

/// Fourth standardized moment of the index distribution.
pub fn kurtosis(dist: &SelectionDistribution) -> Result<f64> {
    if dist.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let mean: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| p * k as f64)
        .sum();
    let var: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| p * (k as f64 - mean).powi(2))
        .sum();
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let m4: f64 = dist
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| p * (k as f64 - mean).powi(4))
        .sum();
    Ok(m4 / (var * var))
}

/// Inverse-CDF draw: maps u in [0,1) to an index of the distribution.
pub fn sample_index(dist: &SelectionDistribution, u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.len() - 1
}

/// Duplicate N - T frames, with duplication slots drawn i.i.d. from the
/// median-reordered distribution. Every original frame is kept, duplicates
/// sit adjacent to their source, temporal order is preserved.
pub fn stochastic_augment(
    video: &KeypointVideo,
    n: usize,
    dist: &SelectionDistribution,
    rng: &mut impl Rng,
) -> Result<KeypointVideo> {
    let t = video.frame_count();
    if dist.len() != t {
        return Err(Error::LengthMismatch(format!(
            "distribution length {} != video length {}",
            dist.len(),
            t
        )));
    }
    if t > n {
        return Err(Error::LengthMismatch(format!(
            "augmentation requires T <= N, got T={t}, N={n}"
        )));
    }
    let reordered = median_reorder(dist);
    let mut draws = Vec::with_capacity(n - t);
    for _ in 0..(n - t) {
        draws.push(sample_index(&reordered, rng.random::<f64>()));
    }
    Ok(augment_with_draws(video, &draws))
}

/// Deterministic core of the augmenters: each drawn index duplicates its
/// frame once, adjacent to the original.
pub fn augment_with_draws(video: &KeypointVideo, draws: &[usize]) -> KeypointVideo {
    let t = video.frame_count();
    let mut counts = vec![1usize; t];
    for &k in draws {
        counts[k] += 1;
    }
    let mut frames = Vec::with_capacity(t + draws.len());
    for (k, frame) in video.frames.iter().enumerate() {
        for _ in 0..counts[k] {
            frames.push(frame.clone());
        }
    }
    KeypointVideo {
        id: video.id.clone(),
        frames,
    }
}

/// Skip-sampling plan: stride, centered start offset, and per-element
/// jitter in [1, stride]. Final indices are 1-based and clamped to [1, T].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipPlan {
    pub stride: usize,
    pub start: usize,
    pub base_indices: Vec<usize>,
    pub jitter: Vec<usize>,
}

impl SkipPlan {
    /// Final 1-based frame indices, clamped and non-decreasing.
    pub fn indices(&self, t: usize) -> Vec<usize> {
        self.base_indices
            .iter()
            .zip(&self.jitter)
            .map(|(&b, &r)| (b + r).clamp(1, t))
            .collect()
    }
}

/// Build a skip plan from explicit jitter values (the stride is labelled
/// z in prose and c in the defining equation; it is `stride` here).
pub fn skip_plan(t: usize, n: usize, jitter: Vec<usize>) -> Result<SkipPlan> {
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    if t < n {
        return Err(Error::TooShort { t, n });
    }
    if jitter.len() != n {
        return Err(Error::LengthMismatch(format!(
            "jitter length {} != N={n}",
            jitter.len()
        )));
    }
    let stride = t / (n - 1);
    let start = (t - stride * (n - 1)) / 2;
    if jitter.iter().any(|&r| r < 1 || r > stride) {
        return Err(Error::LengthMismatch(format!(
            "jitter values must lie in [1, {stride}]"
        )));
    }
    let base_indices = (0..n).map(|k| start + k * stride).collect();
    Ok(SkipPlan {
        stride,
        start,
        base_indices,
        jitter,
    })
}

/// Pick N of T frames along an arithmetic progression with uniform jitter.
pub fn skip_sample(video: &KeypointVideo, n: usize, rng: &mut impl Rng) -> Result<KeypointVideo> {
    let t = video.frame_count();
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    if t < n {
        return Err(Error::TooShort { t, n });
    }
    let stride = t / (n - 1);
    let jitter: Vec<usize> = (0..n).map(|_| rng.random_range(1..=stride)).collect();
    let plan = skip_plan(t, n, jitter)?;
    let frames = plan
        .indices(t)
        .into_iter()
        .map(|i| video.frames[i - 1].clone())
        .collect();
    Ok(KeypointVideo {
        id: video.id.clone(),
        frames,
    })
}

/// Sample N distinct frame indices without replacement, weighted by the
/// median-reordered distribution; frames are emitted in temporal order.
pub fn stochastic_sample(
    video: &KeypointVideo,
    n: usize,
    dist: &SelectionDistribution,
    rng: &mut impl Rng,
) -> Result<KeypointVideo> {
    let t = video.frame_count();
    if dist.len() != t {
        return Err(Error::LengthMismatch(format!(
            "distribution length {} != video length {}",
            dist.len(),
            t
        )));
    }
    if t < n {
        return Err(Error::TooShort { t, n });
    }
    let reordered = median_reorder(dist);
    let mut weights = reordered.probs;
    let mut chosen = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = weights.len() - 1;
        for (k, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc && w > 0.0 {
                pick = k;
                break;
            }
        }
        // guard against landing on an already-removed zero-weight slot
        if weights[pick] == 0.0 {
            pick = weights.iter().position(|&w| w > 0.0).unwrap_or(pick);
        }
        weights[pick] = 0.0;
        chosen.push(pick);
    }
    chosen.sort_unstable();
    let frames = chosen.iter().map(|&k| video.frames[k].clone()).collect();
    Ok(KeypointVideo {
        id: video.id.clone(),
        frames,
    })
}

/// Uniform selection of N distinct frames, temporal order preserved.
pub fn random_sample(video: &KeypointVideo, n: usize, rng: &mut impl Rng) -> Result<KeypointVideo> {
    let t = video.frame_count();
    if t < n {
        return Err(Error::TooShort { t, n });
    }
    let mut indices: Vec<usize> = (0..t).collect();
    // partial Fisher-Yates: the first n entries become the sample
    for i in 0..n {
        let j = rng.random_range(i..t);
        indices.swap(i, j);
    }
    let mut chosen = indices[..n].to_vec();
    chosen.sort_unstable();
    let frames = chosen.iter().map(|&k| video.frames[k].clone()).collect();
    Ok(KeypointVideo {
        id: video.id.clone(),
        frames,
    })
}

/// Uniform with-replacement duplication up to N frames.
pub fn random_augment(
    video: &KeypointVideo,
    n: usize,
    rng: &mut impl Rng,
) -> Result<KeypointVideo> {
    let t = video.frame_count();
    if t > n {
        return Err(Error::LengthMismatch(format!(
            "augmentation requires T <= N, got T={t}, N={n}"
        )));
    }
    let draws: Vec<usize> = (0..(n - t)).map(|_| rng.random_range(0..t)).collect();
    Ok(augment_with_draws(video, &draws))
}

/// The combined selector: stochastic augmentation below N, skip sampling
/// above, identity at exactly N.
pub fn sass(
    video: &KeypointVideo,
    n: usize,
    l_p: usize,
    rng: &mut impl Rng,
) -> Result<KeypointVideo> {
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    let t = video.frame_count();
    if t == n {
        Ok(video.clone())
    } else if t < n {
        let dist = mixture_distribution(t, l_p)?;
        stochastic_augment(video, n, &dist, rng)
    } else {
        skip_sample(video, n, rng)
    }
}

/// Selector choice for the pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Sass,
    Skip,
    StochasticSample,
    RandomSample,
    StochasticAugment,
    RandomAugment,
}

impl Selector {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sass" => Ok(Self::Sass),
            "skip" => Ok(Self::Skip),
            "stochastic_sample" => Ok(Self::StochasticSample),
            "random_sample" => Ok(Self::RandomSample),
            "stochastic_augment" => Ok(Self::StochasticAugment),
            "random_augment" => Ok(Self::RandomAugment),
            other => Err(Error::ConfigInvalid(format!("unknown selector '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sass => "sass",
            Self::Skip => "skip",
            Self::StochasticSample => "stochastic_sample",
            Self::RandomSample => "random_sample",
            Self::StochasticAugment => "stochastic_augment",
            Self::RandomAugment => "random_augment",
        }
    }
}

/// Resize a video to exactly N frames using the chosen selector. Pure
/// samplers do not fall back to augmentation: a too-short video under a
/// sampler is an error, matching the per-selector contracts.
pub fn apply_selector(
    video: &KeypointVideo,
    selector: Selector,
    n: usize,
    l_p: usize,
    rng: &mut impl Rng,
) -> Result<KeypointVideo> {
    let t = video.frame_count();
    match selector {
        Selector::Sass => sass(video, n, l_p, rng),
        Selector::Skip => {
            if t == n {
                Ok(video.clone())
            } else {
                skip_sample(video, n, rng)
            }
        }
        Selector::StochasticSample => {
            let dist = mixture_distribution(t, l_p)?;
            stochastic_sample(video, n, &dist, rng)
        }
        Selector::RandomSample => random_sample(video, n, rng),
        Selector::StochasticAugment => {
            let dist = mixture_distribution(t, l_p)?;
            stochastic_augment(video, n, &dist, rng)
        }
        Selector::RandomAugment => random_augment(video, n, rng),
    }
}
