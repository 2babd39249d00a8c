//! Tokenization, vocabulary, dataset manifests, and a synthetic
//! keypoint-language generator for desk-scale end-to-end runs.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keypoint::NUM_KEYPOINTS;
use crate::metrics::TokenSeq;
use crate::select::seeded_rng;

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Token table with the four reserved ids fixed at the front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.id_to_token.get(id).map_or("<unk>", |s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Token ids with EOS appended.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens.iter().map(|t| self.id(t)).collect();
        ids.push(EOS);
        ids
    }

    /// Tokens up to (and excluding) the first EOS; reserved ids dropped.
    pub fn decode(&self, ids: &[usize]) -> TokenSeq {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id >= RESERVED.len() || id == UNK)
            .map(|&id| self.token(id).to_string())
            .collect()
    }
}

/// Split on Unicode whitespace and lowercase.
pub fn tokenize_whitespace(text: &str) -> TokenSeq {
    text.split_whitespace()
        .map(|t| t.to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Build a vocabulary from tokenized sentences. Tokens below `min_count`
/// stay unknown; the rest are ordered by descending frequency, ties
/// broken lexicographically.
pub fn build_vocab(sentences: &[TokenSeq], min_count: usize) -> Vocab {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sent in sentences {
        for tok in sent {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocab::from_tokens(entries.into_iter().map(|(t, _)| t.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(Error::ConfigInvalid(format!("unknown split '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub video_id: String,
    pub keypoint_path: PathBuf,
    pub sentence: String,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn rows_for(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }
}

/// Load a 4-column TSV manifest: video_id, keypoint_path, sentence, split.
/// Relative keypoint paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut rows = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedManifest {
            path: path.display().to_string(),
            row: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(malformed(format!("expected 4 columns, found {}", cols.len())));
        }
        if !seen_ids.insert(cols[0].to_string()) {
            return Err(malformed(format!("duplicate video_id '{}'", cols[0])));
        }
        let raw_path = Path::new(cols[1]);
        let keypoint_path = if raw_path.is_absolute() {
            raw_path.to_path_buf()
        } else {
            base.join(raw_path)
        };
        if !keypoint_path.exists() {
            return Err(malformed(format!(
                "keypoint file not found: {}",
                keypoint_path.display()
            )));
        }
        rows.push(ManifestRow {
            video_id: cols[0].to_string(),
            keypoint_path,
            sentence: cols[2].to_string(),
            split: Split::parse(cols[3])
                .map_err(|_| malformed(format!("unknown split '{}'", cols[3])))?,
        });
    }
    Ok(Manifest { rows })
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for row in rows {
        writeln!(
            file,
            "{}\t{}\t{}\t{}",
            row.video_id,
            row.keypoint_path.display(),
            row.sentence,
            row.split.name()
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Parameters of the synthetic keypoint-language corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    pub videos: usize,
    pub frames_per_token: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 20,
            min_sentence_len: 2,
            max_sentence_len: 5,
            videos: 200,
            frames_per_token: 3,
            noise_sigma: 0.5,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.videos == 0
            || self.frames_per_token == 0
            || self.min_sentence_len == 0
        {
            return Err(Error::ConfigInvalid("synth sizes must be positive".into()));
        }
        if self.max_sentence_len < self.min_sentence_len {
            return Err(Error::ConfigInvalid(
                "max_sentence_len < min_sentence_len".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::ConfigInvalid("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// A 21-point hand constellation prototype for one vocabulary token.
/// Shapes are seeded per token and rejected if any pair of prototypes
/// comes closer than the separation floor, so the noisy renditions stay
/// distinguishable after per-hand min-max normalization.
fn hand_prototype(token_idx: usize, rng_seed: u64) -> [(f64, f64); 21] {
    let mut rng = seeded_rng(rng_seed ^ (token_idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut pts = [(0.0, 0.0); 21];
    for p in pts.iter_mut() {
        *p = (rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0);
    }
    pts
}

fn constellation_distance(a: &[(f64, f64); 21], b: &[(f64, f64); 21]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
        .sum::<f64>()
        / 21.0
}

/// Per-token hand shapes, regenerated (bumping the per-token salt) until
/// all pairs are at least `min_sep` apart.
pub fn token_prototypes(vocab_size: usize, seed: u64, min_sep: f64) -> Vec<[(f64, f64); 21]> {
    let mut protos: Vec<[(f64, f64); 21]> = Vec::with_capacity(vocab_size);
    for t in 0..vocab_size {
        let mut salt = 0u64;
        loop {
            let candidate = hand_prototype(t, seed.wrapping_add(salt << 32));
            if protos
                .iter()
                .all(|p| constellation_distance(p, &candidate) >= min_sep)
            {
                protos.push(candidate);
                break;
            }
            salt += 1;
        }
    }
    protos
}

/// Fixed upper-body pose shared by every synthetic frame, in a 640x480
/// image space.
fn body_points() -> [(f64, f64); 13] {
    [
        (320.0, 100.0), // nose
        (310.0, 90.0),  // left eye
        (330.0, 90.0),  // right eye
        (295.0, 95.0),  // left ear
        (345.0, 95.0),  // right ear
        (260.0, 160.0), // left shoulder
        (380.0, 160.0), // right shoulder
        (240.0, 230.0), // left elbow
        (400.0, 230.0), // right elbow
        (230.0, 300.0), // left wrist
        (410.0, 300.0), // right wrist
        (320.0, 70.0),  // head
        (320.0, 150.0), // neck
    ]
}

/// Generate keypoint JSONL files plus a manifest. Each token of a
/// sentence holds its hand constellation for `frames_per_token` frames
/// with Gaussian coordinate noise; consecutive tokens are separated by
/// one neutral rest-pose frame so segment boundaries are observable;
/// splits are an 8:1:1 seeded shuffle.
pub fn synth_generate(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let kp_dir = out_dir.join("keypoints");
    std::fs::create_dir_all(&kp_dir).map_err(|e| Error::io(kp_dir.display().to_string(), e))?;

    let min_sep = 10.0 * config.noise_sigma;
    // one extra constellation beyond the vocabulary: the rest pose shown
    // between token segments
    let protos = token_prototypes(config.vocab_size + 1, config.seed, min_sep.max(5.0));
    let rest = config.vocab_size;
    let body = body_points();
    let mut rng = seeded_rng(config.seed);

    let mut rows = Vec::with_capacity(config.videos);
    for v in 0..config.videos {
        let len = rng.random_range(config.min_sentence_len..=config.max_sentence_len);
        let tokens: Vec<usize> = (0..len)
            .map(|_| rng.random_range(0..config.vocab_size))
            .collect();
        let sentence: Vec<String> = tokens.iter().map(|&t| format!("w{t:02}")).collect();

        let video_id = format!("synth{v:04}");
        let file_path = kp_dir.join(format!("{video_id}.jsonl"));
        let mut file =
            File::create(&file_path).map_err(|e| Error::io(file_path.display().to_string(), e))?;
        // rest-pose lead-in/out keeps edge tokens inside the window that
        // centered skip sampling retains on long videos
        let pad = config.frames_per_token + 1;
        let mut schedule = vec![rest; pad];
        for (i, &tok) in tokens.iter().enumerate() {
            if i > 0 {
                schedule.push(rest);
            }
            schedule.extend(std::iter::repeat_n(tok, config.frames_per_token));
        }
        schedule.extend(std::iter::repeat_n(rest, pad));
        for (frame_no, &shape) in schedule.iter().enumerate() {
            let mut coords = Vec::with_capacity(NUM_KEYPOINTS * 3);
            let noisy = |x: f64, y: f64, rng: &mut crate::select::SeededRng| {
                (
                    x + config.noise_sigma * gaussian(rng),
                    y + config.noise_sigma * gaussian(rng),
                )
            };
            for &(x, y) in &body {
                let (nx, ny) = noisy(x, y, &mut rng);
                coords.extend([nx, ny, 1.0]);
            }
            // left hand carries the shape near the left wrist
            for &(x, y) in &protos[shape] {
                let (nx, ny) = noisy(150.0 + x, 300.0 + y, &mut rng);
                coords.extend([nx, ny, 1.0]);
            }
            // right hand mirrors it on the other side
            for &(x, y) in &protos[shape] {
                let (nx, ny) = noisy(390.0 + (100.0 - x), 300.0 + y, &mut rng);
                coords.extend([nx, ny, 1.0]);
            }
            let record = serde_json::json!({"frame": frame_no, "keypoints": coords});
            writeln!(file, "{record}")
                .map_err(|e| Error::io(file_path.display().to_string(), e))?;
        }
        rows.push(ManifestRow {
            video_id,
            keypoint_path: file_path,
            sentence: sentence.join(" "),
            split: Split::Train, // assigned below
        });
    }

    // 8:1:1 split by seeded shuffle
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_train = (rows.len() * 8) / 10;
    let n_dev = rows.len() / 10;
    for (rank, &idx) in order.iter().enumerate() {
        rows[idx].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
    }

    let manifest_path = out_dir.join("manifest.tsv");
    write_manifest(&manifest_path, &rows)?;
    Ok(Manifest { rows })
}

/// Box-Muller standard normal draw.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
