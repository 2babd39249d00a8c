//! End-to-end orchestration shared by the command-line tool and the
//! integration tests: manifest -> normalized, length-N feature videos,
//! and feature videos + sentences -> training examples.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_vocab, tokenize_whitespace, Manifest, Split, Vocab};
use crate::error::{Error, Result};
use crate::features::{ArchiveHeader, FeatureArchive, FeatureVideo};
use crate::keypoint::{
    corpus_stats, flatten_frame, load_pose_video, CorpusStats, LayoutMap, NRule,
};
use crate::model::net::Example;
use crate::normalize::{normalize_baseline, NormScheme};
use crate::select::{apply_selector, video_rng, Selector};

/// Everything the preprocessing stage needs. The layout is stored by
/// name so the config can be hashed and echoed.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub layout: LayoutMap,
    pub scheme: NormScheme,
    pub selector: Selector,
    pub l_p: usize,
    pub n_rule: NRule,
    pub seed: u64,
}

impl PreprocessConfig {
    /// Stable hash of the settings that affect the output bytes.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.layout.name.as_bytes());
        hasher.update(b"\x1f");
        hasher.update(format!("{:?}", self.layout.source_indices).as_bytes());
        hasher.update(b"\x1f");
        hasher.update(self.scheme.name().as_bytes());
        hasher.update(b"\x1f");
        hasher.update(self.selector.name().as_bytes());
        hasher.update(b"\x1f");
        hasher.update(self.l_p.to_le_bytes());
        hasher.update(
            match self.n_rule {
                NRule::Mean => "mean".to_string(),
                NRule::Median => "median".to_string(),
                NRule::Fixed(n) => n.to_string(),
            }
            .as_bytes(),
        );
        hasher.update(b"\x1f");
        hasher.update(self.seed.to_le_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Run ingest -> normalize -> resample-to-N -> flatten over every
/// manifest row, in manifest order. N is derived from the frame counts
/// of the whole corpus unless the rule fixes it.
pub fn preprocess_manifest(
    manifest: &Manifest,
    cfg: &PreprocessConfig,
) -> Result<(CorpusStats, Vec<FeatureVideo>)> {
    if manifest.rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut videos = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        let video = load_pose_video(&row.keypoint_path, &cfg.layout)?;
        videos.push(crate::keypoint::KeypointVideo {
            id: row.video_id.clone(),
            frames: video.frames,
        });
    }
    let stats = corpus_stats(
        &videos.iter().map(|v| v.frame_count()).collect::<Vec<_>>(),
        cfg.n_rule,
    )?;
    let n = stats.chosen_n.max(2);

    let mut out = Vec::with_capacity(videos.len());
    for video in &videos {
        let normalized = crate::keypoint::KeypointVideo {
            id: video.id.clone(),
            frames: video
                .frames
                .iter()
                .map(|f| normalize_baseline(f, cfg.scheme))
                .collect(),
        };
        let mut rng = video_rng(cfg.seed, &video.id);
        let resampled = apply_selector(&normalized, cfg.selector, n, cfg.l_p, &mut rng)?;
        out.push(FeatureVideo {
            id: resampled.id.clone(),
            frames: resampled
                .frames
                .iter()
                .map(|f| flatten_frame(f).values.to_vec())
                .collect(),
        });
    }
    Ok((stats, out))
}

/// Assemble the archive container for a preprocessing run.
pub fn build_archive(
    cfg: &PreprocessConfig,
    _stats: &CorpusStats,
    videos: Vec<FeatureVideo>,
) -> Result<FeatureArchive> {
    let frames = videos.first().map_or(0, FeatureVideo::frame_count);
    let dim = videos.first().map_or(0, FeatureVideo::dim);
    Ok(FeatureArchive {
        header: ArchiveHeader {
            format_version: 1,
            count: videos.len(),
            frames,
            dim,
            ids: videos.iter().map(|v| v.id.clone()).collect(),
            dtype: "f64le".into(),
            normalization: cfg.scheme.name().into(),
            selector: cfg.selector.name().into(),
            l_p: cfg.l_p,
            seed: cfg.seed,
            config_hash: cfg.hash(),
        },
        videos,
    })
}

/// Build the vocabulary from the training-split sentences only.
pub fn vocab_from_manifest(manifest: &Manifest) -> Vocab {
    let sentences: Vec<_> = manifest
        .rows_for(Split::Train)
        .map(|r| tokenize_whitespace(&r.sentence))
        .collect();
    build_vocab(&sentences, 1)
}

/// Pair archived feature videos with encoded target sentences for one
/// split. Videos missing from the archive are an error.
pub fn examples_for_split(
    manifest: &Manifest,
    archive: &FeatureArchive,
    vocab: &Vocab,
    split: Split,
) -> Result<Vec<Example>> {
    let by_id: HashMap<&str, &FeatureVideo> = archive
        .videos
        .iter()
        .map(|v| (v.id.as_str(), v))
        .collect();
    let mut out = Vec::new();
    for row in manifest.rows_for(split) {
        let video = by_id.get(row.video_id.as_str()).ok_or_else(|| {
            Error::LengthMismatch(format!(
                "video {} is in the manifest but not the feature archive",
                row.video_id
            ))
        })?;
        out.push(Example {
            frames: video.frames.clone(),
            target: vocab.encode(&tokenize_whitespace(&row.sentence)),
        });
    }
    Ok(out)
}

/// Hypotheses file: `video_id<TAB>sentence` per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub video_id: String,
    pub sentence: String,
}

pub fn write_hypotheses(path: impl AsRef<Path>, hyps: &[Hypothesis]) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::new();
    for h in hyps {
        body.push_str(&h.video_id);
        body.push('\t');
        body.push_str(&h.sentence);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_hypotheses(path: impl AsRef<Path>) -> Result<Vec<Hypothesis>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, sentence) = line.split_once('\t').ok_or_else(|| Error::MalformedFile {
            path: path.display().to_string(),
            line: i + 1,
            reason: "expected video_id<TAB>sentence".into(),
        })?;
        out.push(Hypothesis {
            video_id: id.to_string(),
            sentence: sentence.to_string(),
        });
    }
    Ok(out)
}
