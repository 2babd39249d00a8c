//! Canonical keypoint data model and ingestion of pose-estimator dumps.
//!
//! A frame holds 55 signer keypoints: 13 upper-body points (slots 0-12),
//! the left hand (13-33) and the right hand (34-54), wrist to fingertips.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of canonical keypoints per frame.
pub const NUM_KEYPOINTS: usize = 55;
/// Flattened feature dimension: all x coordinates, then all y.
pub const FEATURE_DIM: usize = 2 * NUM_KEYPOINTS;

/// Canonical slot ranges.
pub const BODY_SLOTS: std::ops::Range<usize> = 0..13;
pub const LEFT_HAND_SLOTS: std::ops::Range<usize> = 13..34;
pub const RIGHT_HAND_SLOTS: std::ops::Range<usize> = 34..55;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One frame reduced to the 55 canonical points.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub points: [Point2; NUM_KEYPOINTS],
}

impl KeypointFrame {
    pub fn from_points(points: [Point2; NUM_KEYPOINTS]) -> Self {
        KeypointFrame { points }
    }

    /// Constant frame, mostly useful in tests.
    pub fn constant(x: f64, y: f64) -> Self {
        KeypointFrame {
            points: [Point2::new(x, y); NUM_KEYPOINTS],
        }
    }
}

/// A raw frame as emitted by a pose estimator: (x, y, confidence) triples.
#[derive(Debug, Clone)]
pub struct RawPoseFrame {
    pub points: Vec<(f64, f64, f64)>,
}

/// Maps the 55 canonical slots onto indices of a raw pose frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutMap {
    pub name: String,
    pub source_indices: Vec<usize>,
}

impl LayoutMap {
    pub fn new(name: impl Into<String>, source_indices: Vec<usize>) -> Result<Self> {
        let map = LayoutMap {
            name: name.into(),
            source_indices,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_indices.len() != NUM_KEYPOINTS {
            return Err(Error::LayoutMismatch(format!(
                "layout '{}' has {} indices, expected {}",
                self.name,
                self.source_indices.len(),
                NUM_KEYPOINTS
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in &self.source_indices {
            if !seen.insert(i) {
                return Err(Error::LayoutMismatch(format!(
                    "layout '{}' repeats source index {}",
                    self.name, i
                )));
            }
        }
        Ok(())
    }

    /// Smallest raw-frame length this layout can be applied to.
    pub fn min_raw_len(&self) -> usize {
        self.source_indices.iter().max().map_or(0, |m| m + 1)
    }

    /// Identity map for files that already carry the 55 canonical points.
    pub fn identity55() -> Self {
        LayoutMap {
            name: "identity55".into(),
            source_indices: (0..NUM_KEYPOINTS).collect(),
        }
    }

    /// Best-effort default map for AlphaPose Halpe-136 dumps.
    ///
    /// Body slots 0-10 coincide with Halpe's COCO-style head/arm points,
    /// slot 11 is the Halpe head point (17) and slot 12 the neck (18).
    /// Hands are Halpe 94-114 (left) and 115-135 (right). Lower body and
    /// the 68 detailed face points are dropped.
    pub fn halpe136_default() -> Self {
        let mut idx: Vec<usize> = (0..11).collect(); // nose, eyes, ears, shoulders, elbows, wrists
        idx.push(17); // head
        idx.push(18); // neck
        idx.extend(94..115); // left hand
        idx.extend(115..136); // right hand
        LayoutMap {
            name: "halpe136_default".into(),
            source_indices: idx,
        }
    }

    /// Resolve a layout by built-in name, or load it from a JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "identity55" => Ok(Self::identity55()),
            "halpe136_default" => Ok(Self::halpe136_default()),
            path => Self::load(path),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
        let map: LayoutMap = serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        map.validate()?;
        Ok(map)
    }
}

/// An ordered sequence of canonical frames for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointVideo {
    pub id: String,
    pub frames: Vec<KeypointFrame>,
}

impl KeypointVideo {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Flattened per-frame model input: 55 x coordinates then 55 y coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
}

/// Corpus-level frame statistics used to pick the fixed length N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub video_count: usize,
    pub mean_frames: f64,
    pub median_frames: f64,
    pub chosen_n: usize,
}

/// Rule for deriving the fixed frame count N from corpus statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NRule {
    Mean,
    Median,
    Fixed(usize),
}

/// Pick the canonical 55 points out of a raw pose frame; confidence is
/// validated upstream and dropped here.
pub fn select_canonical_55(raw: &RawPoseFrame, layout: &LayoutMap) -> Result<KeypointFrame> {
    if raw.points.len() < layout.min_raw_len() {
        return Err(Error::LayoutMismatch(format!(
            "frame has {} points but layout '{}' needs at least {}",
            raw.points.len(),
            layout.name,
            layout.min_raw_len()
        )));
    }
    let mut points = [Point2::new(0.0, 0.0); NUM_KEYPOINTS];
    for (slot, &src) in layout.source_indices.iter().enumerate() {
        let (x, y, _conf) = raw.points[src];
        points[slot] = Point2::new(x, y);
    }
    Ok(KeypointFrame { points })
}

/// Load a JSON-Lines keypoint dump: one object per line with a "frame"
/// counter and a flat "keypoints" array of (x, y, confidence) triples.
pub fn load_pose_video(path: impl AsRef<Path>, layout: &LayoutMap) -> Result<KeypointVideo> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
    let reader = BufReader::new(file);

    #[derive(Deserialize)]
    struct FrameRecord {
        #[allow(dead_code)]
        frame: i64,
        keypoints: Vec<f64>,
    }

    let malformed = |line: usize, reason: String| Error::MalformedFile {
        path: path.display().to_string(),
        line,
        reason,
    };

    let mut frames = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| malformed(lineno + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord =
            serde_json::from_str(&line).map_err(|e| malformed(lineno + 1, e.to_string()))?;
        if record.keypoints.len() % 3 != 0 {
            return Err(malformed(
                lineno + 1,
                format!(
                    "keypoints array length {} is not a multiple of 3",
                    record.keypoints.len()
                ),
            ));
        }
        let mut points = Vec::with_capacity(record.keypoints.len() / 3);
        for triple in record.keypoints.chunks_exact(3) {
            let (x, y, c) = (triple[0], triple[1], triple[2]);
            if !x.is_finite() || !y.is_finite() {
                return Err(malformed(lineno + 1, "non-finite coordinate".into()));
            }
            if !(0.0..=1.0).contains(&c) {
                return Err(malformed(
                    lineno + 1,
                    format!("confidence {} outside [0,1]", c),
                ));
            }
            points.push((x, y, c));
        }
        frames.push(select_canonical_55(&RawPoseFrame { points }, layout)?);
    }
    if frames.is_empty() {
        return Err(malformed(0, "empty video".into()));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(KeypointVideo { id, frames })
}

/// Flatten a frame into the model's 110-dim input vector.
pub fn flatten_frame(frame: &KeypointFrame) -> FeatureVector {
    let mut values = [0.0; FEATURE_DIM];
    for (i, p) in frame.points.iter().enumerate() {
        values[i] = p.x;
        values[NUM_KEYPOINTS + i] = p.y;
    }
    FeatureVector { values }
}

/// Inverse of [`flatten_frame`]; exact for all finite inputs.
pub fn unflatten_frame(vec: &FeatureVector) -> KeypointFrame {
    let mut points = [Point2::new(0.0, 0.0); NUM_KEYPOINTS];
    for (i, p) in points.iter_mut().enumerate() {
        *p = Point2::new(vec.values[i], vec.values[NUM_KEYPOINTS + i]);
    }
    KeypointFrame { points }
}

/// Mean/median frame counts over a corpus plus the chosen fixed length N.
///
/// The mean rule rounds half-up; the median rule takes the lower median.
pub fn corpus_stats(frame_counts: &[usize], n_rule: NRule) -> Result<CorpusStats> {
    if frame_counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let l = frame_counts.len();
    let total: u64 = frame_counts.iter().map(|&t| t as u64).sum();
    let mean = total as f64 / l as f64;
    let mut sorted = frame_counts.to_vec();
    sorted.sort_unstable();
    let median = if l % 2 == 1 {
        sorted[l / 2] as f64
    } else {
        (sorted[l / 2 - 1] + sorted[l / 2]) as f64 / 2.0
    };
    let chosen_n = match n_rule {
        NRule::Mean => (mean + 0.5).floor() as usize,
        NRule::Median => sorted[(l - 1) / 2],
        NRule::Fixed(n) => n,
    };
    Ok(CorpusStats {
        video_count: l,
        mean_frames: mean,
        median_frames: median,
        chosen_n: chosen_n.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn raw_frame(n: usize) -> RawPoseFrame {
        RawPoseFrame {
            points: (0..n).map(|i| (i as f64, -(i as f64), 1.0)).collect(),
        }
    }

    #[test]
    fn identity_layout_keeps_points() {
        let raw = raw_frame(55);
        let frame = select_canonical_55(&raw, &LayoutMap::identity55()).unwrap();
        for (i, p) in frame.points.iter().enumerate() {
            assert_eq!(p.x, i as f64);
            assert_eq!(p.y, -(i as f64));
        }
    }

    #[test]
    fn permutation_layout_reorders() {
        let mut idx: Vec<usize> = (0..55).collect();
        idx.swap(0, 2);
        let layout = LayoutMap::new("perm", idx).unwrap();
        let frame = select_canonical_55(&raw_frame(55), &layout).unwrap();
        assert_eq!(frame.points[0].x, 2.0);
        assert_eq!(frame.points[1].x, 1.0);
        assert_eq!(frame.points[2].x, 0.0);
    }

    #[test]
    fn halpe_default_map_is_valid_and_slot0_is_nose() {
        let layout = LayoutMap::halpe136_default();
        layout.validate().unwrap();
        assert_eq!(layout.min_raw_len(), 136);
        // Raw frame with coordinate == raw index, so slot contents are
        // directly readable.
        let frame = select_canonical_55(&raw_frame(136), &layout).unwrap();
        assert_eq!(frame.points[0].x, 0.0); // nose
        assert_eq!(frame.points[11].x, 17.0); // head
        assert_eq!(frame.points[12].x, 18.0); // neck
        assert_eq!(frame.points[13].x, 94.0); // first left-hand point
        assert_eq!(frame.points[34].x, 115.0); // first right-hand point
        assert_eq!(frame.points[54].x, 135.0);
    }

    #[test]
    fn layout_mismatch_when_frame_too_short() {
        let layout = LayoutMap::halpe136_default();
        let err = select_canonical_55(&raw_frame(55), &layout).unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
    }

    #[test]
    fn duplicate_layout_indices_rejected() {
        let mut idx: Vec<usize> = (0..55).collect();
        idx[1] = 0;
        assert!(LayoutMap::new("dup", idx).is_err());
    }

    fn write_jsonl(frames: &[Vec<f64>]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (i, kps) in frames.iter().enumerate() {
            let obj = serde_json::json!({"frame": i, "keypoints": kps});
            writeln!(f, "{}", obj).unwrap();
        }
        f.flush().unwrap();
        f
    }

    fn triples(n: usize) -> Vec<f64> {
        (0..n)
            .flat_map(|i| [i as f64, i as f64 + 0.5, 1.0])
            .collect()
    }

    #[test]
    fn load_pose_video_counts_frames() {
        let f = write_jsonl(&[triples(136), triples(136), triples(136)]);
        let video = load_pose_video(f.path(), &LayoutMap::halpe136_default()).unwrap();
        assert_eq!(video.frame_count(), 3);
    }

    #[test]
    fn empty_video_is_malformed() {
        let f = write_jsonl(&[]);
        let err = load_pose_video(f.path(), &LayoutMap::identity55()).unwrap_err();
        match err {
            Error::MalformedFile { reason, .. } => assert_eq!(reason, "empty video"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn short_frame_reports_layout_mismatch() {
        let f = write_jsonl(&[triples(55)]);
        let err = load_pose_video(f.path(), &LayoutMap::halpe136_default()).unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
    }

    #[test]
    fn bad_confidence_reports_line() {
        let mut kps = triples(55);
        kps[2] = 1.5;
        let f = write_jsonl(&[triples(55), kps]);
        let err = load_pose_video(f.path(), &LayoutMap::identity55()).unwrap_err();
        match err {
            Error::MalformedFile { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn flatten_constant_frame() {
        let v = flatten_frame(&KeypointFrame::constant(1.0, 2.0));
        assert!(v.values[..55].iter().all(|&x| x == 1.0));
        assert!(v.values[55..].iter().all(|&y| y == 2.0));
    }

    #[test]
    fn flatten_index_identity() {
        let mut points = [Point2::new(0.0, 0.0); 55];
        for (k, p) in points.iter_mut().enumerate() {
            *p = Point2::new(k as f64, -(k as f64));
        }
        let v = flatten_frame(&KeypointFrame { points });
        for k in 0..55 {
            assert_eq!(v.values[k], k as f64);
            assert_eq!(v.values[55 + k], -(k as f64));
        }
    }

    proptest! {
        #[test]
        fn flatten_roundtrip(coords in proptest::collection::vec(-1e6f64..1e6, 110)) {
            let mut points = [Point2::new(0.0, 0.0); 55];
            for (i, p) in points.iter_mut().enumerate() {
                *p = Point2::new(coords[2 * i], coords[2 * i + 1]);
            }
            let frame = KeypointFrame { points };
            prop_assert_eq!(unflatten_frame(&flatten_frame(&frame)), frame);
        }
    }

    #[test]
    fn corpus_stats_mean_rule() {
        let s = corpus_stats(&[3, 5, 7], NRule::Mean).unwrap();
        assert_eq!(s.chosen_n, 5);
        assert_eq!(s.mean_frames, 5.0);
    }

    #[test]
    fn corpus_stats_rounds_half_up() {
        let s = corpus_stats(&[2, 3], NRule::Mean).unwrap();
        assert_eq!(s.chosen_n, 3);
    }

    #[test]
    fn corpus_stats_keti_like_mean() {
        // 153 frames on average, as in a full-scale corpus.
        let counts = vec![150, 153, 156];
        let s = corpus_stats(&counts, NRule::Mean).unwrap();
        assert_eq!(s.chosen_n, 153);
    }

    #[test]
    fn corpus_stats_lower_median() {
        let s = corpus_stats(&[2, 4, 6, 8], NRule::Median).unwrap();
        assert_eq!(s.chosen_n, 4);
        assert_eq!(s.median_frames, 5.0);
    }

    #[test]
    fn corpus_stats_empty_errors() {
        assert!(matches!(
            corpus_stats(&[], NRule::Mean),
            Err(Error::EmptyCorpus)
        ));
    }

    proptest! {
        #[test]
        fn mean_times_count_is_exact_sum(counts in proptest::collection::vec(1usize..500, 1..50)) {
            let s = corpus_stats(&counts, NRule::Mean).unwrap();
            let total: u64 = counts.iter().map(|&t| t as u64).sum();
            // mean * L reproduces the integer sum exactly
            prop_assert_eq!((s.mean_frames * counts.len() as f64).round() as u64, total);
        }
    }
}
