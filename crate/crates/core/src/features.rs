//! Fixed-length per-video feature matrices (N frames x feature dim) and
//! the binary feature-archive container: a JSON header line followed by
//! row-major little-endian f64 data.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One preprocessed video: normalized, resampled, flattened frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVideo {
    pub id: String,
    pub frames: Vec<Vec<f64>>,
}

impl FeatureVideo {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// Reverse the temporal order of a feature video (an involution).
pub fn reverse_frames(video: &FeatureVideo) -> FeatureVideo {
    FeatureVideo {
        id: video.id.clone(),
        frames: video.frames.iter().rev().cloned().collect(),
    }
}

/// Archive header, serialized as one JSON line ahead of the binary data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format_version: u32,
    pub count: usize,
    pub frames: usize,
    pub dim: usize,
    pub dtype: String,
    pub ids: Vec<String>,
    pub normalization: String,
    pub selector: String,
    pub l_p: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub struct FeatureArchive {
    pub header: ArchiveHeader,
    pub videos: Vec<FeatureVideo>,
}

pub fn write_archive(path: impl AsRef<Path>, archive: &FeatureArchive) -> Result<()> {
    let path = path.as_ref();
    let header = &archive.header;
    if header.ids.len() != archive.videos.len() || header.count != archive.videos.len() {
        return Err(Error::ShapeMismatch("archive header count mismatch".into()));
    }
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    serde_json::to_writer(&mut w, header).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    w.write_all(b"\n").map_err(io_err)?;
    for video in &archive.videos {
        if video.frame_count() != header.frames {
            return Err(Error::ShapeMismatch(format!(
                "video {} has {} frames, archive expects {}",
                video.id,
                video.frame_count(),
                header.frames
            )));
        }
        for frame in &video.frames {
            if frame.len() != header.dim {
                return Err(Error::ShapeMismatch(format!(
                    "video {} frame dim {} != {}",
                    video.id,
                    frame.len(),
                    header.dim
                )));
            }
            for &v in frame {
                w.write_all(&v.to_le_bytes()).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<FeatureArchive> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
    let mut r = BufReader::new(file);
    let mut header_line = Vec::new();
    {
        use std::io::BufRead;
        r.read_until(b'\n', &mut header_line)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    let header: ArchiveHeader =
        serde_json::from_slice(&header_line).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            line: 1,
            reason: e.to_string(),
        })?;
    if header.dtype != "f64le" {
        return Err(Error::MalformedFile {
            path: path.display().to_string(),
            line: 1,
            reason: format!("unsupported dtype '{}'", header.dtype),
        });
    }
    let mut videos = Vec::with_capacity(header.count);
    let mut buf = vec![0u8; header.dim * 8];
    for id in &header.ids {
        let mut frames = Vec::with_capacity(header.frames);
        for _ in 0..header.frames {
            r.read_exact(&mut buf).map_err(|e| Error::MalformedFile {
                path: path.display().to_string(),
                line: 0,
                reason: format!("truncated data for video {id}: {e}"),
            })?;
            let frame: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            frames.push(frame);
        }
        videos.push(FeatureVideo {
            id: id.clone(),
            frames,
        });
    }
    Ok(FeatureArchive { header, videos })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_video(id: &str, n: usize, dim: usize, offset: f64) -> FeatureVideo {
        FeatureVideo {
            id: id.into(),
            frames: (0..n)
                .map(|t| (0..dim).map(|d| offset + t as f64 + d as f64 / 10.0).collect())
                .collect(),
        }
    }

    #[test]
    fn reverse_is_involution() {
        let v = sample_video("a", 3, 4, 0.0);
        assert_eq!(reverse_frames(&reverse_frames(&v)), v);
        let single = sample_video("b", 1, 4, 0.0);
        assert_eq!(reverse_frames(&single), single);
        let r = reverse_frames(&v);
        assert_eq!(r.frames[0], v.frames[2]);
        assert_eq!(r.frames[2], v.frames[0]);
    }

    #[test]
    fn archive_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        let videos = vec![
            sample_video("v1", 4, 6, 0.125),
            sample_video("v2", 4, 6, -3.5e-17),
        ];
        let archive = FeatureArchive {
            header: ArchiveHeader {
                format_version: 1,
                count: 2,
                frames: 4,
                dim: 6,
                dtype: "f64le".into(),
                ids: vec!["v1".into(), "v2".into()],
                normalization: "customized".into(),
                selector: "sass".into(),
                l_p: 17,
                seed: 7,
                config_hash: "abc".into(),
            },
            videos: videos.clone(),
        };
        write_archive(&path, &archive).unwrap();
        let back = read_archive(&path).unwrap();
        assert_eq!(back.videos, videos);
        assert_eq!(back.header.l_p, 17);
    }

    #[test]
    fn shape_mismatch_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let archive = FeatureArchive {
            header: ArchiveHeader {
                format_version: 1,
                count: 1,
                frames: 9,
                dim: 6,
                dtype: "f64le".into(),
                ids: vec!["v1".into()],
                normalization: "customized".into(),
                selector: "sass".into(),
                l_p: 17,
                seed: 7,
                config_hash: "abc".into(),
            },
            videos: vec![sample_video("v1", 4, 6, 0.0)],
        };
        assert!(write_archive(dir.path().join("x.bin"), &archive).is_err());
    }
}
