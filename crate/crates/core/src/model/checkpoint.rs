//! Model checkpoints: one JSON document holding the architecture, the
//! vocabulary, the preprocessing settings the model was trained with,
//! and every parameter tensor. JSON f64 serialization round-trips
//! exactly, so a saved model reloads bit-for-bit.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ModelHyper, ModelParams};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Preprocessing settings required to feed raw keypoint videos to the
/// saved model at translation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub normalization: String,
    pub selector: String,
    pub l_p: usize,
    pub frames: usize,
    pub layout: String,
    pub reverse_frames: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub hyper: ModelHyper,
    pub vocab: Vec<String>,
    pub preprocess: PreprocessSpec,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::ConfigInvalid(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        self.hyper.validate()?;
        if self.vocab.len() != self.hyper.vocab_size {
            return Err(Error::ConfigInvalid(format!(
                "vocab has {} entries but model expects {}",
                self.vocab.len(),
                self.hyper.vocab_size
            )));
        }
        let expect = ModelParams::zeros(&self.hyper);
        for ((name, a), (_, b)) in self.params.tensors().iter().zip(expect.tensors().iter()) {
            if a.rows != b.rows || a.cols != b.cols || a.data.len() != a.rows * a.cols {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {name} is {}x{}, expected {}x{}",
                    a.rows, a.cols, b.rows, b.cols
                )));
            }
            if a.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "tensor {name} holds non-finite values"
                )));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    ckpt.validate()?;
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, ckpt).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    use std::io::Write;
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
    let ckpt: Checkpoint =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            line: 0,
            reason: e.to_string(),
        })?;
    ckpt.validate()?;
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::seeded_rng;

    fn sample() -> Checkpoint {
        let hyper = ModelHyper {
            input_dim: 6,
            hidden_dim: 4,
            embed_dim: 3,
            attn_dim: 4,
            vocab_size: 6,
            dropout_rate: 0.5,
            max_target_len: 8,
        };
        let mut rng = seeded_rng(42);
        let params = ModelParams::init(&hyper, &mut rng);
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            hyper,
            vocab: vec![
                "<pad>".into(),
                "<sos>".into(),
                "<eos>".into(),
                "<unk>".into(),
                "hello".into(),
                "world".into(),
            ],
            preprocess: PreprocessSpec {
                normalization: "customized".into(),
                selector: "sass".into(),
                l_p: 17,
                frames: 12,
                layout: "identity55".into(),
                reverse_frames: false,
            },
            params,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let ckpt = sample();
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
    }

    #[test]
    fn rejects_bad_version_and_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut ckpt = sample();
        ckpt.format_version = 9;
        assert!(save_checkpoint(&path, &ckpt).is_err());
        ckpt.format_version = CHECKPOINT_VERSION;
        ckpt.vocab.pop();
        assert!(ckpt.validate().is_err());
    }

    #[test]
    fn rejects_shape_drift() {
        let mut ckpt = sample();
        ckpt.params.out_b.data.push(0.0);
        assert!(ckpt.validate().is_err());
    }
}
