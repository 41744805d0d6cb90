//! `.ppgm` model files.
//!
//! ```text
//! magic        "PPGM"
//! version      u8
//! meta_len     u32 LE
//! meta         UTF-8 JSON { classes, architecture, training }
//! param_count  u32 LE
//! params       param_count f32 LE
//! crc32        u32 LE over every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ClassifierModel, TrainConfig};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"PPGM";
pub const MODEL_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    classes: Vec<String>,
    architecture: Architecture,
    training: TrainConfig,
}

impl ClassifierModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&ModelMeta {
            classes: self.classes.clone(),
            architecture: self.architecture.clone(),
            training: self.training.clone(),
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
        let mut out = Vec::with_capacity(13 + meta.len() + self.weights.len() * 4 + 4);
        out.extend_from_slice(&MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = || Error::Truncated(format!("model file of {} bytes", bytes.len()));
        if bytes.len() < 4 {
            return Err(truncated());
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic {
                expected: MODEL_MAGIC,
                found: magic,
            });
        }
        if bytes.len() < 4 + 1 + 4 + 4 + 4 {
            return Err(truncated());
        }
        if bytes[4] != MODEL_VERSION {
            return Err(Error::Version {
                expected: MODEL_VERSION,
                found: bytes[4],
            });
        }
        let meta_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let params_at = 9 + meta_len;
        if bytes.len() < params_at + 4 + 4 {
            return Err(truncated());
        }
        let count = u32::from_le_bytes(bytes[params_at..params_at + 4].try_into().unwrap()) as usize;
        let body_len = params_at + 4 + count * 4;
        if bytes.len() < body_len + 4 {
            return Err(truncated());
        }
        let stored = u32::from_le_bytes(bytes[body_len..body_len + 4].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..body_len]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        if bytes.len() != body_len + 4 {
            return Err(Error::invalid("trailing bytes after model checksum"));
        }
        let meta: ModelMeta = serde_json::from_slice(&bytes[9..params_at]).map_err(|e| Error::invalid(format!("model metadata: {e}")))?;
        if meta.architecture.classes != meta.classes.len() {
            return Err(Error::Shape {
                expected: format!("{} outputs", meta.classes.len()),
                actual: format!("{} outputs", meta.architecture.classes),
            });
        }
        if meta.architecture.param_count() != count {
            return Err(Error::Shape {
                expected: format!("{} parameters", meta.architecture.param_count()),
                actual: format!("{count} parameters"),
            });
        }
        let weights = bytes[params_at + 4..body_len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ClassifierModel {
            classes: meta.classes,
            architecture: meta.architecture,
            weights,
            training: meta.training,
        })
    }
}

pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    let bytes = model.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a model; when `classes` is given, the model's class list must match
/// it exactly.
pub fn load_model(path: &Path, classes: Option<&[String]>) -> Result<ClassifierModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let model = ClassifierModel::from_bytes(&bytes)?;
    if let Some(classes) = classes {
        model.check_classes(classes)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(classes: &[&str]) -> ClassifierModel {
        let arch = Architecture {
            rows: 2,
            omega: 16,
            hidden: Some(3),
            classes: classes.len(),
        };
        ClassifierModel {
            weights: (0..arch.param_count()).map(|i| (i as f32 * 0.37).sin()).collect(),
            classes: classes.iter().map(|s| s.to_string()).collect(),
            architecture: arch,
            training: TrainConfig::default(),
        }
    }

    #[test]
    fn round_trip_and_class_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ppgm");
        let m = model(&["A", "B"]);
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path, None).unwrap(), m);
        let abc: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(load_model(&path, Some(&abc)), Err(Error::ClassMismatch { .. })));
    }

    #[test]
    fn truncated_and_corrupt() {
        let bytes = model(&["A", "B"]).to_bytes().unwrap();
        for cut in [0, 3, 8, 20, bytes.len() - 5, bytes.len() - 1] {
            assert!(ClassifierModel::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[bytes.len() - 10] ^= 0x01;
        assert!(matches!(ClassifierModel::from_bytes(&bad), Err(Error::Checksum { .. })));
        let mut ver = bytes;
        ver[4] = 9;
        assert!(matches!(ClassifierModel::from_bytes(&ver), Err(Error::Version { .. })));
    }
}
