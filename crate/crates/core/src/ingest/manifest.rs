use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub class_label: String,
    pub frames_path: PathBuf,
    pub landmarks_path: PathBuf,
    /// Frames per second.
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub split_seed: u64,
    pub videos: Vec<VideoEntry>,
}

impl DatasetManifest {
    /// Structural checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        let mut classes = HashSet::new();
        for c in &self.classes {
            if !classes.insert(c.as_str()) {
                return Err(Error::Duplicate {
                    kind: "class",
                    name: c.clone(),
                });
            }
        }
        let mut ids = HashSet::new();
        for v in &self.videos {
            if !ids.insert(v.id.as_str()) {
                return Err(Error::Duplicate {
                    kind: "video id",
                    name: v.id.clone(),
                });
            }
            if !classes.contains(v.class_label.as_str()) {
                return Err(Error::UnknownClass(v.class_label.clone()));
            }
            if !(v.fps > 0.0 && v.fps.is_finite()) {
                return Err(Error::invalid(format!(
                    "video '{}' has non-positive fps {}",
                    v.id, v.fps
                )));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn video(&self, id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.id == id)
    }

    /// Writes the manifest with paths made relative to the manifest's directory
    /// where possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut out = self.clone();
        for v in &mut out.videos {
            if let Ok(rel) = v.frames_path.strip_prefix(base) {
                v.frames_path = rel.to_path_buf();
            }
            if let Ok(rel) = v.landmarks_path.strip_prefix(base) {
                v.landmarks_path = rel.to_path_buf();
            }
        }
        let text = serde_json::to_string_pretty(&out).map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Loads a manifest, resolving relative paths against the manifest's directory
/// and checking every referenced path exists.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    manifest.validate()?;
    let base = path.parent().unwrap_or(Path::new(""));
    for v in &mut manifest.videos {
        v.frames_path = base.join(&v.frames_path);
        v.landmarks_path = base.join(&v.landmarks_path);
        if !v.frames_path.is_dir() {
            return Err(Error::MissingPath(v.frames_path.clone()));
        }
        if !v.landmarks_path.is_file() {
            return Err(Error::MissingPath(v.landmarks_path.clone()));
        }
    }
    Ok(manifest)
}
