use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Points per record in the standard 68-point facial layout.
pub const LANDMARK_COUNT: usize = 68;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkRecord {
    pub frame: usize,
    pub face_id: u32,
    pub confidence: f64,
    pub points: Vec<Point2>,
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    frame: usize,
    face_id: u32,
    confidence: f64,
    points: Vec<[f64; 2]>,
}

/// All landmark detections of one video.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkSet {
    records: Vec<LandmarkRecord>,
    index: HashMap<(usize, u32), usize>,
}

impl LandmarkSet {
    pub fn new(records: Vec<LandmarkRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.points.len() != LANDMARK_COUNT {
                return Err(Error::invalid(format!(
                    "frame {} face {}: expected {} landmarks, got {}",
                    r.frame,
                    r.face_id,
                    LANDMARK_COUNT,
                    r.points.len()
                )));
            }
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(Error::invalid(format!(
                    "frame {} face {}: confidence {} outside [0,1]",
                    r.frame, r.face_id, r.confidence
                )));
            }
            if r.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(Error::invalid(format!(
                    "frame {} face {}: non-finite landmark",
                    r.frame, r.face_id
                )));
            }
            if index.insert((r.frame, r.face_id), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "landmark record",
                    name: format!("frame {} face {}", r.frame, r.face_id),
                });
            }
        }
        Ok(LandmarkSet { records, index })
    }

    pub fn records(&self) -> &[LandmarkRecord] {
        &self.records
    }

    pub fn get(&self, frame: usize, face_id: u32) -> Option<&LandmarkRecord> {
        self.index.get(&(frame, face_id)).map(|&i| &self.records[i])
    }

    /// Sorted distinct face ids.
    pub fn face_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.face_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Checks frame indices against the frame count and coordinates against
    /// the frame bounds padded by 10%.
    pub fn validate_against(&self, frame_count: usize, width: usize, height: usize) -> Result<()> {
        let (px, py) = (0.1 * width as f64, 0.1 * height as f64);
        for r in &self.records {
            if r.frame >= frame_count {
                return Err(Error::invalid(format!(
                    "landmark record references frame {} but video has {} frames",
                    r.frame, frame_count
                )));
            }
            for p in &r.points {
                if p.x < -px || p.x > width as f64 + px || p.y < -py || p.y > height as f64 + py {
                    return Err(Error::invalid(format!(
                        "frame {} face {}: landmark ({:.1},{:.1}) outside padded {}x{} frame",
                        r.frame, r.face_id, p.x, p.y, width, height
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: RecordJson = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
            records.push(LandmarkRecord {
                frame: r.frame,
                face_id: r.face_id,
                confidence: r.confidence,
                points: r.points.iter().map(|p| Point2::new(p[0], p[1])).collect(),
            });
        }
        LandmarkSet::new(records).map_err(|e| Error::parse(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in &self.records {
            let json = RecordJson {
                frame: r.frame,
                face_id: r.face_id,
                confidence: r.confidence,
                points: r.points.iter().map(|p| [p.x, p.y]).collect(),
            };
            let line = serde_json::to_string(&json).map_err(|e| Error::parse(path, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
