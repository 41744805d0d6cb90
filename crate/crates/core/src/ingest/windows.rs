use serde::{Deserialize, Serialize};

use super::LandmarkSet;
use crate::error::{Error, Result};

pub const MIN_OMEGA: usize = 16;

/// `length` consecutive frames starting at `start` in which `face_id` is
/// continuously detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameWindow {
    pub start: usize,
    pub length: usize,
    pub face_id: u32,
}

impl FrameWindow {
    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

/// Non-overlapping windows of `omega` frames per face. A frame without a
/// detection (or with confidence below `min_confidence`) ends the current
/// run; windowing restarts on the following frame.
pub fn enumerate_windows(
    landmarks: &LandmarkSet,
    frame_count: usize,
    omega: usize,
    min_confidence: f64,
) -> Result<Vec<FrameWindow>> {
    if omega < MIN_OMEGA {
        return Err(Error::Config(format!("window length {omega} below minimum {MIN_OMEGA}")));
    }
    let mut out = Vec::new();
    for face_id in landmarks.face_ids() {
        let mut run_start = 0;
        for frame in 0..frame_count {
            let present = landmarks
                .get(frame, face_id)
                .is_some_and(|r| r.confidence >= min_confidence);
            if !present {
                run_start = frame + 1;
                continue;
            }
            if frame + 1 - run_start == omega {
                out.push(FrameWindow {
                    start: run_start,
                    length: omega,
                    face_id,
                });
                run_start = frame + 1;
            }
        }
    }
    Ok(out)
}
