//! Dataset manifests, landmark files, stratified splits and frame windows.

mod landmarks;
mod manifest;
mod split;
mod windows;

pub use landmarks::{LandmarkRecord, LandmarkSet, LANDMARK_COUNT};
pub use manifest::{load_manifest, DatasetManifest, VideoEntry};
pub use split::split_train_test;
pub use windows::{enumerate_windows, FrameWindow, MIN_OMEGA};

/// Detections below this confidence count as interruptions.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
