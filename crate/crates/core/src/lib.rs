//! PPG-cell pipeline for deep fake source detection.
//!
//! Biological (remote photoplethysmography) signals are extracted from the
//! eye-to-mouth skin region of face videos, arranged into spatiotemporal PPG
//! cells, classified per cell by generative source, and aggregated into
//! per-video verdicts.
//!
//! The stages map onto modules:
//!
//! * [`ingest`]: manifests, landmark files, train/test splits and frame windows
//! * [`rectify`]: skin ROI, constrained Delaunay mesh and piecewise affine warp
//! * [`ppg`]: grid means, CHROM pulse signals and power spectra
//! * [`cell`]: cell assembly, normalization and the `.ppgc` file format
//! * [`classify`]: the built-in shallow classifier and `.ppgm` model files
//! * [`aggregate`]: the five voting schemes and evaluation reports
//! * [`fingerprint`]: residual accumulation with temporal non-local means
//! * [`synth`]: synthetic labeled face videos with known pulse and noise signatures
//! * [`pipeline`]: window extraction shared by the CLI and the test suites

pub mod aggregate;
pub mod binfmt;
pub mod cell;
pub mod classify;
pub mod config;
pub mod error;
pub mod fingerprint;
pub mod geometry;
pub mod ingest;
pub mod pipeline;
pub mod ppg;
pub mod raster;
pub mod rectify;
pub mod synth;

pub use aggregate::{Scheme, VideoVerdict};
pub use cell::{CellMode, PpgCell};
pub use classify::{CellPrediction, ClassifierModel};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use ingest::{DatasetManifest, FrameWindow, LandmarkSet, VideoEntry};
pub use rectify::RectifiedFace;

/// Reserved class name for authentic videos.
pub const REAL_CLASS: &str = "real";
