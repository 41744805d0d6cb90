use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::Scheme;
use crate::cell::CellMode;
use crate::classify::TrainConfig;
use crate::error::{Error, Result};
use crate::fingerprint::NlmParams;
use crate::ingest::DEFAULT_MIN_CONFIDENCE;
use crate::ppg::{GridLayout, PpgOptions};
use crate::rectify::{RECTIFIED_HEIGHT, RECTIFIED_WIDTH};

pub const MAX_OMEGA: usize = 4096;

/// Every knob of the pipeline. Loaded from a JSON file; missing fields take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Window length ω in frames.
    pub omega: usize,
    pub psd_enabled: bool,
    pub grid: GridLayout,
    pub raster_width: usize,
    pub raster_height: usize,
    pub min_confidence: f64,
    pub ppg: PpgOptions,
    /// Only per-block min-max is implemented.
    pub normalization: String,
    pub classifier: TrainConfig,
    pub scheme: Scheme,
    pub train_fraction: f64,
    pub workers: usize,
    pub seed: u64,
    pub nlm: NlmParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            omega: 64,
            psd_enabled: true,
            grid: GridLayout::default(),
            raster_width: RECTIFIED_WIDTH,
            raster_height: RECTIFIED_HEIGHT,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            ppg: PpgOptions::default(),
            normalization: "per_block_minmax".into(),
            classifier: TrainConfig::default(),
            scheme: Scheme::MeanLogOdds,
            train_fraction: 0.7,
            workers: 1,
            seed: 0,
            nlm: NlmParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cell_mode(&self) -> CellMode {
        if self.psd_enabled {
            CellMode::WithPsd
        } else {
            CellMode::RawOnly
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(crate::ingest::MIN_OMEGA..=MAX_OMEGA).contains(&self.omega) {
            return bad(format!("omega {} outside [{}, {MAX_OMEGA}]", self.omega, crate::ingest::MIN_OMEGA));
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if self.grid.cols == 0 || self.grid.rows == 0 || self.raster_width % self.grid.cols != 0 || self.raster_height % self.grid.rows != 0 {
            return bad(format!(
                "{}x{} raster does not divide into a {}x{} grid",
                self.raster_width, self.raster_height, self.grid.cols, self.grid.rows
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train fraction {} outside (0,1)", self.train_fraction));
        }
        if self.normalization != "per_block_minmax" {
            return bad(format!("unsupported normalization '{}'", self.normalization));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad(format!("min confidence {} outside [0,1]", self.min_confidence));
        }
        self.nlm.validate()
    }
}
