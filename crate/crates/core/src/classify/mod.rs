//! Built-in shallow classifier over PPG cells.
//!
//! The network is `flatten(cell - 0.5) -> [dense(H) -> ReLU] -> dense(K) -> softmax`
//! with the hidden layer optional. It stands in for an image CNN behind the
//! same interface: cells in, per-class probabilities out.

mod network;
mod persist;
mod train;

pub use network::{Architecture, Network};
pub use persist::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{gradient_check, train, EpochStats, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::cell::{CellMeta, PpgCell};
use crate::error::{Error, Result};

/// Trained classifier. Weights are stored as `f32`; all arithmetic runs in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub classes: Vec<String>,
    pub architecture: Architecture,
    pub weights: Vec<f32>,
    pub training: TrainConfig,
}

/// Class probabilities `ρ` for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction {
    pub rho: Vec<f64>,
    pub meta: CellMeta,
}

impl CellPrediction {
    /// Index of the most probable class (lowest index on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.rho)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    pub fn network(&self) -> Network {
        Network::new(
            self.architecture.clone(),
            self.weights.iter().map(|&w| w as f64).collect(),
        )
    }

    fn check_shape(&self, cell: &PpgCell) -> Result<()> {
        let a = &self.architecture;
        if cell.rows != a.rows || cell.omega != a.omega {
            return Err(Error::Shape {
                expected: format!("{}x{} cell", a.rows, a.omega),
                actual: format!("{}x{} cell", cell.rows, cell.omega),
            });
        }
        Ok(())
    }

    pub fn predict(&self, cell: &PpgCell) -> Result<CellPrediction> {
        Ok(self.predict_all(std::slice::from_ref(cell))?.remove(0))
    }

    /// Predicts a batch, converting the weights once.
    pub fn predict_all(&self, cells: &[PpgCell]) -> Result<Vec<CellPrediction>> {
        let net = self.network();
        cells
            .iter()
            .map(|cell| {
                self.check_shape(cell)?;
                Ok(CellPrediction {
                    rho: net.predict(&cell.values),
                    meta: cell.meta.clone(),
                })
            })
            .collect()
    }

    /// Fails unless the model's class list equals `classes` exactly.
    pub fn check_classes(&self, classes: &[String]) -> Result<()> {
        if self.classes != classes {
            return Err(Error::ClassMismatch {
                model: self.classes.clone(),
                manifest: classes.to_vec(),
            });
        }
        Ok(())
    }
}

/// Predictions for a set of cells, parallel across cells.
pub fn predict_many(model: &ClassifierModel, cells: &[PpgCell]) -> Result<Vec<CellPrediction>> {
    use rayon::prelude::*;
    let net = model.network();
    cells
        .par_iter()
        .map(|cell| {
            model.check_shape(cell)?;
            Ok(CellPrediction {
                rho: net.predict(&cell.values),
                meta: cell.meta.clone(),
            })
        })
        .collect()
}
