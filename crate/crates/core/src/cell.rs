//! PPG cells: normalized raw CHROM rows stacked over their power spectra.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfmt::{Container, FLAG_HAS_PSD};
use crate::error::{Error, Result};
use crate::ppg::{PsdMatrix, RawPpgMatrix};
use crate::raster;

pub const CELL_MAGIC: [u8; 4] = *b"PPGC";
pub const CELL_VERSION: u8 = 1;
pub const CELL_EXTENSION: &str = "ppgc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    WithPsd,
    RawOnly,
}

/// Per-block min/max used by normalization; `min == max` for constant blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub video_id: String,
    pub face_id: u32,
    pub window_start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<String>,
    pub raw_range: BlockRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_range: Option<BlockRange>,
}

impl Default for CellMeta {
    fn default() -> Self {
        CellMeta {
            video_id: String::new(),
            face_id: 0,
            window_start: 0,
            class_label: None,
            raw_range: BlockRange { min: 0.0, max: 0.0 },
            psd_range: None,
        }
    }
}

/// `rows × omega` values in `[0,1]`, row-major. With PSD the first half of
/// the rows is the raw block and the second half the spectral block.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgCell {
    pub rows: usize,
    pub omega: usize,
    pub has_psd: bool,
    pub values: Vec<f32>,
    pub meta: CellMeta,
}

/// Min-max maps `block` onto `[0,1]`; a constant block maps to 0.5.
fn normalize_block(block: &[f64], out: &mut Vec<f32>) -> BlockRange {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in block {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        out.extend(std::iter::repeat_n(0.5f32, block.len()));
        return BlockRange { min: lo, max: lo };
    }
    let span = hi - lo;
    out.extend(block.iter().map(|&v| ((v - lo) / span).clamp(0.0, 1.0) as f32));
    BlockRange { min: lo, max: hi }
}

/// Builds a cell from the raw and spectral blocks, each normalized on its own.
pub fn assemble(raw: &RawPpgMatrix, psd: &PsdMatrix, mode: CellMode, mut meta: CellMeta) -> Result<PpgCell> {
    if raw.rows != psd.rows || raw.omega != psd.omega {
        return Err(Error::Shape {
            expected: format!("{}x{}", raw.rows, raw.omega),
            actual: format!("{}x{}", psd.rows, psd.omega),
        });
    }
    let has_psd = mode == CellMode::WithPsd;
    let rows = if has_psd { raw.rows * 2 } else { raw.rows };
    let mut values = Vec::with_capacity(rows * raw.omega);
    meta.raw_range = normalize_block(&raw.values, &mut values);
    meta.psd_range = has_psd.then(|| normalize_block(&psd.values, &mut values));
    Ok(PpgCell {
        rows,
        omega: raw.omega,
        has_psd,
        values,
        meta,
    })
}

impl PpgCell {
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.values[r * self.omega + c]
    }

    /// Deterministic file name `{video}_{face}_{start}_{omega}.ppgc`.
    pub fn file_name(video_id: &str, face_id: u32, window_start: usize, omega: usize) -> String {
        format!("{video_id}_{face_id}_{window_start}_{omega}.{CELL_EXTENSION}")
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.rows > u16::MAX as usize || self.omega > u16::MAX as usize {
            return Err(Error::invalid(format!("cell {}x{} too large", self.rows, self.omega)));
        }
        if self.values.len() != self.rows * self.omega {
            return Err(Error::Shape {
                expected: format!("{} values", self.rows * self.omega),
                actual: format!("{} values", self.values.len()),
            });
        }
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Container {
            magic: CELL_MAGIC,
            version: CELL_VERSION,
            flags: if self.has_psd { FLAG_HAS_PSD } else { 0 },
            rows: self.rows as u16,
            cols: self.omega as u16,
            meta,
            data: self.values.clone(),
        }
        .encode())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Container::decode(bytes, CELL_MAGIC, CELL_VERSION)?;
        if c.channels() != 1 {
            return Err(Error::invalid("cell file declares RGB data"));
        }
        let meta: CellMeta = serde_json::from_slice(&c.meta).map_err(|e| Error::invalid(format!("cell metadata: {e}")))?;
        Ok(PpgCell {
            rows: c.rows as usize,
            omega: c.cols as usize,
            has_psd: c.flags & FLAG_HAS_PSD != 0,
            values: c.data,
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("ppgc.tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        PpgCell::from_bytes(&bytes)
    }

    /// The raw block alone. Blocks are normalized independently, so this
    /// equals the cell assembled in [`CellMode::RawOnly`].
    pub fn without_psd(&self) -> PpgCell {
        if !self.has_psd {
            return self.clone();
        }
        let rows = self.rows / 2;
        PpgCell {
            rows,
            omega: self.omega,
            has_psd: false,
            values: self.values[..rows * self.omega].to_vec(),
            meta: CellMeta {
                psd_range: None,
                ..self.meta.clone()
            },
        }
    }

    pub fn mode(&self) -> CellMode {
        if self.has_psd {
            CellMode::WithPsd
        } else {
            CellMode::RawOnly
        }
    }

    /// 8-bit grayscale rendering, pixel `(r, c) = round(255 * value)`.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| (255.0 * v).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        raster::save_gray_png(path, self.omega, self.rows, &self.to_gray8())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppg::SignalMatrix;
    use proptest::prelude::*;

    fn matrix(rows: usize, omega: usize, f: impl Fn(usize, usize) -> f64) -> SignalMatrix {
        let mut m = SignalMatrix::zeros(rows, omega);
        for r in 0..rows {
            for c in 0..omega {
                m.values[r * omega + c] = f(r, c);
            }
            m.valid[r] = true;
        }
        m
    }

    #[test]
    fn dropping_psd_matches_raw_only_assembly() {
        let raw = matrix(32, 16, |r, c| (r * 16 + c) as f64 * 0.1 - 3.0);
        let psd = matrix(32, 16, |r, c| ((r + c) % 5) as f64);
        let meta = CellMeta {
            video_id: "v".into(),
            ..CellMeta::default()
        };
        let with = assemble(&raw, &psd, CellMode::WithPsd, meta.clone()).unwrap();
        let only = assemble(&raw, &psd, CellMode::RawOnly, meta).unwrap();
        assert_eq!(with.without_psd(), only);
        assert_eq!(only.without_psd(), only);
    }

    #[test]
    fn affine_normalization() {
        let raw = matrix(32, 16, |r, c| match (r, c) {
            (0, 0) => -2.0,
            (0, 1) => 2.0,
            _ => 0.0,
        });
        let psd = matrix(32, 16, |r, c| (r * c) as f64);
        let cell = assemble(&raw, &psd, CellMode::WithPsd, CellMeta::default()).unwrap();
        assert_eq!((cell.rows, cell.omega), (64, 16));
        assert_eq!(cell.get(0, 0), 0.0);
        assert_eq!(cell.get(0, 1), 1.0);
        assert_eq!(cell.get(5, 5), 0.5);
        assert_eq!(cell.get(32, 0), 0.0);
        assert_eq!(cell.get(63, 15), 1.0);
        assert_eq!(cell.meta.raw_range, BlockRange { min: -2.0, max: 2.0 });
    }

    #[test]
    fn constant_blocks_are_half() {
        let z = SignalMatrix::zeros(32, 16);
        let cell = assemble(&z, &z, CellMode::WithPsd, CellMeta::default()).unwrap();
        assert!(cell.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn raw_only_mode() {
        let z = matrix(32, 16, |r, c| (r + c) as f64);
        let cell = assemble(&z, &z, CellMode::RawOnly, CellMeta::default()).unwrap();
        assert_eq!((cell.rows, cell.has_psd), (32, false));
        let back = PpgCell::from_bytes(&cell.to_bytes().unwrap()).unwrap();
        assert!(!back.has_psd);
        assert_eq!(back, cell);
    }

    #[test]
    fn shape_mismatch() {
        assert!(assemble(&SignalMatrix::zeros(32, 16), &SignalMatrix::zeros(32, 17), CellMode::WithPsd, CellMeta::default()).is_err());
    }

    #[test]
    fn png_pixels_match_values() {
        let raw = matrix(32, 64, |r, c| ((r * 31 + c * 17) % 97) as f64);
        let psd = matrix(32, 64, |r, c| ((r + 3 * c) % 13) as f64);
        let cell = assemble(&raw, &psd, CellMode::WithPsd, CellMeta::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        cell.write_png(&path).unwrap();
        let (w, h, px) = raster::load_gray_png(&path).unwrap();
        assert_eq!((w, h), (64, 64));
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!(px[r * 64 + c] as f32, (255.0 * cell.get(r, c)).round());
            }
        }
    }

    #[test]
    fn corrupted_checksum_rejected() {
        let z = matrix(32, 16, |r, c| (r * c) as f64);
        let cell = assemble(&z, &z, CellMode::WithPsd, CellMeta::default()).unwrap();
        let mut bytes = cell.to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 2] ^= 0x10;
        assert!(matches!(PpgCell::from_bytes(&bytes), Err(Error::Checksum { .. })));
    }

    proptest! {
        #[test]
        fn normalization_ignores_affine_rescaling(scale in 0.01f64..100.0, shift in -50.0f64..50.0, seed in 0u64..1000) {
            let f = |r: usize, c: usize| (((r * 131 + c * 71) as u64 ^ seed) % 1009) as f64;
            let a = matrix(32, 16, f);
            let b = matrix(32, 16, |r, c| f(r, c) * scale + shift);
            let ca = assemble(&a, &a, CellMode::WithPsd, CellMeta::default()).unwrap();
            let cb = assemble(&b, &b, CellMode::WithPsd, CellMeta::default()).unwrap();
            for (x, y) in ca.values.iter().zip(&cb.values) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
            prop_assert!(ca.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
