//! Generator "fingerprints": residuals between aligned faces and their
//! temporal non-local means estimate, averaged per class with the real-class
//! residual subtracted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfmt::{Container, FLAG_RGB};
use crate::error::{Error, Result};
use crate::raster::RgbImage;
use crate::rectify::RectifiedFace;

pub const FINGERPRINT_MAGIC: [u8; 4] = *b"PPGF";
pub const FINGERPRINT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlmParams {
    /// Side of the square comparison patch (odd).
    pub patch: usize,
    /// Side of the square search window (odd), applied in every frame of the stack.
    pub search: usize,
    /// Filtering strength on the 0–255 scale.
    pub h: f64,
    /// Frames in the temporal stack (odd).
    pub stack: usize,
    /// Noise standard deviation; estimated from the center frame when absent.
    pub noise_sigma: Option<f64>,
}

impl Default for NlmParams {
    fn default() -> Self {
        NlmParams {
            patch: 7,
            search: 21,
            h: 3.0,
            stack: 5,
            noise_sigma: None,
        }
    }
}

impl NlmParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch % 2 == 0 || self.search % 2 == 0 || self.stack % 2 == 0 {
            return Err(Error::Config("NLM patch, search and stack sizes must be odd".into()));
        }
        if self.stack < 3 {
            return Err(Error::Config(format!("NLM stack of {} frames; need at least 3", self.stack)));
        }
        if !(self.h > 0.0) {
            return Err(Error::Config("NLM strength h must be positive".into()));
        }
        Ok(())
    }
}

/// Immerkær's fast noise estimate, averaged over channels, using only
/// pixels whose 3×3 neighbourhood is valid.
pub fn estimate_noise_sigma(face: &RectifiedFace) -> f64 {
    let (w, h) = (face.width, face.height);
    let mut sum = 0.0;
    let mut n = 0usize;
    const K: [[f64; 3]; 3] = [[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if !(0..3).all(|j| (0..3).all(|i| face.valid[(y + j - 1) * w + x + i - 1])) {
                continue;
            }
            for c in 0..3 {
                let mut acc = 0.0;
                for (j, row) in K.iter().enumerate() {
                    for (i, k) in row.iter().enumerate() {
                        acc += k * face.data[((y + j - 1) * w + x + i - 1) * 3 + c] as f64;
                    }
                }
                sum += acc.abs();
                n += 1;
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    (std::f64::consts::PI / 2.0).sqrt() * sum / (6.0 * n as f64)
}

/// Denoises the center frame of an odd stack of aligned faces.
///
/// Every pixel becomes a weighted mean of the pixels at all offsets of the
/// search window in every frame of the stack. A candidate's weight is
/// `exp(-max(d² - 2σ², 0) / h²)` where `d²` is the mean squared difference
/// between the two patches over all channels.
pub fn temporal_nlm_denoise(frames: &[RectifiedFace], params: &NlmParams) -> Result<RectifiedFace> {
    params.validate()?;
    if frames.len() < 3 || frames.len() % 2 == 0 {
        return Err(Error::invalid(format!("NLM needs an odd stack of at least 3 frames, got {}", frames.len())));
    }
    let center = &frames[frames.len() / 2];
    let (w, h) = (center.width, center.height);
    if frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(Error::Shape {
            expected: format!("{w}x{h} frames"),
            actual: "mixed sizes".into(),
        });
    }
    let sigma = params.noise_sigma.unwrap_or_else(|| estimate_noise_sigma(center));
    let two_sigma2 = 2.0 * sigma * sigma;
    let inv_h2 = 1.0 / (params.h * params.h);
    let pr = (params.patch / 2) as isize;
    let sr = (params.search / 2) as isize;

    let mut acc = vec![0.0f64; w * h * 3];
    let mut wsum = vec![0.0f64; w * h];
    let mut diff = vec![0.0f64; w * h];
    let mut integral = vec![0.0f64; (w + 1) * (h + 1)];
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    for other in frames {
        for dy in -sr..=sr {
            for dx in -sr..=sr {
                for y in 0..h {
                    let sy = clamp(y as isize + dy, h);
                    for x in 0..w {
                        let sx = clamp(x as isize + dx, w);
                        let a = (y * w + x) * 3;
                        let b = (sy * w + sx) * 3;
                        let mut d = 0.0;
                        for c in 0..3 {
                            let e = (center.data[a + c] - other.data[b + c]) as f64;
                            d += e * e;
                        }
                        diff[y * w + x] = d / 3.0;
                    }
                }
                for y in 0..h {
                    let mut row = 0.0;
                    for x in 0..w {
                        row += diff[y * w + x];
                        integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
                    }
                }
                for y in 0..h {
                    let y0 = (y as isize - pr).max(0) as usize;
                    let y1 = (y as isize + pr + 1).min(h as isize) as usize;
                    let sy = clamp(y as isize + dy, h);
                    for x in 0..w {
                        let x0 = (x as isize - pr).max(0) as usize;
                        let x1 = (x as isize + pr + 1).min(w as isize) as usize;
                        let s = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] - integral[y1 * (w + 1) + x0]
                            + integral[y0 * (w + 1) + x0];
                        let d2 = s / ((y1 - y0) * (x1 - x0)) as f64;
                        let arg = (d2 - two_sigma2).max(0.0) * inv_h2;
                        if arg > 30.0 {
                            continue;
                        }
                        let weight = (-arg).exp();
                        let sx = clamp(x as isize + dx, w);
                        let b = (sy * w + sx) * 3;
                        let i = y * w + x;
                        wsum[i] += weight;
                        for c in 0..3 {
                            acc[i * 3 + c] += weight * other.data[b + c] as f64;
                        }
                    }
                }
            }
        }
    }
    let data = acc
        .iter()
        .enumerate()
        .map(|(i, &v)| (v / wsum[i / 3]) as f32)
        .collect();
    Ok(RectifiedFace {
        data,
        ..center.clone()
    })
}

/// Running sum of `original - denoised` residuals for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAccumulator {
    pub width: usize,
    pub height: usize,
    pub sum: Vec<f64>,
    pub count: usize,
    pub class_label: String,
    pub videos: Vec<String>,
}

impl ResidualAccumulator {
    pub fn new(class_label: impl Into<String>, width: usize, height: usize) -> Self {
        ResidualAccumulator {
            width,
            height,
            sum: vec![0.0; width * height * 3],
            count: 0,
            class_label: class_label.into(),
            videos: Vec::new(),
        }
    }

    pub fn add(&mut self, original: &RectifiedFace, denoised: &RectifiedFace, video_id: &str) -> Result<()> {
        for f in [original, denoised] {
            if f.width != self.width || f.height != self.height {
                return Err(Error::Shape {
                    expected: format!("{}x{}", self.width, self.height),
                    actual: format!("{}x{}", f.width, f.height),
                });
            }
        }
        for ((s, &o), &d) in self.sum.iter_mut().zip(&original.data).zip(&denoised.data) {
            *s += o as f64 - d as f64;
        }
        self.count += 1;
        self.videos.push(video_id.to_string());
        Ok(())
    }

    /// Combines partial accumulators from parallel workers.
    pub fn merge(&mut self, other: &ResidualAccumulator) -> Result<()> {
        if other.sum.len() != self.sum.len() || other.class_label != self.class_label {
            return Err(Error::invalid("cannot merge accumulators of different shape or class"));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.count += other.count;
        self.videos.extend(other.videos.iter().cloned());
        Ok(())
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::invalid(format!("no residuals accumulated for class '{}'", self.class_label)));
        }
        Ok(self.sum.iter().map(|v| v / self.count as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub videos: Vec<String>,
    pub baseline_videos: Vec<String>,
    pub nlm: NlmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FingerprintMeta {
    class_label: String,
    provenance: Provenance,
}

/// Normalized mean residual, interleaved RGB in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub class_label: String,
    pub provenance: Provenance,
}

/// Mean class residual minus the mean real residual (if given), scaled so
/// the largest magnitude is 1. An all-zero difference stays zero.
pub fn finalize_fingerprint(
    class: &ResidualAccumulator,
    real: Option<&ResidualAccumulator>,
    nlm: NlmParams,
) -> Result<Fingerprint> {
    let mut mean = class.mean()?;
    if let Some(real) = real {
        if real.sum.len() != class.sum.len() {
            return Err(Error::Shape {
                expected: format!("{}x{}", class.width, class.height),
                actual: format!("{}x{}", real.width, real.height),
            });
        }
        for (m, r) in mean.iter_mut().zip(real.mean()?) {
            *m -= r;
        }
    }
    let peak = mean.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let values = if peak > 0.0 {
        mean.iter().map(|v| (v / peak).clamp(-1.0, 1.0) as f32).collect()
    } else {
        vec![0.0; mean.len()]
    };
    Ok(Fingerprint {
        width: class.width,
        height: class.height,
        values,
        class_label: class.class_label.clone(),
        provenance: Provenance {
            videos: class.videos.clone(),
            baseline_videos: real.map(|r| r.videos.clone()).unwrap_or_default(),
            nlm,
        },
    })
}

impl Fingerprint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&FingerprintMeta {
            class_label: self.class_label.clone(),
            provenance: self.provenance.clone(),
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Container {
            magic: FINGERPRINT_MAGIC,
            version: FINGERPRINT_VERSION,
            flags: FLAG_RGB,
            rows: self.height as u16,
            cols: self.width as u16,
            meta,
            data: self.values.clone(),
        }
        .encode())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Container::decode(bytes, FINGERPRINT_MAGIC, FINGERPRINT_VERSION)?;
        if c.channels() != 3 {
            return Err(Error::invalid("fingerprint file must hold RGB data"));
        }
        let meta: FingerprintMeta = serde_json::from_slice(&c.meta).map_err(|e| Error::invalid(format!("fingerprint metadata: {e}")))?;
        Ok(Fingerprint {
            width: c.cols as usize,
            height: c.rows as usize,
            values: c.data,
            class_label: meta.class_label,
            provenance: meta.provenance,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Fingerprint::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Signed residual rendering, `value * 127.5 + 127.5`.
    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.values.iter().map(|&v| (v as f64 * 127.5 + 127.5).round().clamp(0.0, 255.0) as u8).collect(),
        }
    }
}

/// Pearson correlation over the entries where `mask` is true (all when `None`).
pub fn correlation(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let (mut n, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        if keep(i) {
            n += 1.0;
            sa += a[i];
            sb += b[i];
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        if keep(i) {
            let (x, y) = (a[i] - ma, b[i] - mb);
            num += x * y;
            da += x * x;
            db += y * y;
        }
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}
