//! Grid-wise chrominance pulse signals and their power spectra.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rectify::RectifiedFace;

/// A grid square is dropped for the whole window when fewer than this
/// fraction of its pixels are valid in any frame.
pub const MIN_VALID_FRACTION: f64 = 0.25;

/// Human pulse band in Hz, used by the optional band-pass.
pub const PULSE_BAND: (f64, f64) = (0.65, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub cols: usize,
    pub rows: usize,
}

impl Default for GridLayout {
    fn default() -> Self {
        GridLayout { cols: 8, rows: 4 }
    }
}

impl GridLayout {
    pub fn squares(&self) -> usize {
        self.cols * self.rows
    }

    /// Pixel rectangle `(x0, y0, w, h)` of square `r` (row-major).
    pub fn square_rect(&self, r: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let (w, h) = (width / self.cols, height / self.rows);
        ((r % self.cols) * w, (r / self.cols) * h, w, h)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpgOptions {
    /// Hann taper before the periodogram.
    #[serde(default)]
    pub taper: bool,
    /// Zero spectral content outside [`PULSE_BAND`] before the periodogram.
    #[serde(default)]
    pub bandpass: bool,
}

/// Spatial mean RGB per grid square per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTraceSet {
    pub squares: usize,
    pub omega: usize,
    /// `means[r][t]`
    pub means: Vec<Vec<[f64; 3]>>,
    /// `valid_mask[r][t]`: enough valid pixels in square `r` at frame `t`.
    pub valid_mask: Vec<Vec<bool>>,
}

impl GridTraceSet {
    /// A square is usable only if it is valid in every frame of the window.
    pub fn square_valid(&self, r: usize) -> bool {
        self.valid_mask[r].iter().all(|&v| v)
    }
}

/// Mean of the valid pixels of every grid square in every frame.
pub fn grid_means(faces: &[RectifiedFace], layout: GridLayout) -> Result<GridTraceSet> {
    if faces.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    let mut set = GridTraceSet::empty(layout, faces.len());
    for face in faces {
        set.push_frame(face, layout)?;
    }
    Ok(set)
}

impl GridTraceSet {
    pub fn empty(layout: GridLayout, capacity: usize) -> Self {
        let n = layout.squares();
        GridTraceSet {
            squares: n,
            omega: 0,
            means: vec![Vec::with_capacity(capacity); n],
            valid_mask: vec![Vec::with_capacity(capacity); n],
        }
    }

    /// Appends one frame's square means.
    pub fn push_frame(&mut self, face: &RectifiedFace, layout: GridLayout) -> Result<()> {
        let (width, height) = (face.width, face.height);
        if width % layout.cols != 0 || height % layout.rows != 0 {
            return Err(Error::Config(format!(
                "{width}x{height} raster does not divide into a {}x{} grid",
                layout.cols, layout.rows
            )));
        }
        if layout.squares() != self.squares {
            return Err(Error::Shape {
                expected: format!("{} squares", self.squares),
                actual: format!("{} squares", layout.squares()),
            });
        }
        for r in 0..self.squares {
            let (x0, y0, w, h) = layout.square_rect(r, width, height);
            let mut sum = [0.0f64; 3];
            let mut count = 0usize;
            for y in y0..y0 + h {
                let row = y * width;
                for x in x0..x0 + w {
                    if face.valid[row + x] {
                        let i = (row + x) * 3;
                        sum[0] += face.data[i] as f64;
                        sum[1] += face.data[i + 1] as f64;
                        sum[2] += face.data[i + 2] as f64;
                        count += 1;
                    }
                }
            }
            let mean = if count > 0 {
                let k = count as f64;
                [sum[0] / k, sum[1] / k, sum[2] / k]
            } else {
                [0.0; 3]
            };
            self.means[r].push(mean);
            self.valid_mask[r].push(count as f64 >= MIN_VALID_FRACTION * (w * h) as f64);
        }
        self.omega += 1;
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// CHROM pulse signal of one RGB trace.
///
/// Channels are normalized by their temporal means, projected onto the two
/// chrominance axes `Xs = 3R - 2G` and `Ys = 1.5R + G - 1.5B`, and combined
/// as `Xs - (σ(Xs)/σ(Ys)) Ys`; the result is returned with its mean removed.
/// `None` when a channel has zero temporal mean. A flat trace yields zeros.
pub fn chrom_ppg(trace: &[[f64; 3]]) -> Option<Vec<f64>> {
    let n = trace.len() as f64;
    let mut chan_mean = [0.0; 3];
    for px in trace {
        for c in 0..3 {
            chan_mean[c] += px[c];
        }
    }
    for m in &mut chan_mean {
        *m /= n;
    }
    if chan_mean.iter().any(|&m| m == 0.0 || !m.is_finite()) {
        return None;
    }
    let mut xs = Vec::with_capacity(trace.len());
    let mut ys = Vec::with_capacity(trace.len());
    for px in trace {
        let r = px[0] / chan_mean[0];
        let g = px[1] / chan_mean[1];
        let b = px[2] / chan_mean[2];
        xs.push(3.0 * r - 2.0 * g);
        ys.push(1.5 * r + g - 1.5 * b);
    }
    let sy = std_dev(&ys);
    if sy < 1e-12 {
        return Some(vec![0.0; trace.len()]);
    }
    let alpha = std_dev(&xs) / sy;
    let s: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - alpha * y).collect();
    let m = mean(&s);
    Some(s.into_iter().map(|v| v - m).collect())
}

fn fft(buf: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(buf);
}

/// One-sided periodogram over the `⌊n/2⌋+1` non-negative frequency bins,
/// scaled so the bins sum to the signal energy `Σ s²` (interior bins
/// carry both the positive and the mirrored negative frequency).
pub fn periodogram(signal: &[f64], taper: bool) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = if taper {
        // Hann, rescaled to unit mean square so energy stays comparable
        let w: Vec<f64> = (0..n).map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos()).collect();
        let rms = (w.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        signal.iter().zip(&w).map(|(s, w)| Complex::new(s * w / rms, 0.0)).collect()
    } else {
        signal.iter().map(|&s| Complex::new(s, 0.0)).collect()
    };
    fft(&mut buf, false);
    let half = n / 2;
    (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / n as f64;
            if k == 0 || (n % 2 == 0 && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Linear resampling of `xs` onto `n` evenly spaced positions spanning the
/// same first-to-last range.
pub fn resample_linear(xs: &[f64], n: usize) -> Vec<f64> {
    if xs.is_empty() || n == 0 {
        return vec![0.0; n];
    }
    if xs.len() == 1 || n == 1 {
        return vec![xs[0]; n];
    }
    let scale = (xs.len() - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|j| {
            let pos = j as f64 * scale;
            let i = (pos.floor() as usize).min(xs.len() - 2);
            let f = pos - i as f64;
            xs[i] + (xs[i + 1] - xs[i]) * f
        })
        .collect()
}

/// Maps a resampled PSD bin back to its fractional periodogram bin.
pub fn resampled_to_periodogram_bin(bin: usize, omega: usize) -> f64 {
    bin as f64 * (omega / 2) as f64 / (omega - 1) as f64
}

/// Periodogram stretched to `signal.len()` bins.
pub fn psd(signal: &[f64], taper: bool) -> Vec<f64> {
    resample_linear(&periodogram(signal, taper), signal.len())
}

/// Removes spectral content outside `[lo, hi]` Hz and re-centers the signal.
pub fn bandpass(signal: &[f64], fps: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&s| Complex::new(s, 0.0)).collect();
    fft(&mut buf, false);
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        let f = kk as f64 * fps / n as f64;
        if f < lo || f > hi {
            *v = Complex::new(0.0, 0.0);
        }
    }
    fft(&mut buf, true);
    let out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let m = mean(&out);
    out.into_iter().map(|v| v - m).collect()
}

/// `rows × omega` matrix with per-row validity. Used for both the raw CHROM
/// block and the PSD block.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub rows: usize,
    pub omega: usize,
    /// Row-major.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SignalMatrix {
    pub fn zeros(rows: usize, omega: usize) -> Self {
        SignalMatrix {
            rows,
            omega,
            values: vec![0.0; rows * omega],
            valid: vec![false; rows],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.omega..(r + 1) * self.omega]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.omega..(r + 1) * self.omega]
    }
}

/// One CHROM trace per grid square; invalid rows are zero.
pub type RawPpgMatrix = SignalMatrix;
/// Resampled periodogram of each raw row; invalid rows are zero.
pub type PsdMatrix = SignalMatrix;

/// CHROM signal of every valid square.
pub fn raw_ppg_matrix(traces: &GridTraceSet, fps: f64, options: &PpgOptions) -> RawPpgMatrix {
    let mut m = SignalMatrix::zeros(traces.squares, traces.omega);
    for r in 0..traces.squares {
        if !traces.square_valid(r) {
            continue;
        }
        let Some(mut s) = chrom_ppg(&traces.means[r]) else {
            continue;
        };
        if options.bandpass {
            s = bandpass(&s, fps, PULSE_BAND.0, PULSE_BAND.1);
        }
        m.row_mut(r).copy_from_slice(&s);
        m.valid[r] = true;
    }
    m
}

pub fn psd_matrix(raw: &RawPpgMatrix, options: &PpgOptions) -> PsdMatrix {
    let mut m = SignalMatrix::zeros(raw.rows, raw.omega);
    for r in 0..raw.rows {
        if raw.valid[r] {
            let p = psd(raw.row(r), options.taper);
            m.row_mut(r).copy_from_slice(&p);
            m.valid[r] = true;
        }
    }
    m
}
