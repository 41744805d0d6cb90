//! Per-video orchestration: frames and landmarks in, windowed PPG signals
//! (and fingerprint stacks) out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{assemble, CellMeta, CellMode, PpgCell};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::fingerprint::{temporal_nlm_denoise, NlmParams, ResidualAccumulator};
use crate::geometry::Point2;
use crate::ingest::{enumerate_windows, FrameWindow, LandmarkSet, VideoEntry};
use crate::ppg::{psd_matrix, raw_ppg_matrix, GridTraceSet, PsdMatrix, RawPpgMatrix};
use crate::raster::{png_dimensions, RgbImage};
use crate::rectify::{RectifiedFace, WindowWarp};
use crate::synth::SynthVideo;

/// Anything that can hand out frames and landmarks by index.
pub trait VideoSource: Sync {
    fn id(&self) -> &str;
    fn fps(&self) -> f64;
    fn frame_count(&self) -> usize;
    fn frame(&self, index: usize) -> Result<RgbImage>;
    fn landmarks(&self) -> &LandmarkSet;
}

impl VideoSource for SynthVideo {
    fn id(&self) -> &str {
        &self.id
    }
    fn fps(&self) -> f64 {
        self.config.fps
    }
    fn frame_count(&self) -> usize {
        self.config.frames
    }
    fn frame(&self, index: usize) -> Result<RgbImage> {
        SynthVideo::frame(self, index)
    }
    fn landmarks(&self) -> &LandmarkSet {
        SynthVideo::landmarks(self)
    }
}

/// A video stored as a directory of `%06d.png` frames plus a landmark file.
#[derive(Debug, Clone)]
pub struct DiskVideo {
    pub entry: VideoEntry,
    landmarks: LandmarkSet,
    frame_count: usize,
}

impl DiskVideo {
    pub fn open(entry: &VideoEntry) -> Result<Self> {
        let dir = &entry.frames_path;
        let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut indices = Vec::new();
        for item in listing {
            let item = item.map_err(|e| Error::io(dir, e))?;
            let name = item.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".png") {
                if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
                    indices.push(stem.parse::<usize>().expect("six digits"));
                }
            }
        }
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(Error::invalid(format!("no frames in {}", dir.display())));
        }
        if let Some(gap) = indices.iter().enumerate().find(|(i, &f)| *i != f) {
            return Err(Error::invalid(format!("{}: frame {:06}.png missing", dir.display(), gap.0)));
        }
        let frame_count = indices.len();
        let (w, h) = png_dimensions(&dir.join("000000.png"))?;
        let landmarks = LandmarkSet::load(&entry.landmarks_path)?;
        landmarks.validate_against(frame_count, w, h)?;
        Ok(DiskVideo {
            entry: entry.clone(),
            landmarks,
            frame_count,
        })
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.entry.frames_path.join(format!("{index:06}.png"))
    }
}

impl VideoSource for DiskVideo {
    fn id(&self) -> &str {
        &self.entry.id
    }
    fn fps(&self) -> f64 {
        self.entry.fps
    }
    fn frame_count(&self) -> usize {
        self.frame_count
    }
    fn frame(&self, index: usize) -> Result<RgbImage> {
        RgbImage::load_png(&self.frame_path(index))
    }
    fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }
}

/// Raw and spectral blocks of one window, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSignals {
    pub window: FrameWindow,
    pub raw: RawPpgMatrix,
    pub psd: PsdMatrix,
}

impl WindowSignals {
    pub fn cell(&self, video_id: &str, class_label: Option<&str>, mode: CellMode) -> Result<PpgCell> {
        assemble(
            &self.raw,
            &self.psd,
            mode,
            CellMeta {
                video_id: video_id.to_string(),
                face_id: self.window.face_id,
                window_start: self.window.start,
                class_label: class_label.map(str::to_string),
                ..CellMeta::default()
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub face_id: u32,
    pub start: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoExtraction {
    pub video_id: String,
    pub windows: Vec<WindowSignals>,
    pub skipped: Vec<SkippedWindow>,
}

impl VideoExtraction {
    pub fn cells(&self, class_label: Option<&str>, mode: CellMode) -> Result<Vec<PpgCell>> {
        self.windows.iter().map(|w| w.cell(&self.video_id, class_label, mode)).collect()
    }
}

fn window_points<'a, S: VideoSource + ?Sized>(src: &'a S, window: &FrameWindow) -> Result<Vec<&'a [Point2]>> {
    window
        .frames()
        .map(|f| {
            src.landmarks()
                .get(f, window.face_id)
                .map(|r| r.points.as_slice())
                .ok_or_else(|| Error::invalid(format!("{}: no landmarks for face {} at frame {f}", src.id(), window.face_id)))
        })
        .collect()
}

fn mean_shape(points: &[&[Point2]]) -> Vec<Point2> {
    let n = points.len() as f64;
    (0..points[0].len())
        .map(|k| {
            let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[k].x, y + p[k].y));
            Point2::new(sx / n, sy / n)
        })
        .collect()
}

/// Rectifies every frame of `window` and reduces it to grid traces. With
/// `dump`, each rectified frame is also written as `%06d_face%d.png`.
pub fn extract_window<S: VideoSource + ?Sized>(
    src: &S,
    window: &FrameWindow,
    config: &PipelineConfig,
    dump: Option<&Path>,
) -> Result<WindowSignals> {
    let points = window_points(src, window)?;
    let warp = WindowWarp::from_mean_shape(&mean_shape(&points), config.raster_width, config.raster_height)?;
    let mut traces = GridTraceSet::empty(config.grid, window.length);
    for (f, pts) in window.frames().zip(&points) {
        let frame = src.frame(f)?;
        let mut face = warp.rectify(&frame, pts)?;
        face.frame_index = f;
        face.face_id = window.face_id;
        if let Some(dir) = dump {
            let path = dir.join(format!("{f:06}_face{}.png", window.face_id));
            face.to_rgb8().save_png(&path)?;
        }
        traces.push_frame(&face, config.grid)?;
    }
    let raw = raw_ppg_matrix(&traces, src.fps(), &config.ppg);
    let psd = psd_matrix(&raw, &config.ppg);
    Ok(WindowSignals {
        window: *window,
        raw,
        psd,
    })
}

/// Like [`extract_window`], but geometry failures and windows without a
/// usable grid square come back as `Ok(Err(reason))`.
pub fn try_extract_window<S: VideoSource + ?Sized>(
    src: &S,
    window: &FrameWindow,
    config: &PipelineConfig,
    dump: Option<&Path>,
) -> Result<std::result::Result<WindowSignals, String>> {
    match extract_window(src, window, config, dump) {
        Ok(s) if !s.raw.valid.iter().any(|&v| v) => Ok(Err("no grid square has enough valid pixels".into())),
        Ok(s) => Ok(Ok(s)),
        Err(e @ (Error::Degenerate(_) | Error::Invalid(_))) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Directory for `--dump-rectified` output of one video, created on demand.
pub fn dump_dir_for(root: Option<&Path>, video_id: &str) -> Result<Option<PathBuf>> {
    let Some(root) = root else {
        return Ok(None);
    };
    let dir = root.join(video_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(Some(dir))
}

/// Signals of every usable window of a video. Windows whose geometry
/// degenerates or whose grid has no usable square are reported as skipped;
/// I/O and format errors abort.
pub fn extract_video<S: VideoSource + ?Sized>(
    src: &S,
    config: &PipelineConfig,
    dump: Option<&Path>,
) -> Result<VideoExtraction> {
    let windows = enumerate_windows(src.landmarks(), src.frame_count(), config.omega, config.min_confidence)?;
    let dump_dir = dump_dir_for(dump, src.id())?;
    let mut out = VideoExtraction {
        video_id: src.id().to_string(),
        windows: Vec::with_capacity(windows.len()),
        skipped: Vec::new(),
    };
    for w in &windows {
        match try_extract_window(src, w, config, dump_dir.as_deref())? {
            Ok(s) => out.windows.push(s),
            Err(reason) => out.skipped.push(SkippedWindow {
                face_id: w.face_id,
                start: w.start,
                reason,
            }),
        }
    }
    Ok(out)
}

/// Rectified stack centred in the first window of the lowest face id:
/// `nlm.stack` consecutive frames, all warped onto that window's mesh.
pub fn fingerprint_stack<S: VideoSource + ?Sized>(
    src: &S,
    config: &PipelineConfig,
    nlm: &NlmParams,
) -> Result<Option<Vec<RectifiedFace>>> {
    let windows = enumerate_windows(src.landmarks(), src.frame_count(), config.omega, config.min_confidence)?;
    let Some(window) = windows.iter().min_by_key(|w| (w.face_id, w.start)) else {
        return Ok(None);
    };
    if nlm.stack > window.length {
        return Err(Error::Config(format!("NLM stack {} longer than window {}", nlm.stack, window.length)));
    }
    let points = window_points(src, window)?;
    let warp = WindowWarp::from_mean_shape(&mean_shape(&points), config.raster_width, config.raster_height)?;
    let first = window.length / 2 - nlm.stack / 2;
    (first..first + nlm.stack)
        .map(|k| {
            let f = window.start + k;
            let mut face = warp.rectify(&src.frame(f)?, points[k])?;
            face.frame_index = f;
            face.face_id = window.face_id;
            Ok(face)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Centre frame of the fingerprint stack and its NLM estimate, or `None`
/// when the video has no usable window.
pub fn video_residual<S: VideoSource + ?Sized>(
    src: &S,
    config: &PipelineConfig,
) -> Result<Option<(RectifiedFace, RectifiedFace)>> {
    let Some(mut stack) = fingerprint_stack(src, config, &config.nlm)? else {
        return Ok(None);
    };
    let denoised = temporal_nlm_denoise(&stack, &config.nlm)?;
    let centre = stack.swap_remove(stack.len() / 2);
    Ok(Some((centre, denoised)))
}

/// Adds one video's residual to `acc`. Returns false when the video has no
/// usable window.
pub fn accumulate_video_residual<S: VideoSource + ?Sized>(
    src: &S,
    config: &PipelineConfig,
    acc: &mut ResidualAccumulator,
) -> Result<bool> {
    match video_residual(src, config)? {
        Some((original, denoised)) => {
            acc.add(&original, &denoised, src.id())?;
            Ok(true)
        }
        None => Ok(false),
    }
}
