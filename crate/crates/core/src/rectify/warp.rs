use super::{build_roi, triangulate, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::{AffineMap, Point2};
use crate::raster::RgbImage;

pub const RECTIFIED_WIDTH: usize = 256;
pub const RECTIFIED_HEIGHT: usize = 128;

/// Warped skin ROI of one frame. Channel values stay on the 0–255 scale but
/// keep the sub-level precision of bilinear sampling; pixels outside the
/// target mesh are zero and flagged invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedFace {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub data: Vec<f32>,
    pub valid: Vec<bool>,
    pub frame_index: usize,
    pub face_id: u32,
}

impl RectifiedFace {
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// 8-bit rendering (rounded, clamped).
    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect(),
        }
    }
}

/// Renders `frame` into the target raster: each target pixel inside a
/// target triangle is pulled back through that triangle's affine map into
/// frame space and sampled bilinearly (clamp-to-edge). Pixels on a shared
/// edge belong to the first triangle listed.
pub fn rectify_frame(
    frame: &RgbImage,
    src: &TriangleMesh,
    tgt: &TriangleMesh,
    width: usize,
    height: usize,
) -> Result<RectifiedFace> {
    if src.triangles != tgt.triangles || src.vertices.len() != tgt.vertices.len() {
        return Err(Error::Shape {
            expected: format!("{} triangles", tgt.triangles.len()),
            actual: format!("{} triangles", src.triangles.len()),
        });
    }
    let (wf, hf) = (width as f64, height as f64);
    if let Some(p) = tgt
        .vertices
        .iter()
        .find(|p| !(p.x >= -0.5 && p.y >= -0.5 && p.x <= wf - 0.5 && p.y <= hf - 0.5))
    {
        return Err(Error::invalid(format!(
            "target vertex ({:.2},{:.2}) outside the {width}x{height} raster",
            p.x, p.y
        )));
    }

    let mut data = vec![0.0f32; width * height * 3];
    let mut valid = vec![false; width * height];
    for t in 0..tgt.triangles.len() {
        let tri_t = tgt.triangle(t);
        let tri_s = src.triangle(t);
        let Some(map) = AffineMap::from_triangles(tri_t, tri_s) else {
            continue;
        };
        let [a, b, c] = tri_t;
        let area2 = crate::geometry::orient(a, b, c);
        if area2 == 0.0 {
            continue;
        }
        let eps = -1e-9 * area2.abs();
        let x0 = a.x.min(b.x).min(c.x).ceil().max(0.0) as usize;
        let x1 = (a.x.max(b.x).max(c.x).floor() as isize).min(width as isize - 1);
        let y0 = a.y.min(b.y).min(c.y).ceil().max(0.0) as usize;
        let y1 = (a.y.max(b.y).max(c.y).floor() as isize).min(height as isize - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        let sign = area2.signum();
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let i = y * width + x;
                if valid[i] {
                    continue;
                }
                let p = Point2::new(x as f64, y as f64);
                let w0 = sign * crate::geometry::orient(b, c, p);
                let w1 = sign * crate::geometry::orient(c, a, p);
                let w2 = sign * crate::geometry::orient(a, b, p);
                if w0 < eps || w1 < eps || w2 < eps {
                    continue;
                }
                let q = map.apply(p);
                let rgb = frame.sample_bilinear(q.x, q.y);
                data[i * 3] = rgb[0] as f32;
                data[i * 3 + 1] = rgb[1] as f32;
                data[i * 3 + 2] = rgb[2] as f32;
                valid[i] = true;
            }
        }
    }
    Ok(RectifiedFace {
        width,
        height,
        data,
        valid,
        frame_index: 0,
        face_id: 0,
    })
}

/// Target mesh shared by every frame of a window: the window's mean
/// landmark shape, with its ROI stretched to fill the raster.
#[derive(Debug, Clone)]
pub struct WindowWarp {
    pub target: TriangleMesh,
    pub width: usize,
    pub height: usize,
}

impl WindowWarp {
    pub fn from_mean_shape(mean_landmarks: &[Point2], width: usize, height: usize) -> Result<Self> {
        let roi = build_roi(mean_landmarks)?;
        let (lo, hi) = roi.bounds();
        let sx = (width - 1) as f64 / (hi.x - lo.x);
        let sy = (height - 1) as f64 / (hi.y - lo.y);
        let normalized = roi.map(|p| Point2::new((p.x - lo.x) * sx, (p.y - lo.y) * sy));
        let target = triangulate(&normalized)?;
        Ok(WindowWarp {
            target,
            width,
            height,
        })
    }

    pub fn rectify(&self, frame: &RgbImage, landmarks: &[Point2]) -> Result<RectifiedFace> {
        let src = self.target.from_landmarks(landmarks)?;
        rectify_frame(frame, &src, &self.target, self.width, self.height)
    }
}
