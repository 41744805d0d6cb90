//! Eye-to-mouth skin ROI, its triangulation, and the piecewise affine warp
//! onto a fixed rectangular raster.

mod mesh;
mod roi;
mod warp;

pub use mesh::{triangulate, TriangleMesh, MIN_TRIANGLE_AREA};
pub use roi::{build_roi, RoiPolygon, MEAN_FACE_TEMPLATE, ROI_BOUNDARY, ROI_INTERIOR};
pub use warp::{rectify_frame, RectifiedFace, WindowWarp, RECTIFIED_HEIGHT, RECTIFIED_WIDTH};
