use crate::error::{Error, Result};
use crate::geometry::{is_simple_polygon, point_in_polygon, point_segment_distance, polygon_signed_area, Point2};
use crate::ingest::LANDMARK_COUNT;

/// Mean 68-point face shape in unit coordinates (x right, y down).
pub const MEAN_FACE_TEMPLATE: [[f64; 2]; 68] = [
    [0.0792396914, 0.3392237411], [0.0829219487, 0.4569553679],
    [0.0967927109, 0.5756480167], [0.1221415156, 0.6919216011],
    [0.1686878635, 0.8003412636], [0.2397893907, 0.8957325048],
    [0.3256624525, 0.9770687625], [0.4223182820, 1.0432900015],
    [0.5317778021, 1.0608037113], [0.6412962981, 1.0398192411],
    [0.7381058723, 0.9722688340], [0.8244443633, 0.8896240823],
    [0.8947926775, 0.7924941558], [0.9393954863, 0.6815466434],
    [0.9611193383, 0.5622382531], [0.9705798412, 0.4417589257],
    [0.9711932742, 0.3221187440], [0.1638462231, 0.2491517381],
    [0.2178035466, 0.2042558639], [0.2912993511, 0.1923673183],
    [0.3674602415, 0.2035822106], [0.4392945113, 0.2331355999],
    [0.5864459624, 0.2281416448], [0.6601526716, 0.1959238419],
    [0.7374664491, 0.1823609845], [0.8132365462, 0.1928280091],
    [0.8707571886, 0.2352933770], [0.5153453383, 0.3186354619],
    [0.5162214483, 0.3962004463], [0.5171188618, 0.4737976878],
    [0.5181643034, 0.5531577978], [0.4337011560, 0.6040544577],
    [0.4755012378, 0.6207634402], [0.5207129332, 0.6342682222],
    [0.5658741140, 0.6187965815], [0.6070540027, 0.6015767166],
    [0.2524187184, 0.3310522638], [0.2986630156, 0.3026463540],
    [0.3557497242, 0.3030206507], [0.4037189783, 0.3386771108],
    [0.3525071756, 0.3499876154], [0.2967917599, 0.3504789782],
    [0.6313260763, 0.3341366723], [0.6790733811, 0.2964540427],
    [0.7359723615, 0.2947212858], [0.7828653763, 0.3213052817],
    [0.7403122748, 0.3418493767], [0.6849985009, 0.3437343322],
    [0.3531677614, 0.7461891642], [0.4145877779, 0.7190538351],
    [0.4776776546, 0.7068358925], [0.5227329008, 0.7170922758],
    [0.5698320643, 0.7054144790], [0.6351958119, 0.7156557252],
    [0.6995167233, 0.7394191873], [0.6394471596, 0.8052368800],
    [0.5764105141, 0.8354366702], [0.5253984058, 0.8417063778],
    [0.4764154577, 0.8375059150], [0.4137954890, 0.8100456017],
    [0.3800847856, 0.7499796031], [0.4779559963, 0.7451323461],
    [0.5233897933, 0.7489243026], [0.5710577892, 0.7433289469],
    [0.6724091379, 0.7441770322], [0.5725396214, 0.7766092866],
    [0.5240106503, 0.7833707832], [0.4775612274, 0.7784763470],
];

/// Boundary of the skin ROI as landmark indices, in order: jaw at eye
/// height, lower eyelid of the first eye, nose bridge, lower eyelid of the
/// second eye, jaw down to mouth height, upper lip back across, jaw up.
pub const ROI_BOUNDARY: [usize; 24] = [
    0, 36, 41, 40, 39, 28, 42, 47, 46, 45, 16, 15, 14, 13, 54, 53, 52, 51, 50, 49, 48, 3, 2, 1,
];

/// Nose landmarks used as interior mesh vertices.
pub const ROI_INTERIOR: [usize; 7] = [29, 30, 31, 32, 33, 34, 35];

/// Simple polygon plus interior vertices, each tagged with the landmark
/// index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiPolygon {
    pub boundary: Vec<Point2>,
    pub boundary_ids: Vec<usize>,
    pub interior: Vec<Point2>,
    pub interior_ids: Vec<usize>,
}

impl RoiPolygon {
    /// Polygon from raw points; ids are positions (boundary first).
    pub fn from_points(boundary: Vec<Point2>, interior: Vec<Point2>) -> Self {
        let nb = boundary.len();
        RoiPolygon {
            boundary_ids: (0..nb).collect(),
            interior_ids: (nb..nb + interior.len()).collect(),
            boundary,
            interior,
        }
    }

    pub fn area(&self) -> f64 {
        polygon_signed_area(&self.boundary).abs()
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, &self.boundary)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point2> + '_ {
        self.boundary.iter().chain(self.interior.iter()).copied()
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.vertices() {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Self {
        RoiPolygon {
            boundary: self.boundary.iter().map(|&p| f(p)).collect(),
            boundary_ids: self.boundary_ids.clone(),
            interior: self.interior.iter().map(|&p| f(p)).collect(),
            interior_ids: self.interior_ids.clone(),
        }
    }
}

/// Skin region between the eyes and the mouth.
pub fn build_roi(points: &[Point2]) -> Result<RoiPolygon> {
    if points.len() != LANDMARK_COUNT {
        return Err(Error::invalid(format!(
            "expected {LANDMARK_COUNT} landmarks, got {}",
            points.len()
        )));
    }
    let boundary: Vec<Point2> = ROI_BOUNDARY.iter().map(|&i| points[i]).collect();
    let (mut lo, mut hi) = (boundary[0], boundary[0]);
    for p in &boundary {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let area = polygon_signed_area(&boundary).abs();
    if !(w > 1e-6 && h > 1e-6) || area < 1e-3 * w * h {
        return Err(Error::Degenerate(format!(
            "ROI polygon has area {area:.3e} in a {w:.3e}x{h:.3e} box"
        )));
    }
    if !is_simple_polygon(&boundary) {
        return Err(Error::Degenerate("ROI polygon self-intersects".into()));
    }
    let margin = 1e-3 * w.max(h);
    let mut interior = Vec::new();
    let mut interior_ids = Vec::new();
    for &i in &ROI_INTERIOR {
        let p = points[i];
        let n = boundary.len();
        let clear = (0..n).all(|k| point_segment_distance(p, boundary[k], boundary[(k + 1) % n]) > margin);
        if clear && point_in_polygon(p, &boundary) {
            interior.push(p);
            interior_ids.push(i);
        }
    }
    Ok(RoiPolygon {
        boundary,
        boundary_ids: ROI_BOUNDARY.to_vec(),
        interior,
        interior_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(scale: f64, dx: f64, dy: f64) -> Vec<Point2> {
        MEAN_FACE_TEMPLATE
            .iter()
            .map(|p| Point2::new(p[0] * scale + dx, p[1] * scale + dy))
            .collect()
    }

    fn centroid(points: &[Point2], ids: impl Iterator<Item = usize>) -> Point2 {
        let ids: Vec<usize> = ids.collect();
        let n = ids.len() as f64;
        let (sx, sy) = ids
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].x, sy + points[i].y));
        Point2::new(sx / n, sy / n)
    }

    #[test]
    fn canonical_roi_covers_skin_and_excludes_features() {
        let pts = template(200.0, 20.0, 10.0);
        let roi = build_roi(&pts).unwrap();
        // cheeks: midway between the outer eye corner and the mouth corner, pulled toward the jaw
        let left_cheek = centroid(&pts, [1, 2, 31, 41, 48].into_iter());
        let right_cheek = centroid(&pts, [15, 14, 35, 46, 54].into_iter());
        assert!(roi.contains(left_cheek), "{left_cheek:?}");
        assert!(roi.contains(right_cheek), "{right_cheek:?}");
        assert!(roi.contains(pts[30]), "nose tip");
        assert!(!roi.contains(centroid(&pts, 36..42)), "eye 1");
        assert!(!roi.contains(centroid(&pts, 42..48)), "eye 2");
        assert!(!roi.contains(centroid(&pts, 48..68)), "mouth");
        assert_eq!(roi.interior.len(), ROI_INTERIOR.len());
    }

    #[test]
    fn collinear_landmarks_are_degenerate() {
        let pts: Vec<Point2> = (0..68).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(build_roi(&pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn translation_equivariant() {
        let a = build_roi(&template(150.0, 0.0, 0.0)).unwrap();
        let b = build_roi(&template(150.0, 10.0, 10.0)).unwrap();
        for (p, q) in a.vertices().zip(b.vertices()) {
            assert_eq!(q, p.translate(10.0, 10.0));
        }
        assert_eq!(a.boundary_ids, b.boundary_ids);
    }
}
