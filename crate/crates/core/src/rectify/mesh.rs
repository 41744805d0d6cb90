use std::collections::HashMap;

use super::RoiPolygon;
use crate::error::{Error, Result};
use crate::geometry::{barycentric, incircle, is_simple_polygon, orient, polygon_signed_area, triangle_area, Point2};

/// Triangles below this area (px²) are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-6;

/// Triangle mesh whose vertices carry the landmark index they came from, so
/// the same topology can be re-instantiated with another frame's landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub landmark_ids: Vec<usize>,
}

impl TriangleMesh {
    /// Same topology, different vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape {
                expected: format!("{} vertices", self.vertices.len()),
                actual: format!("{} vertices", vertices.len()),
            });
        }
        Ok(TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
            landmark_ids: self.landmark_ids.clone(),
        })
    }

    /// Re-instantiates the mesh from a full landmark record.
    pub fn from_landmarks(&self, landmarks: &[Point2]) -> Result<Self> {
        let v = self
            .landmark_ids
            .iter()
            .map(|&i| {
                landmarks
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("landmark {i} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_vertices(v)
    }

    pub fn triangle(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                triangle_area(a, b, c)
            })
            .sum()
    }

    /// Edges shared by two triangles, with the vertex opposite the edge in
    /// each triangle.
    pub fn interior_edges(&self) -> Vec<((usize, usize), usize, usize)> {
        edge_map(&self.triangles)
            .into_iter()
            .filter_map(|(e, v)| (v.len() == 2).then(|| (e, v[0].1, v[1].1)))
            .collect()
    }
}

type EdgeMap = HashMap<(usize, usize), Vec<(usize, usize)>>;

fn edge_map(triangles: &[[usize; 3]]) -> EdgeMap {
    let mut map: EdgeMap = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push((t, c));
        }
    }
    map
}

/// Constrained Delaunay triangulation of the ROI polygon and its interior
/// vertices. Boundary edges are always kept; every interior edge satisfies
/// the empty-circumcircle test.
///
/// Ear clipping gives an initial triangulation of the polygon, interior
/// points are inserted by splitting the triangle (or edge) they fall in,
/// and Lawson edge flips then restore the Delaunay property.
pub fn triangulate(roi: &RoiPolygon) -> Result<TriangleMesh> {
    let nb = roi.boundary.len();
    if nb < 3 {
        return Err(Error::Degenerate(format!("polygon with {nb} vertices")));
    }
    if !is_simple_polygon(&roi.boundary) {
        return Err(Error::Degenerate("polygon is not simple".into()));
    }
    let area = polygon_signed_area(&roi.boundary);
    if area.abs() < MIN_TRIANGLE_AREA {
        return Err(Error::Degenerate(format!("polygon area {area:.3e}")));
    }
    let vertices: Vec<Point2> = roi.vertices().collect();
    let landmark_ids: Vec<usize> = roi
        .boundary_ids
        .iter()
        .chain(roi.interior_ids.iter())
        .copied()
        .collect();

    let (lo, hi) = roi.bounds();
    let scale = (hi.x - lo.x).hypot(hi.y - lo.y);

    let mut ring: Vec<usize> = (0..nb).collect();
    if area < 0.0 {
        ring.reverse();
    }
    let mut triangles = ear_clip(&vertices, ring, scale)?;
    for k in nb..vertices.len() {
        insert_point(&vertices, &mut triangles, k)?;
    }
    legalize(&vertices, &mut triangles, scale);

    for &[a, b, c] in &triangles {
        let area = triangle_area(vertices[a], vertices[b], vertices[c]);
        if area <= MIN_TRIANGLE_AREA {
            return Err(Error::Degenerate(format!(
                "triangle ({a},{b},{c}) has area {area:.3e}"
            )));
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        landmark_ids,
    })
}

/// `ring` must be counter-clockwise (positive signed area).
fn ear_clip(v: &[Point2], mut ring: Vec<usize>, scale: f64) -> Result<Vec<[usize; 3]>> {
    let eps = 1e-12 * scale * scale;
    let mut out = Vec::with_capacity(ring.len().saturating_sub(2));
    while ring.len() > 3 {
        let n = ring.len();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let (ia, ib, ic) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let (a, b, c) = (v[ia], v[ib], v[ic]);
            if orient(a, b, c) <= eps {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = v[j];
                orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps
            });
            if blocked {
                continue;
            }
            // prefer fat ears; the flip pass fixes the rest
            let q = min_angle_cos(a, b, c);
            if best.is_none_or(|(_, bq)| q < bq) {
                best = Some((i, q));
            }
        }
        let (i, _) = best.ok_or_else(|| Error::Degenerate("no ear found; polygon has collinear or overlapping vertices".into()))?;
        let n = ring.len();
        out.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    if orient(v[ring[0]], v[ring[1]], v[ring[2]]) <= eps {
        return Err(Error::Degenerate("final ear is collinear".into()));
    }
    out.push([ring[0], ring[1], ring[2]]);
    Ok(out)
}

/// Largest cosine among the triangle's angles (smaller is fatter).
fn min_angle_cos(a: Point2, b: Point2, c: Point2) -> f64 {
    let cos = |p: Point2, q: Point2, r: Point2| {
        let (ux, uy) = (q.x - p.x, q.y - p.y);
        let (vx, vy) = (r.x - p.x, r.y - p.y);
        (ux * vx + uy * vy) / ((ux.hypot(uy) * vx.hypot(vy)).max(f64::MIN_POSITIVE))
    };
    cos(a, b, c).max(cos(b, c, a)).max(cos(c, a, b))
}

fn insert_point(v: &[Point2], tris: &mut Vec<[usize; 3]>, k: usize) -> Result<()> {
    let p = v[k];
    const ON_EDGE: f64 = 1e-9;
    for t in 0..tris.len() {
        let [a, b, c] = tris[t];
        let Some(l) = barycentric(p, v[a], v[b], v[c]) else {
            continue;
        };
        if l.iter().any(|&x| x < -ON_EDGE) {
            continue;
        }
        let zero = l.iter().position(|&x| x <= ON_EDGE);
        match zero {
            None => {
                tris[t] = [a, b, k];
                tris.push([b, c, k]);
                tris.push([c, a, k]);
            }
            Some(z) => {
                // p lies on the edge opposite vertex z
                let tri = tris[t];
                let (e0, e1, opp) = (tri[(z + 1) % 3], tri[(z + 2) % 3], tri[z]);
                let other = tris.iter().enumerate().find_map(|(u, tu)| {
                    (u != t && tu.contains(&e0) && tu.contains(&e1))
                        .then(|| (u, *tu.iter().find(|&&x| x != e0 && x != e1).unwrap()))
                });
                let Some((u, opp2)) = other else {
                    return Err(Error::Degenerate(format!(
                        "interior vertex {k} lies on the polygon boundary"
                    )));
                };
                // t = (opp, e0, e1) ccw; u contains e1 -> e0 with opp2
                tris[t] = [opp, e0, k];
                tris.push([k, e1, opp]);
                tris[u] = [opp2, e1, k];
                tris.push([k, e0, opp2]);
            }
        }
        return Ok(());
    }
    Err(Error::Degenerate(format!("interior vertex {k} lies outside the polygon")))
}

fn legalize(v: &[Point2], tris: &mut [[usize; 3]], scale: f64) {
    let tol = 1e-12 * scale.powi(4);
    let area_eps = 1e-12 * scale * scale;
    let max_flips = 20 * tris.len() * tris.len() + 100;
    for _ in 0..max_flips {
        let mut flipped = false;
        let map = edge_map(tris);
        let mut edges: Vec<_> = map.into_iter().filter(|(_, s)| s.len() == 2).collect();
        edges.sort_by_key(|(e, _)| *e);
        for ((ea, eb), sides) in edges {
            let (t1, c) = sides[0];
            let (t2, d) = sides[1];
            let [x, y, z] = tris[t1];
            if incircle(v[x], v[y], v[z], v[d]) <= tol {
                continue;
            }
            let n1 = ccw(v, [c, d, ea]);
            let n2 = ccw(v, [d, c, eb]);
            if orient(v[n1[0]], v[n1[1]], v[n1[2]]) <= area_eps
                || orient(v[n2[0]], v[n2[1]], v[n2[2]]) <= area_eps
            {
                continue;
            }
            tris[t1] = n1;
            tris[t2] = n2;
            flipped = true;
            break;
        }
        if !flipped {
            return;
        }
    }
    log::warn!("delaunay flip pass hit its iteration cap");
}

fn ccw(v: &[Point2], t: [usize; 3]) -> [usize; 3] {
    if orient(v[t[0]], v[t[1]], v[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}
