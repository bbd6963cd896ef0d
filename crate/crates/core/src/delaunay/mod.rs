//! Planar and spherical Delaunay triangulation.
//!
//! The spherical construction projects a cap stereographically and keeps
//! only triangles whose circumcircles lie inside the cap. The in-circle test
//! is evaluated exactly on the 3D points, so every cap agrees on the triangles
//! it keeps.

mod bowyer_watson;
mod hilbert;
mod predicates;
mod voronoi;

use std::collections::HashSet;

use crate::error::{Result, ScvtError};
use crate::geometry::{
    geodesic_distance, spherical_circumcircle, stereographic_project, Epsilons, SpherePoint, TangentFrame, Vec3,
};

use bowyer_watson::{triangulate, NONE};
use predicates::{PlanarKernel, StereoKernel};

pub use voronoi::{build_voronoi_geometry, SubTriangle, VoronoiGeometry};

/// A planar Delaunay triangulation; triangles hold global IDs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarTriangulation {
    pub points: Vec<[f64; 2]>,
    pub ids: Vec<u32>,
    /// Counterclockwise vertex-ID triples.
    pub triangles: Vec<[u32; 3]>,
    /// `neighbors[t][i]` is the triangle across the edge opposite vertex `i`.
    pub neighbors: Vec<[Option<usize>; 3]>,
}

/// Triangulates the convex hull of `points`. Cocircular ties are broken by
/// symbolic perturbation ordered by `ids`.
pub fn planar_delaunay(points: &[[f64; 2]], ids: &[u32]) -> Result<PlanarTriangulation> {
    assert_eq!(points.len(), ids.len());
    let mesh = triangulate(&PlanarKernel { points, ids })?;
    Ok(PlanarTriangulation {
        points: points.to_vec(),
        ids: ids.to_vec(),
        triangles: mesh.triangles.iter().map(|t| t.map(|v| ids[v as usize])).collect(),
        neighbors: mesh
            .neighbors
            .iter()
            .map(|n| n.map(|x| (x != NONE).then_some(x as usize)))
            .collect(),
    })
}

/// A geodesic disk on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub center: SpherePoint,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalTriangle {
    /// Vertex IDs, counterclockwise seen from outside, smallest ID first.
    pub v: [u32; 3],
    pub circumcenter: SpherePoint,
    /// Geodesic circumradius.
    pub radius: f64,
}

impl SphericalTriangle {
    /// Canonicalizes the vertex order (rotation only) and computes the
    /// circumcircle from that order, so equal triangles are bitwise equal.
    pub fn new(v: [u32; 3], points: &[SpherePoint], eps: &Epsilons) -> Result<Self> {
        let v = canonical(v);
        let p = v.map(|i| points[i as usize]);
        let (circumcenter, radius) = spherical_circumcircle(&p[0], &p[1], &p[2], eps)?;
        Ok(SphericalTriangle { v, circumcenter, radius })
    }
}

#[inline]
pub fn canonical(v: [u32; 3]) -> [u32; 3] {
    let m = (0..3).min_by_key(|&i| v[i]).unwrap_or(0);
    [v[m], v[(m + 1) % 3], v[(m + 2) % 3]]
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SphericalTriangulation {
    pub triangles: Vec<SphericalTriangle>,
}

impl SphericalTriangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Triangle indices incident to each of `k` generators, in triangle order.
    pub fn incidence(&self, k: usize) -> Vec<Vec<u32>> {
        let mut inc = vec![Vec::with_capacity(6); k];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in &tri.v {
                inc[v as usize].push(t as u32);
            }
        }
        inc
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                let v = t.v;
                [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]
            })
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// For each triangle and edge `i` (opposite vertex `i`), the triangle on
    /// the other side, if present.
    pub fn adjacency(&self) -> Vec<[Option<u32>; 3]> {
        let mut directed: Vec<((u32, u32), u32)> = Vec::with_capacity(3 * self.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let v = tri.v;
            for i in 0..3 {
                directed.push(((v[(i + 1) % 3], v[(i + 2) % 3]), t as u32));
            }
        }
        directed.sort_unstable();
        self.triangles
            .iter()
            .map(|tri| {
                let v = tri.v;
                std::array::from_fn(|i| {
                    let rev = (v[(i + 2) % 3], v[(i + 1) % 3]);
                    directed
                        .binary_search_by(|probe| probe.0.cmp(&rev))
                        .ok()
                        .map(|k| directed[k].1)
                })
            })
            .collect()
    }
}

/// Triangulates `points` (with global `ids`) through the stereographic
/// projection from the antipode of the cap center. Circumcircles are computed
/// on the sphere.
pub fn cap_spherical_delaunay(
    points: &[SpherePoint],
    ids: &[u32],
    cap: &Cap,
    eps: &Epsilons,
) -> Result<SphericalTriangulation> {
    assert_eq!(points.len(), ids.len());
    if points.len() < 3 {
        return Err(ScvtError::InsufficientPoints { count: points.len() });
    }
    let frame = TangentFrame::new(cap.center);
    let projected = points
        .iter()
        .map(|p| stereographic_project(p, &frame, eps))
        .collect::<Result<Vec<_>>>()?;
    let vecs: Vec<Vec3> = points.iter().map(|p| *p.vec()).collect();
    let kernel = StereoKernel {
        points: &vecs,
        projected: &projected,
        ids,
        pole: -cap.center.vec(),
        pole_id: None,
    };
    let mesh = triangulate(&kernel)?;
    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        // Rotate so the smallest global ID leads, then compute the circle in
        // that order: equal triangles from different caps are bitwise equal.
        let m = (0..3).min_by_key(|&i| ids[t[i] as usize]).unwrap_or(0);
        let local = [t[m], t[(m + 1) % 3], t[(m + 2) % 3]];
        let p = local.map(|i| points[i as usize]);
        let (circumcenter, radius) = spherical_circumcircle(&p[0], &p[1], &p[2], eps)?;
        triangles.push(SphericalTriangle { v: local.map(|i| ids[i as usize]), circumcenter, radius });
    }
    Ok(SphericalTriangulation { triangles })
}

/// Keeps the triangles whose circumcircle lies inside the cap:
/// `d(t, p^c) + r^c ≤ r`.
pub fn select_interior_triangles(tri: &SphericalTriangulation, cap: &Cap) -> SphericalTriangulation {
    SphericalTriangulation {
        triangles: tri
            .triangles
            .iter()
            .filter(|t| circle_inside(t, cap))
            .copied()
            .collect(),
    }
}

#[inline]
pub fn circle_inside(t: &SphericalTriangle, cap: &Cap) -> bool {
    geodesic_distance(&cap.center, &t.circumcenter) + t.radius <= cap.radius
}

/// Unions triangle sets, removes duplicates and verifies that the result is
/// a closed triangulation of `k` points.
pub fn merge_triangulations(parts: Vec<SphericalTriangulation>, k: usize) -> Result<SphericalTriangulation> {
    let mut all: Vec<SphericalTriangle> = parts.into_iter().flat_map(|p| p.triangles).collect();
    all.sort_by_key(|a| a.v);
    all.dedup_by(|a, b| a.v == b.v);
    let merged = SphericalTriangulation { triangles: all };
    validate_closed(&merged, k)?;
    Ok(merged)
}

/// Checks the Euler count and that every directed edge is matched by its
/// reverse exactly once.
pub fn validate_closed(tri: &SphericalTriangulation, k: usize) -> Result<()> {
    let fail = || ScvtError::IncompleteTriangulation { points: k, triangles: tri.len() };
    if k < 4 || tri.len() != 2 * k - 4 {
        return Err(fail());
    }
    let mut directed: Vec<(u32, u32)> = Vec::with_capacity(3 * tri.len());
    let mut seen = vec![false; k];
    for t in &tri.triangles {
        let v = t.v;
        for i in 0..3 {
            if v[i] as usize >= k {
                return Err(fail());
            }
            seen[v[i] as usize] = true;
            directed.push((v[i], v[(i + 1) % 3]));
        }
    }
    directed.sort_unstable();
    if directed.windows(2).any(|w| w[0] == w[1]) || !seen.iter().all(|&s| s) {
        return Err(fail());
    }
    if directed.iter().any(|&(a, b)| directed.binary_search(&(b, a)).is_err()) {
        return Err(fail());
    }
    Ok(())
}

/// Delaunay triangulation of the whole sphere in one pass: the points are
/// projected from point 0, and the hull edges of the planar triangulation
/// close up around it.
pub fn global_delaunay(points: &[SpherePoint], eps: &Epsilons) -> Result<SphericalTriangulation> {
    let k = points.len();
    if k < 4 {
        return Err(ScvtError::InsufficientPoints { count: k });
    }
    let pole = points[0];
    for (i, p) in points.iter().enumerate().skip(1) {
        if p == &pole {
            return Err(ScvtError::DuplicatePoint { first: 0, second: i as u32 });
        }
    }
    let frame = TangentFrame::new(pole.antipode());
    let rest: Vec<Vec3> = points[1..].iter().map(|p| *p.vec()).collect();
    // Only used to order insertions: compress radially so points next to the
    // pole do not stretch the bounding box.
    let projected: Vec<[f64; 2]> = points[1..]
        .iter()
        .map(|p| {
            let q = stereographic_project(p, &frame, &Epsilons { projection: 0.0, ..*eps }).unwrap_or([1e9, 1e9]);
            let s = 1.0 / (1.0 + (q[0] * q[0] + q[1] * q[1]).sqrt() / 4.0);
            [q[0] * s, q[1] * s]
        })
        .collect();
    let ids: Vec<u32> = (1..k as u32).collect();
    let kernel = StereoKernel { points: &rest, projected: &projected, ids: &ids, pole: *pole.vec(), pole_id: Some(0) };
    let mesh = triangulate(&kernel)?;
    let mut triangles = Vec::with_capacity(2 * k - 4);
    for t in &mesh.triangles {
        triangles.push(SphericalTriangle::new(t.map(|v| v + 1), points, eps)?);
    }
    for [x, y] in &mesh.hull {
        triangles.push(SphericalTriangle::new([x + 1, y + 1, 0], points, eps)?);
    }
    triangles.sort_by_key(|a| a.v);
    let tri = SphericalTriangulation { triangles };
    validate_closed(&tri, k)?;
    Ok(tri)
}

/// Brute-force check that no point lies strictly inside any triangle's
/// circumcircle, with the exact perturbed predicate. Returns the offending
/// (triangle, point) pairs.
pub fn empty_circle_violations(tri: &SphericalTriangulation, points: &[SpherePoint]) -> Vec<(usize, u32)> {
    let mut bad = Vec::new();
    for (t, st) in tri.triangles.iter().enumerate() {
        let [a, b, c] = st.v.map(|i| points[i as usize].vec());
        let own: HashSet<u32> = st.v.into_iter().collect();
        for (d, p) in points.iter().enumerate() {
            let d = d as u32;
            if own.contains(&d) {
                continue;
            }
            if predicates::sphere_in_circle([a, b, c, p.vec()], [st.v[0], st.v[1], st.v[2], d]) {
                bad.push((t, d));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests;

/// The 12 vertices of the regular icosahedron, two of them at the poles.
pub fn icosahedron() -> Vec<SpherePoint> {
    let lat = 0.5f64.atan();
    let mut pts = vec![SpherePoint::new(0.0, 0.0, 1.0)];
    for i in 0..5 {
        pts.push(SpherePoint::from_lat_lon(lat, f64::from(i) * 2.0 * std::f64::consts::PI / 5.0));
    }
    for i in 0..5 {
        pts.push(SpherePoint::from_lat_lon(-lat, (f64::from(i) + 0.5) * 2.0 * std::f64::consts::PI / 5.0));
    }
    pts.push(SpherePoint::new(0.0, 0.0, -1.0));
    pts
}

/// The points followed by the normalized midpoints of the triangulation's
/// edges, in sorted edge order: `4K − 6` points for a closed triangulation.
pub fn bisect_points(points: &[SpherePoint], tri: &SphericalTriangulation) -> Vec<SpherePoint> {
    let mut out = points.to_vec();
    for (a, b) in tri.edges() {
        out.push(SpherePoint::from_vec(points[a as usize].vec() + points[b as usize].vec()));
    }
    out
}

/// Icosahedron refined `level` times by edge bisection, with its Delaunay
/// triangulation.
pub fn icosphere(level: usize) -> Result<(Vec<SpherePoint>, SphericalTriangulation)> {
    let eps = Epsilons::default();
    let mut pts = icosahedron();
    let mut tri = global_delaunay(&pts, &eps)?;
    for _ in 0..level {
        pts = bisect_points(&pts, &tri);
        tri = global_delaunay(&pts, &eps)?;
    }
    Ok((pts, tri))
}
