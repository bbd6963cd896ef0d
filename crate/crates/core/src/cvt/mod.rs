//! CVT energy, cell moments, gradient and the Lloyd map on the sphere.
//!
//! Cells are integrated piecewise over six sub-triangles per Delaunay
//! triangle (vertex, edge midpoint, circumcenter); quadrature nodes are
//! projected to the sphere before evaluating the integrands.

mod hessian;
mod laplacian;

use rayon::prelude::*;

use crate::delaunay::{icosphere, SphericalTriangulation};
use crate::density::DensityField;
use crate::error::{Result, ScvtError};
use crate::geometry::{Epsilons, IntegrationScheme, Measure, SpherePoint, Vec3};

pub use hessian::{hessian_entries, HessianOptions};
pub use laplacian::{graph_laplacian, LaplacianFactor, LaplacianPerturbation};

/// Integrals over one Voronoi cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moment {
    /// `∫ ρ`
    pub mass: f64,
    /// `∫ y ρ`
    pub first: Vec3,
    /// `∫ ‖y − z‖² ρ`
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellMoments {
    pub cells: Vec<Moment>,
    /// False for cells whose fan was cut off by a region boundary.
    pub complete: Vec<bool>,
}

impl CellMoments {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }
}

/// Energy, tangential gradient and Lloyd diagonal at a configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub energy: f64,
    /// Tangential gradient, `3K` components in generator order.
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    /// `2 c_i · z_i` per generator.
    pub diagonal: Vec<f64>,
}

/// Unit normal and origin distance of the plane through three points; the
/// flat circumcenter is `d · n`.
#[inline]
pub(crate) fn plane_of(a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, f64) {
    let n = (b - a).cross(&(c - a)).normalize();
    (n, n.dot(a))
}

/// A flat integration piece with the plane data `for_each_node` needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    pub plane_distance: f64,
}

impl Piece {
    /// A piece with corners on the sphere, integrated through its radial
    /// projection. Orientation follows `det[a, b, c]`.
    fn spherical(vertices: [Vec3; 3]) -> Piece {
        let cross = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let det = cross.dot(&vertices[0]);
        let len = cross.norm();
        if len == 0.0 || det == 0.0 {
            return Piece { vertices, normal: Vec3::zeros(), plane_distance: 0.0 };
        }
        Piece { vertices, normal: cross * (det.signum() / len), plane_distance: det.abs() / len }
    }
}

/// Per-triangle data shared by every cell integral: corners, plane, Voronoi
/// vertex and the split point of each Voronoi edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGeometry {
    pub corners: Vec<[Vec3; 3]>,
    /// Outward unit normal; also the Voronoi vertex (spherical circumcenter).
    pub normals: Vec<Vec3>,
    pub plane_distances: Vec<f64>,
    /// For edge `(v[s], v[s+1])`, the midpoint of its dual Voronoi edge, or
    /// the projected Delaunay edge midpoint when the neighbor is missing.
    pub edge_splits: Vec<[Vec3; 3]>,
}

impl DualGeometry {
    pub fn new(points: &[SpherePoint], tri: &SphericalTriangulation) -> Self {
        let corners: Vec<[Vec3; 3]> =
            tri.triangles.iter().map(|t| t.v.map(|k| *points[k as usize].vec())).collect();
        let (normals, plane_distances): (Vec<Vec3>, Vec<f64>) =
            corners.iter().map(|p| plane_of(&p[0], &p[1], &p[2])).unzip();
        let adjacency = tri.adjacency();
        let edge_splits = corners
            .iter()
            .enumerate()
            .map(|(t, p)| {
                std::array::from_fn(|s| {
                    let fallback = (p[s] + p[(s + 1) % 3]).normalize();
                    // Edge `(v[s], v[s+1])` is opposite slot `s + 2`.
                    match adjacency[t][(s + 2) % 3] {
                        Some(u) => {
                            let m = normals[t] + normals[u as usize];
                            let len = m.norm();
                            if len > 1e-12 {
                                m / len
                            } else {
                                fallback
                            }
                        }
                        None => fallback,
                    }
                })
            })
            .collect();
        DualGeometry { corners, normals, plane_distances, edge_splits }
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }
}

/// The two pieces of cell `v[slot]` inside triangle `t`.
///
/// Chordal pieces lie in the flat triangle: (vertex, edge midpoint, flat
/// circumcenter). Spherical pieces have their corners on the sphere (vertex,
/// Voronoi edge midpoint, Voronoi vertex), so the pieces of the two triangles
/// on an edge add up to the exact spherical triangle spanned by the generator
/// and the Voronoi edge, even when a circumcircle exceeds a hemisphere. Both
/// carry a negative orientation when the Voronoi vertex lies across the edge.
pub(crate) fn sub_triangles(dual: &DualGeometry, t: usize, slot: usize, measure: Measure) -> [Piece; 2] {
    let p = &dual.corners[t];
    let (n, d) = (dual.normals[t], dual.plane_distances[t]);
    let (a, b, c) = (p[slot], p[(slot + 1) % 3], p[(slot + 2) % 3]);
    match measure {
        Measure::Chordal => {
            let cc = n * d;
            let piece = |vertices| Piece { vertices, normal: n, plane_distance: d };
            [piece([a, (a + b) * 0.5, cc]), piece([a, cc, (c + a) * 0.5])]
        }
        Measure::Spherical => {
            let splits = &dual.edge_splits[t];
            [Piece::spherical([a, splits[slot], n]), Piece::spherical([a, n, splits[(slot + 2) % 3]])]
        }
    }
}

/// Whether `p` lies strictly inside the spherical triangle of the piece.
#[inline]
fn contains(piece: &Piece, p: &Vec3) -> bool {
    let [a, b, c] = &piece.vertices;
    if p.dot(&piece.normal) <= 0.0 {
        return false;
    }
    let s = [a.cross(b).dot(p), b.cross(c).dot(p), c.cross(a).dot(p)];
    (s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0) || (s[0] < 0.0 && s[1] < 0.0 && s[2] < 0.0)
}

/// Integrals of `ρ`, `yρ` and `‖y − z‖²ρ` over a piece. Spherical pieces
/// that contain a kink of the density are fanned out from it, so that the
/// rule only ever sees the kink at a corner.
#[inline]
pub(crate) fn integrate_piece(
    piece: &Piece,
    z: &Vec3,
    density: &DensityField,
    kinks: &[Vec3],
    scheme: &IntegrationScheme,
    acc: &mut Moment,
) {
    if piece.plane_distance == 0.0 {
        return;
    }
    if scheme.measure == Measure::Spherical {
        if let Some(k) = kinks.iter().find(|k| contains(piece, k)) {
            let [a, b, c] = piece.vertices;
            for part in [[a, b, *k], [b, c, *k], [c, a, *k]] {
                integrate_piece(&Piece::spherical(part), z, density, &[], scheme, acc);
            }
            return;
        }
    }
    let [a, b, c] = &piece.vertices;
    scheme.for_each_node(a, b, c, &piece.normal, piece.plane_distance, |y, w| {
        let r = density.eval(&y) * w;
        acc.mass += r;
        acc.first += y * r;
        acc.energy += (y - z).norm_squared() * r;
    });
}

/// Moment of generator `i` from its incident triangles, in the given order.
pub fn cell_moment(
    i: u32,
    points: &[SpherePoint],
    tri: &SphericalTriangulation,
    dual: &DualGeometry,
    incident: &[u32],
    density: &DensityField,
    scheme: &IntegrationScheme,
) -> Moment {
    let z = *points[i as usize].vec();
    let kinks = density.kinks();
    let mut acc = Moment::default();
    for &t in incident {
        let v = tri.triangles[t as usize].v;
        let slot = v.iter().position(|&k| k == i).expect("triangle is incident");
        for piece in &sub_triangles(dual, t as usize, slot, scheme.measure) {
            integrate_piece(piece, &z, density, &kinks, scheme, &mut acc);
        }
    }
    acc
}

/// Moments of every generator over a closed triangulation. Each cell is
/// accumulated over its incident triangles in triangle order (the
/// triangulation is sorted by vertex triple), so the result does not depend
/// on how the work is split.
pub fn compute_moments(
    points: &[SpherePoint],
    tri: &SphericalTriangulation,
    density: &DensityField,
    scheme: &IntegrationScheme,
) -> CellMoments {
    let incidence = tri.incidence(points.len());
    let dual = DualGeometry::new(points, tri);
    let cells: Vec<Moment> = (0..points.len() as u32)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| cell_moment(i, points, tri, &dual, &incidence[i as usize], density, scheme))
        .collect();
    CellMoments { complete: vec![true; cells.len()], cells }
}

/// Moments for configurations too small to triangulate (fewer than four
/// generators): integrate over a fixed fine mesh and give each quadrature
/// node to its nearest generator (lowest index on ties). Half of the mesh is
/// integrated and mirrored through the origin, so antipodal symmetry of the
/// configuration carries over to the moments exactly.
pub fn compute_moments_background(
    points: &[SpherePoint],
    density: &DensityField,
    scheme: &IntegrationScheme,
) -> Result<CellMoments> {
    let (bg, tri) = icosphere(3)?;
    let upper = |c: Vec3| {
        if c.z.abs() > 1e-9 {
            c.z > 0.0
        } else if c.y.abs() > 1e-9 {
            c.y > 0.0
        } else {
            c.x > 0.0
        }
    };
    let mut cells = vec![Moment::default(); points.len()];
    let mut add = |y: Vec3, w: f64| {
        let mut best = 0;
        for (i, z) in points.iter().enumerate() {
            if z.vec().dot(&y) > points[best].vec().dot(&y) {
                best = i;
            }
        }
        let r = density.eval(&y) * w;
        let cell = &mut cells[best];
        cell.mass += r;
        cell.first += y * r;
        cell.energy += (y - points[best].vec()).norm_squared() * r;
    };
    for t in &tri.triangles {
        let p = t.v.map(|k| *bg[k as usize].vec());
        if !upper(p[0] + p[1] + p[2]) {
            continue;
        }
        let (n, d) = plane_of(&p[0], &p[1], &p[2]);
        scheme.for_each_node(&p[0], &p[1], &p[2], &n, d, |y, w| {
            add(y, w);
            add(-y, w);
        });
    }
    Ok(CellMoments { complete: vec![true; cells.len()], cells })
}

/// Radial projection of the cell's first moment.
pub fn constrained_centroid(moments: &CellMoments, i: usize, eps: &Epsilons) -> Result<SpherePoint> {
    let c = moments.cells[i].first;
    let n = c.norm();
    if n <= eps.centroid {
        return Err(ScvtError::CentroidAtOrigin { id: i as u32 });
    }
    Ok(SpherePoint::from_unit(c / n))
}

/// `F = Σ ∫ ‖y − z_i‖² ρ`, the tangential gradient `2(c_i·z_i) z_i − 2 c_i`
/// and the Lloyd diagonal `2 c_i·z_i`.
pub fn energy_and_gradient(points: &[SpherePoint], moments: &CellMoments) -> Result<EnergyReport> {
    let k = points.len();
    if let Some(i) = moments.complete.iter().position(|&c| !c) {
        return Err(ScvtError::IncompleteCell { id: i as u32 });
    }
    let mut report = EnergyReport { gradient: vec![0.0; 3 * k], diagonal: vec![0.0; k], ..Default::default() };
    for (i, (z, m)) in points.iter().zip(&moments.cells).enumerate() {
        let z = z.vec();
        let cz = m.first.dot(z);
        let g = z * (2.0 * cz) - m.first * 2.0;
        report.gradient[3 * i..3 * i + 3].copy_from_slice(g.as_slice());
        report.diagonal[i] = 2.0 * cz;
        report.energy += m.energy;
    }
    report.grad_norm = report.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(report)
}

/// Inverse Lloyd diagonal `1 / (2 c_i·z_i)`.
pub fn lloyd_preconditioner(points: &[SpherePoint], moments: &CellMoments) -> Result<Vec<f64>> {
    points
        .iter()
        .zip(&moments.cells)
        .enumerate()
        .map(|(i, (z, m))| {
            let value = 2.0 * m.first.dot(z.vec());
            if value > 0.0 {
                Ok(1.0 / value)
            } else {
                Err(ScvtError::NonpositiveDiagonal { id: i as u32, value })
            }
        })
        .collect()
}

/// One Lloyd step: every generator moves to its constrained centroid.
pub fn lloyd_map(moments: &CellMoments, eps: &Epsilons) -> Result<Vec<SpherePoint>> {
    (0..moments.len()).map(|i| constrained_centroid(moments, i, eps)).collect()
}
