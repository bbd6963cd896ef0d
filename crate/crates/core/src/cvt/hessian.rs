//! Second derivatives of the energy in ambient coordinates.
//!
//! Moving `z_i` by `δ` moves the face between cells `i` and `j` along its
//! normal by `(y − z_i)·δ / ‖z_j − z_i‖`, which gives
//!
//! ```text
//! H_ii = 2 m_i I − Σ_j ∫_{face ij} 2 (z_i − y)(z_i − y)ᵀ ρ / ‖z_j − z_i‖ ds
//! H_ij =           ∫_{face ij} 2 (z_i − y)(z_j − y)ᵀ ρ / ‖z_j − z_i‖ ds
//! ```
//!
//! with all other blocks zero. Faces are great-circle arcs between the
//! Voronoi vertices of the two triangles sharing the edge.

use sprs::{CsMat, TriMat};

use super::compute_moments;
use crate::delaunay::SphericalTriangulation;
use crate::density::DensityField;
use crate::geometry::{IntegrationScheme, SpherePoint, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HessianOptions {
    /// Gauss–Legendre points per face segment, 1 to 5.
    pub edge_points: usize,
    /// Equal pieces each Voronoi face is split into.
    pub edge_segments: usize,
}

impl Default for HessianOptions {
    fn default() -> Self {
        HessianOptions { edge_points: 2, edge_segments: 1 }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (&[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]),
        4 => (
            &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
            &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
        ),
        _ => (
            &[-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
    };
    (x.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Sparse `3K × 3K` Hessian, row `3i + k` for coordinate `k` of generator `i`.
pub fn hessian_entries(
    points: &[SpherePoint],
    tri: &SphericalTriangulation,
    density: &DensityField,
    scheme: &IntegrationScheme,
    options: &HessianOptions,
) -> CsMat<f64> {
    let k = points.len();
    let moments = compute_moments(points, tri, density, scheme);
    let (gl_nodes, gl_weights) = gauss_legendre(options.edge_points.clamp(1, 5));
    let segments = options.edge_segments.max(1);
    let (nodes, weights): (Vec<f64>, Vec<f64>) = (0..segments)
        .flat_map(|s| {
            gl_nodes
                .iter()
                .zip(&gl_weights)
                .map(move |(x, w)| ((s as f64 + x) / segments as f64, w / segments as f64))
        })
        .unzip();
    let adjacency = tri.adjacency();
    let mut trip = TriMat::new((3 * k, 3 * k));
    let mut add_block = |i: usize, j: usize, b: &nalgebra::Matrix3<f64>| {
        for r in 0..3 {
            for c in 0..3 {
                if b[(r, c)] != 0.0 {
                    trip.add_triplet(3 * i + r, 3 * j + c, b[(r, c)]);
                }
            }
        }
    };
    for (i, m) in moments.cells.iter().enumerate() {
        add_block(i, i, &(nalgebra::Matrix3::identity() * (2.0 * m.mass)));
    }
    let vertex = |t: usize| -> Vec3 {
        let p = tri.triangles[t].v.map(|v| *points[v as usize].vec());
        (p[1] - p[0]).cross(&(p[2] - p[0])).normalize()
    };
    for (t, st) in tri.triangles.iter().enumerate() {
        for s in 0..3 {
            let Some(u) = adjacency[t][s] else { continue };
            if (u as usize) < t {
                continue;
            }
            let i = st.v[(s + 1) % 3] as usize;
            let j = st.v[(s + 2) % 3] as usize;
            let (zi, zj) = (points[i].vec(), points[j].vec());
            let (a, b) = (vertex(t), vertex(u as usize));
            let theta = a.dot(&b).clamp(-1.0, 1.0).acos();
            if theta == 0.0 {
                continue;
            }
            // Unit tangent at `a` towards `b`.
            let dir = (b - a * a.dot(&b)).normalize();
            let scale = 2.0 / (zj - zi).norm();
            let mut hii = nalgebra::Matrix3::zeros();
            let mut hjj = nalgebra::Matrix3::zeros();
            let mut hij = nalgebra::Matrix3::zeros();
            for (x, w) in nodes.iter().zip(&weights) {
                let phi = x * theta;
                let y = a * phi.cos() + dir * phi.sin();
                let f = scale * density.eval(&y) * w * theta;
                let (di, dj) = (zi - y, zj - y);
                hii -= di * di.transpose() * f;
                hjj -= dj * dj.transpose() * f;
                hij += di * dj.transpose() * f;
            }
            add_block(i, i, &hii);
            add_block(j, j, &hjj);
            add_block(i, j, &hij);
            add_block(j, i, &hij.transpose());
        }
    }
    trip.to_csr()
}
