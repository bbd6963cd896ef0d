//! Voronoi cells as fans of sub-triangles of the Delaunay triangles.
//!
//! Each flat Delaunay triangle `(a, b, c)` is cut into six pieces, each made
//! of a vertex, an edge midpoint and the circumcenter. All three lie in the
//! triangle's plane; their radial projections are the generator, the Voronoi
//! edge midpoint and the Voronoi vertex.

use super::SphericalTriangulation;
use crate::cvt::{sub_triangles, DualGeometry};
use crate::geometry::{Measure, SpherePoint, Vec3};


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubTriangle {
    pub generator: u32,
    pub triangle: u32,
    /// Generator, edge midpoint and circumcenter, in the triangle's plane,
    /// counterclockwise when the circumcenter is inside the triangle.
    pub vertices: [Vec3; 3],
    /// Area, negative when the circumcenter lies across the midpoint's edge.
    pub signed_area: f64,
}

impl SubTriangle {
    pub fn spherical_vertices(&self) -> [SpherePoint; 3] {
        self.vertices.map(SpherePoint::from_vec)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoronoiGeometry {
    pub fans: Vec<Vec<SubTriangle>>,
    /// Triangles whose circumcenter falls outside them.
    pub obtuse: Vec<u32>,
}

pub fn build_voronoi_geometry(tri: &SphericalTriangulation, points: &[SpherePoint]) -> VoronoiGeometry {
    let mut geo = VoronoiGeometry { fans: vec![Vec::with_capacity(12); points.len()], obtuse: Vec::new() };
    let dual = DualGeometry::new(points, tri);
    for (t, st) in tri.triangles.iter().enumerate() {
        let mut obtuse = false;
        for i in 0..3 {
            for piece in sub_triangles(&dual, t, i, Measure::Chordal) {
                let (verts, n) = (piece.vertices, piece.normal);
                let area = 0.5 * (verts[1] - verts[0]).cross(&(verts[2] - verts[0])).dot(&n);
                obtuse |= area < 0.0;
                geo.fans[st.v[i] as usize].push(SubTriangle {
                    generator: st.v[i],
                    triangle: t as u32,
                    vertices: verts,
                    signed_area: area,
                });
            }
        }
        if obtuse {
            geo.obtuse.push(t as u32);
        }
    }
    if !geo.obtuse.is_empty() {
        log::debug!("{} obtuse triangles with circumcenters outside", geo.obtuse.len());
    }
    geo
}
