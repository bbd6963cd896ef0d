//! Exact orientation and in-circle kernels with symbolic perturbation.
//!
//! Vertices are local indices; `priority` holds the global IDs that order the
//! perturbation (smaller ID, larger perturbation), so the outcome of a
//! degenerate test never depends on which subset of points is triangulated.

use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::geometry::Vec3;

pub(crate) trait Kernel {
    fn len(&self) -> usize;

    /// Exact orientation: positive for a counterclockwise triple, zero when
    /// collinear.
    fn orient(&self, a: u32, b: u32, c: u32) -> f64;

    /// Whether `d` lies strictly inside the circumcircle of the
    /// counterclockwise triangle `(a, b, c)`, after symbolic perturbation.
    /// Never undecided for distinct points.
    fn in_circle(&self, a: u32, b: u32, c: u32, d: u32) -> bool;

    /// Planar coordinates used to order insertions.
    fn plane(&self, i: u32) -> [f64; 2];

    fn priority(&self, i: u32) -> u32;

    /// Conflict test for the ghost triangle on the outside of hull edge
    /// `x → y`, when the kernel can decide it directly. `None` defers to the
    /// hull-side rule.
    fn in_ghost(&self, _x: u32, _y: u32, _d: u32) -> Option<bool> {
        None
    }

    /// Exact coincidence.
    fn same(&self, a: u32, b: u32) -> bool;
}

#[inline]
fn c2(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Sorts four (priority, slot) pairs by priority.
#[inline]
fn by_priority(ids: [u32; 4]) -> [usize; 4] {
    let mut slots = [0usize, 1, 2, 3];
    slots.sort_unstable_by_key(|&s| ids[s]);
    slots
}

/// Planar points with exact predicates and lifted-height perturbation.
pub(crate) struct PlanarKernel<'a> {
    pub points: &'a [[f64; 2]],
    pub ids: &'a [u32],
}

impl Kernel for PlanarKernel<'_> {
    fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn orient(&self, a: u32, b: u32, c: u32) -> f64 {
        let p = self.points;
        orient2d(c2(p[a as usize]), c2(p[b as usize]), c2(p[c as usize]))
    }

    fn in_circle(&self, a: u32, b: u32, c: u32, d: u32) -> bool {
        let p = self.points;
        let (pa, pb, pc, pd) = (p[a as usize], p[b as usize], p[c as usize], p[d as usize]);
        let det = robust::incircle(c2(pa), c2(pb), c2(pc), c2(pd));
        if det != 0.0 {
            return det > 0.0;
        }
        // Raise each height by an infinitesimal, larger for higher priority;
        // the determinant moves by the cofactor of the height column.
        let rows = [a, b, c, d];
        let ids = rows.map(|v| self.ids[v as usize]);
        for slot in by_priority(ids) {
            let cof = match slot {
                0 => orient2d(c2(pb), c2(pc), c2(pd)),
                1 => -orient2d(c2(pa), c2(pc), c2(pd)),
                2 => orient2d(c2(pa), c2(pb), c2(pd)),
                _ => -orient2d(c2(pa), c2(pb), c2(pc)),
            };
            if cof != 0.0 {
                return cof > 0.0;
            }
        }
        false
    }

    fn plane(&self, i: u32) -> [f64; 2] {
        self.points[i as usize]
    }

    fn priority(&self, i: u32) -> u32 {
        self.ids[i as usize]
    }

    fn same(&self, a: u32, b: u32) -> bool {
        self.points[a as usize] == self.points[b as usize]
    }
}

/// Sphere points seen through a stereographic projection from `pole`.
///
/// Orientation is the side of the plane through three points on which the
/// pole lies; in-circle is the side of the plane through the circle. Both are
/// exact on the 3D coordinates, so in-circle answers do not depend on the
/// projection and agree between caps.
pub(crate) struct StereoKernel<'a> {
    pub points: &'a [Vec3],
    pub projected: &'a [[f64; 2]],
    pub ids: &'a [u32],
    pub pole: Vec3,
    /// Set when the pole is itself an input point with this ID: ghost
    /// triangles are then real triangles through the pole.
    pub pole_id: Option<u32>,
}

/// `det[x; y; z]`, exact.
#[inline]
fn det3(x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
    orient3d(c3(x), c3(y), c3(z), c3(&Vec3::zeros()))
}

/// Exact in-circle test for sphere points, shared by every cap.
pub(crate) fn sphere_in_circle(p: [&Vec3; 4], ids: [u32; 4]) -> bool {
    let [a, b, c, d] = p;
    let det = orient3d(c3(a), c3(b), c3(c), c3(d));
    if det != 0.0 {
        return det < 0.0;
    }
    let order = by_priority(ids);
    // Tier one: shrink each point radially by an infinitesimal (perturb the
    // homogeneous column). Decides everything except four points on one
    // great circle.
    for &slot in &order {
        let cof = match slot {
            0 => -det3(b, c, d),
            1 => det3(a, c, d),
            2 => -det3(a, b, d),
            _ => det3(a, b, c),
        };
        if cof != 0.0 {
            return cof < 0.0;
        }
    }
    // Tier two: translate each point along x, then y, then z. The derivative
    // of the determinant along axis k at a row is the k-th component of the
    // cross product of the other rows' differences, an exact 2D orientation
    // in the complementary coordinate plane.
    for axis in 0..3 {
        let pick = |v: &Vec3| match axis {
            0 => [v.y, v.z],
            1 => [v.z, v.x],
            _ => [v.x, v.y],
        };
        let q = [pick(a), pick(b), pick(c), pick(d)];
        for &slot in &order {
            // Gradient rows of det[a−d; b−d; c−d]:
            // ∇a = (b−d)×(c−d), ∇b = (c−d)×(a−d), ∇c = (a−d)×(b−d),
            // ∇d = −(∇a + ∇b + ∇c) = −(b−a)×(c−a).
            let cof = match slot {
                0 => orient2d(c2(q[1]), c2(q[2]), c2(q[3])),
                1 => orient2d(c2(q[2]), c2(q[0]), c2(q[3])),
                2 => orient2d(c2(q[0]), c2(q[1]), c2(q[3])),
                _ => -orient2d(c2(q[1]), c2(q[2]), c2(q[0])),
            };
            if cof != 0.0 {
                return cof < 0.0;
            }
        }
    }
    false
}

impl Kernel for StereoKernel<'_> {
    fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn orient(&self, a: u32, b: u32, c: u32) -> f64 {
        let p = self.points;
        orient3d(c3(&p[a as usize]), c3(&p[b as usize]), c3(&p[c as usize]), c3(&self.pole))
    }

    fn in_circle(&self, a: u32, b: u32, c: u32, d: u32) -> bool {
        let p = self.points;
        sphere_in_circle(
            [&p[a as usize], &p[b as usize], &p[c as usize], &p[d as usize]],
            [a, b, c, d].map(|v| self.ids[v as usize]),
        )
    }

    fn plane(&self, i: u32) -> [f64; 2] {
        self.projected[i as usize]
    }

    fn in_ghost(&self, x: u32, y: u32, d: u32) -> Option<bool> {
        let pole_id = self.pole_id?;
        let p = self.points;
        Some(sphere_in_circle(
            [&p[x as usize], &p[y as usize], &self.pole, &p[d as usize]],
            [self.ids[x as usize], self.ids[y as usize], pole_id, self.ids[d as usize]],
        ))
    }

    fn priority(&self, i: u32) -> u32 {
        self.ids[i as usize]
    }

    fn same(&self, a: u32, b: u32) -> bool {
        self.points[a as usize] == self.points[b as usize]
    }
}
