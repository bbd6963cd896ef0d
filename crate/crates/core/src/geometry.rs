//! Unit-sphere primitives: points, tangent frames, stereographic projection,
//! geodesic measures and quadrature over (flat) triangles.

use std::ops::{Add, Mul};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScvtError};

pub type Vec3 = Vector3<f64>;

/// Tolerances for degeneracy tests. All are overridable from the run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Epsilons {
    /// Minimum of `t·(z+t)` accepted by the stereographic projection.
    pub projection: f64,
    /// Minimum cross-product norm for a non-degenerate triangle.
    pub area: f64,
    /// Minimum first-moment norm for a well-defined constrained centroid.
    pub centroid: f64,
}

impl Default for Epsilons {
    fn default() -> Self {
        Self {
            projection: 1e-9,
            area: 1e-14,
            centroid: 1e-12,
        }
    }
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Builds a point by radially projecting `(x, y, z)` to the sphere.
    ///
    /// Panics on the zero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self::from_vec(Vec3::new(x, y, z))
    }

    pub fn from_vec(v: Vec3) -> Self {
        let n = v.norm();
        assert!(n > 0.0 && n.is_finite(), "cannot project {v:?} to the sphere");
        SpherePoint(v / n)
    }

    /// Wraps a vector already known to have unit length.
    pub fn from_unit(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9);
        SpherePoint(v)
    }

    #[inline]
    pub fn vec(&self) -> &Vec3 {
        &self.0
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.0.z
    }

    #[inline]
    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0.dot(&other.0)
    }

    #[inline]
    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    /// Latitude in radians, in [-π/2, π/2].
    pub fn latitude(&self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).asin()
    }

    /// Longitude in radians, in (-π, π]. Zero at the poles.
    pub fn longitude(&self) -> f64 {
        self.0.y.atan2(self.0.x)
    }

    pub fn from_lat_lon(lat: f64, lon: f64) -> Self {
        let (sl, cl) = lat.sin_cos();
        let (so, co) = lon.sin_cos();
        SpherePoint(Vec3::new(cl * co, cl * so, sl))
    }

    pub fn antipode(&self) -> Self {
        SpherePoint(-self.0)
    }
}

impl From<SpherePoint> for Vec3 {
    fn from(p: SpherePoint) -> Vec3 {
        p.0
    }
}

/// A tangent plane at `contact` with an orthonormal basis `(e1, e2)` such that
/// `e1 × e2 = contact`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub contact: SpherePoint,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl TangentFrame {
    pub fn new(contact: SpherePoint) -> Self {
        let t = contact.0;
        // Cross with the coordinate axis least aligned with t.
        let axis = if t.x.abs() <= t.y.abs() && t.x.abs() <= t.z.abs() {
            Vec3::x()
        } else if t.y.abs() <= t.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let e1 = axis.cross(&t).normalize();
        let e2 = t.cross(&e1);
        TangentFrame { contact, e1, e2 }
    }
}

/// Stereographic projection from the antipode of the contact point onto the
/// tangent plane, expressed in frame coordinates.
pub fn stereographic_project(z: &SpherePoint, frame: &TangentFrame, eps: &Epsilons) -> Result<[f64; 2]> {
    let t = frame.contact.0;
    let denominator = t.dot(&(z.0 + t));
    if denominator <= eps.projection {
        return Err(ScvtError::Antipode { denominator });
    }
    let s = 2.0 / denominator;
    let x = z.0 * s + t * (s - 1.0);
    let d = x - t;
    Ok([d.dot(&frame.e1), d.dot(&frame.e2)])
}

pub fn stereographic_unproject(p: [f64; 2], frame: &TangentFrame) -> SpherePoint {
    let t = frame.contact.0;
    let x = t + frame.e1 * p[0] + frame.e2 * p[1];
    let xt = x + t;
    let lambda = 4.0 / xt.norm_squared();
    SpherePoint::from_vec(xt * lambda - t)
}

/// Great-circle distance, via `atan2(|a×b|, a·b)` for accuracy near 0 and π.
#[inline]
pub fn geodesic_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    angle_between(&a.0, &b.0)
}

#[inline]
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Center and geodesic radius of the circle through three sphere points. The
/// center lies on the side from which `a, b, c` appear counterclockwise.
pub fn spherical_circumcircle(
    a: &SpherePoint,
    b: &SpherePoint,
    c: &SpherePoint,
    eps: &Epsilons,
) -> Result<(SpherePoint, f64)> {
    let n = (b.0 - a.0).cross(&(c.0 - a.0));
    let len = n.norm();
    if len <= eps.area {
        return Err(ScvtError::DegenerateTriangle);
    }
    let center = SpherePoint(n / len);
    let radius = geodesic_distance(&center, a);
    Ok((center, radius))
}

pub fn flat_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Spherical (geodesic) triangle area by the Van Oosterom–Strackee formula.
pub fn spherical_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let num = a.dot(&b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleOrder {
    #[serde(rename = "4pt")]
    FourPoint,
    #[serde(rename = "9pt")]
    NinePoint,
}

/// A quadrature rule on the reference triangle, in barycentric coordinates,
/// with weights normalized to sum to one.
///
/// Both rules are Stroud conical products (Gauss–Jacobi in one direction,
/// Gauss–Legendre in the other): all weights are positive and all nodes are
/// interior. `FourPoint` is exact to degree 3, `NinePoint` to degree 5.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: RuleOrder,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

const FOUR_POINT: [([f64; 3], f64); 4] = [
    ([0.6663902460147014, 0.15505102572168217, 0.17855872826361643], 0.31804138174397717),
    ([0.1785587282636164, 0.15505102572168217, 0.6663902460147014], 0.31804138174397717),
    ([0.280019915499074, 0.6449489742783179, 0.07503111022260811], 0.18195861825602283),
    ([0.07503111022260811, 0.6449489742783179, 0.280019915499074], 0.18195861825602283),
];

const NINE_POINT: [([f64; 3], f64); 9] = [
    ([0.8086943856776698, 0.08858795951270393, 0.10271765480962626], 0.11162884096608872),
    ([0.45570602024364804, 0.08858795951270393, 0.45570602024364804], 0.17860614554574175),
    ([0.10271765480962625, 0.08858795951270393, 0.8086943856776698], 0.11162884096608872),
    ([0.5239790677201007, 0.40946686444073477, 0.0665540678391645], 0.12735617019977016),
    ([0.2952665677796326, 0.40946686444073477, 0.2952665677796326], 0.20376987231963203),
    ([0.06655406783916451, 0.40946686444073477, 0.5239790677201007], 0.12735617019977016),
    ([0.18840940595207237, 0.787659461760847, 0.02393113228708062], 0.038792766611919),
    ([0.1061702691195765, 0.787659461760847, 0.1061702691195765], 0.062068426579070336),
    ([0.02393113228708063, 0.787659461760847, 0.18840940595207237], 0.038792766611919),
];

impl QuadratureRule {
    pub fn new(order: RuleOrder) -> Self {
        let table: &[([f64; 3], f64)] = match order {
            RuleOrder::FourPoint => &FOUR_POINT,
            RuleOrder::NinePoint => &NINE_POINT,
        };
        QuadratureRule {
            order,
            nodes: table.iter().map(|(n, _)| *n).collect(),
            weights: table.iter().map(|(_, w)| *w).collect(),
        }
    }

    pub fn four_point() -> Self {
        Self::new(RuleOrder::FourPoint)
    }

    pub fn nine_point() -> Self {
        Self::new(RuleOrder::NinePoint)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, q: usize, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
        let [la, lb, lc] = self.nodes[q];
        a * la + b * lb + c * lc
    }
}

/// Measure used when integrating over flat triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Flat-triangle area element; nodes are radially projected only to
    /// evaluate the integrand. Integrates over the inscribed polyhedron.
    Chordal,
    /// Surface measure of the radially projected triangle (area element times
    /// the projection Jacobian `d/|y|³`). The gradient formula is exact for
    /// this measure, so it is the default.
    #[default]
    Spherical,
}

/// How cell integrals are evaluated: a base rule, a measure and a uniform
/// subdivision level (each triangle split into `subdivision²` children).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationScheme {
    pub rule: QuadratureRule,
    pub measure: Measure,
    pub subdivision: usize,
}

impl IntegrationScheme {
    pub fn new(order: RuleOrder) -> Self {
        IntegrationScheme {
            rule: QuadratureRule::new(order),
            measure: Measure::default(),
            subdivision: 1,
        }
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_subdivision(mut self, n: usize) -> Self {
        self.subdivision = n.max(1);
        self
    }

    /// Visits every quadrature node of the flat triangle `(a, b, c)` as
    /// `(projected node, weight)`, where the weight already carries the
    /// (signed) area and, for the spherical measure, the Jacobian.
    ///
    /// `normal` orients the triangle: the area is negative when `a, b, c` run
    /// clockwise about it. `plane_distance` is the distance of the plane of
    /// the enclosing flat triangle from the origin.
    #[inline]
    pub fn for_each_node<F: FnMut(Vec3, f64)>(
        &self,
        a: &Vec3,
        b: &Vec3,
        c: &Vec3,
        normal: &Vec3,
        plane_distance: f64,
        mut f: F,
    ) {
        let n = self.subdivision;
        if n == 1 {
            self.visit_flat(a, b, c, normal, plane_distance, &mut f);
            return;
        }
        let inv = 1.0 / n as f64;
        let lattice = |i: usize, j: usize| -> Vec3 {
            let u = i as f64 * inv;
            let v = j as f64 * inv;
            a * (1.0 - u - v) + b * u + c * v
        };
        for i in 0..n {
            for j in 0..(n - i) {
                let p0 = lattice(i, j);
                let p1 = lattice(i + 1, j);
                let p2 = lattice(i, j + 1);
                self.visit_flat(&p0, &p1, &p2, normal, plane_distance, &mut f);
                if i + j + 1 < n {
                    let p3 = lattice(i + 1, j + 1);
                    self.visit_flat(&p1, &p3, &p2, normal, plane_distance, &mut f);
                }
            }
        }
    }

    #[inline]
    fn visit_flat<F: FnMut(Vec3, f64)>(
        &self,
        a: &Vec3,
        b: &Vec3,
        c: &Vec3,
        normal: &Vec3,
        plane_distance: f64,
        f: &mut F,
    ) {
        let area = 0.5 * (b - a).cross(&(c - a)).dot(normal);
        if area == 0.0 {
            return;
        }
        for q in 0..self.rule.len() {
            let y = self.rule.point(q, a, b, c);
            let r = y.norm();
            let mut w = self.rule.weights[q] * area;
            if self.measure == Measure::Spherical {
                w *= plane_distance / (r * r * r);
            }
            f(y / r, w);
        }
    }
}

impl Default for IntegrationScheme {
    fn default() -> Self {
        Self::new(RuleOrder::FourPoint)
    }
}

/// Integrates `f` over the flat triangle `(a, b, c)`: `Σ w_q f(P(q)) · area`,
/// with `P` the radial projection to the sphere. A zero-area triangle gives
/// zero.
pub fn integrate_triangle<T, F>(a: &SpherePoint, b: &SpherePoint, c: &SpherePoint, f: F, rule: &QuadratureRule) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(&SpherePoint) -> T,
{
    let (a, b, c) = (a.vec(), b.vec(), c.vec());
    let area = flat_area(a, b, c);
    let mut acc: Option<T> = None;
    for q in 0..rule.len() {
        let y = rule.point(q, a, b, c);
        let term = f(&SpherePoint::from_vec(y)) * (rule.weights[q] * area);
        acc = Some(match acc {
            Some(s) => s + term,
            None => term,
        });
    }
    acc.expect("quadrature rule has nodes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng) -> SpherePoint {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return SpherePoint::from_vec(v);
            }
        }
    }

    fn north() -> TangentFrame {
        TangentFrame::new(SpherePoint::new(0.0, 0.0, 1.0))
    }

    #[test]
    fn frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let f = TangentFrame::new(random_point(&mut rng));
            let t = f.contact.vec();
            assert!(f.e1.dot(t).abs() < 1e-12);
            assert!(f.e2.dot(t).abs() < 1e-12);
            assert!(f.e1.dot(&f.e2).abs() < 1e-12);
            assert!((f.e1.cross(&f.e2) - t).norm() < 1e-12);
        }
    }

    #[test]
    fn contact_point_projects_to_origin() {
        let f = north();
        let p = stereographic_project(&f.contact, &f, &Epsilons::default()).unwrap();
        assert_eq!(p, [0.0, 0.0]);
        let back = stereographic_unproject([0.0, 0.0], &f);
        assert!((back.vec() - f.contact.vec()).norm() < 1e-15);
    }

    #[test]
    fn equator_point_projects_to_distance_two() {
        let f = north();
        let z = SpherePoint::new(1.0, 0.0, 0.0);
        let p = stereographic_project(&z, &f, &Epsilons::default()).unwrap();
        // Image (2, 0, 1) lies in the plane z = 1, two units from the contact.
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 2.0).abs() < 1e-15);
        let image = f.contact.vec() + f.e1 * p[0] + f.e2 * p[1];
        assert!((image - Vec3::new(2.0, 0.0, 1.0)).norm() < 1e-15);
        let back = stereographic_unproject(p, &f);
        assert!((back.vec() - z.vec()).norm() < 1e-15);
    }

    #[test]
    fn antipode_is_rejected() {
        let f = north();
        let err = stereographic_project(&SpherePoint::new(0.0, 0.0, -1.0), &f, &Epsilons::default());
        assert!(matches!(err, Err(ScvtError::Antipode { .. })));
    }

    #[test]
    fn projection_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = Epsilons::default();
        let mut checked = 0;
        while checked < 1000 {
            let f = TangentFrame::new(random_point(&mut rng));
            let z = random_point(&mut rng);
            if f.contact.vec().dot(&(z.vec() + f.contact.vec())) <= 0.1 {
                continue;
            }
            let p = stereographic_project(&z, &f, &eps).unwrap();
            let back = stereographic_unproject(p, &f);
            assert!((back.vec() - z.vec()).norm() < 1e-10);
            let again = stereographic_project(&back, &f, &eps).unwrap();
            assert!((again[0] - p[0]).abs() < 1e-10 && (again[1] - p[1]).abs() < 1e-10);
            checked += 1;
        }
    }

    fn planar_incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
        let o = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let m = |p: [f64; 2]| {
            let (x, y) = (p[0] - d[0], p[1] - d[1]);
            [x, y, x * x + y * y]
        };
        let (r0, r1, r2) = (m(a), m(b), m(c));
        let det = r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
            + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0]);
        det * o.signum()
    }

    #[test]
    fn projection_preserves_incircle_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = Epsilons::default();
        let f = north();
        let near = |rng: &mut ChaCha8Rng| loop {
            let p = random_point(rng);
            if p.z() > 0.3 {
                return p;
            }
        };
        let (a, b, c) = (near(&mut rng), near(&mut rng), near(&mut rng));
        let (center, radius) = {
            let (cc, r) = spherical_circumcircle(&a, &b, &c, &eps).unwrap();
            (cc, r)
        };
        let pa = stereographic_project(&a, &f, &eps).unwrap();
        let pb = stereographic_project(&b, &f, &eps).unwrap();
        let pc = stereographic_project(&c, &f, &eps).unwrap();
        let mut agree = 0;
        for _ in 0..100 {
            let d = near(&mut rng);
            let inside_sphere = geodesic_distance(&center, &d) < radius;
            // The circumcircle on the sphere may be the complementary cap.
            let inside_sphere = if center.z() > -1.0 && geodesic_distance(&center, &f.contact.antipode()) < radius {
                !inside_sphere
            } else {
                inside_sphere
            };
            let pd = stereographic_project(&d, &f, &eps).unwrap();
            let inside_plane = planar_incircle(pa, pb, pc, pd) > 0.0;
            if inside_sphere == inside_plane {
                agree += 1;
            }
        }
        assert_eq!(agree, 100);
    }

    #[test]
    fn geodesic_distance_examples() {
        let n = SpherePoint::new(0.0, 0.0, 1.0);
        let s = SpherePoint::new(0.0, 0.0, -1.0);
        assert_eq!(geodesic_distance(&n, &n), 0.0);
        assert!((geodesic_distance(&n, &s) - PI).abs() < 1e-15);
        let x = SpherePoint::new(1.0, 0.0, 0.0);
        let y = SpherePoint::new(0.0, 1.0, 0.0);
        assert!((geodesic_distance(&x, &y) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn equatorial_circumcircle_is_a_great_circle() {
        let eps = Epsilons::default();
        let a = SpherePoint::from_lat_lon(0.0, 0.0);
        let b = SpherePoint::from_lat_lon(0.0, 2.0 * PI / 3.0);
        let c = SpherePoint::from_lat_lon(0.0, 4.0 * PI / 3.0);
        let (center, r) = spherical_circumcircle(&a, &b, &c, &eps).unwrap();
        assert!((center.z().abs() - 1.0).abs() < 1e-12);
        assert!((r - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn octant_circumcircle() {
        let eps = Epsilons::default();
        let a = SpherePoint::new(1.0, 0.0, 0.0);
        let b = SpherePoint::new(0.0, 1.0, 0.0);
        let c = SpherePoint::new(0.0, 0.0, 1.0);
        let (center, r) = spherical_circumcircle(&a, &b, &c, &eps).unwrap();
        let expected = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        assert!((center.vec() - expected).norm() < 1e-12);
        assert!((r - (1.0 / 3f64.sqrt()).acos()).abs() < 1e-12);
        for p in [a, b, c] {
            assert!((geodesic_distance(&center, &p) - r).abs() < 1e-10);
        }
    }

    #[test]
    fn collapsed_triangle_is_degenerate() {
        let eps = Epsilons::default();
        let a = SpherePoint::from_lat_lon(0.0, 0.0);
        let b = SpherePoint::from_lat_lon(1e-9, 1e-8);
        let c = SpherePoint::from_lat_lon(0.0, 2e-8);
        assert_eq!(spherical_circumcircle(&a, &b, &c, &eps), Err(ScvtError::DegenerateTriangle));
    }

    #[test]
    fn constant_over_octant_is_flat_area() {
        let a = SpherePoint::new(1.0, 0.0, 0.0);
        let b = SpherePoint::new(0.0, 1.0, 0.0);
        let c = SpherePoint::new(0.0, 0.0, 1.0);
        for rule in [QuadratureRule::four_point(), QuadratureRule::nine_point()] {
            let v: f64 = integrate_triangle(&a, &b, &c, |_| 1.0, &rule);
            assert!((v - 3f64.sqrt() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_integrand_over_symmetric_triangle_vanishes() {
        let a = SpherePoint::from_lat_lon(0.3, 0.0);
        let b = SpherePoint::from_lat_lon(-0.3, 0.0);
        let c = SpherePoint::from_lat_lon(0.0, 0.4);
        // The rules are not symmetric, so integrate both orientations of the
        // reflection pair; the z-odd integrand cancels exactly in exact
        // arithmetic and to rounding here.
        let rule = QuadratureRule::nine_point();
        let v: f64 = integrate_triangle(&a, &b, &c, |p| p.z(), &rule);
        assert!(v.abs() < 1e-3 * flat_area(a.vec(), b.vec(), c.vec()));
        let vec: Vec3 = integrate_triangle(&a, &b, &c, |p| *p.vec(), &rule);
        assert!(vec.x > 0.0);
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn rules_are_exact_on_monomials() {
        for (rule, degree) in [(QuadratureRule::four_point(), 3), (QuadratureRule::nine_point(), 5)] {
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for n in &rule.nodes {
                assert!(n.iter().all(|&l| l > 0.0 && l < 1.0));
                assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
            for i in 0..=degree {
                for j in 0..=(degree - i) {
                    // ∫_T x^i y^j over the unit reference triangle (area 1/2).
                    let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                    let approx: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(n, w)| 0.5 * w * n[1].powi(i as i32) * n[2].powi(j as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-15, "degree ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn spherical_measure_recovers_sphere_area() {
        // Octahedron faces, heavily subdivided: the spherical measure tends to 4π.
        let axes = [Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::x(), -Vec3::y(), -Vec3::z()];
        let faces = [(0, 1, 2), (1, 3, 2), (3, 4, 2), (4, 0, 2), (1, 0, 5), (3, 1, 5), (4, 3, 5), (0, 4, 5)];
        let scheme = IntegrationScheme::new(RuleOrder::NinePoint)
            .with_measure(Measure::Spherical)
            .with_subdivision(8);
        let mut total = 0.0;
        for (i, j, k) in faces {
            let (a, b, c) = (axes[i], axes[j], axes[k]);
            let n = (b - a).cross(&(c - a)).normalize();
            scheme.for_each_node(&a, &b, &c, &n, n.dot(&a), |_, w| total += w);
        }
        assert!((total - 4.0 * PI).abs() < 1e-6, "{total}");
    }

    proptest! {
        #[test]
        fn triangle_inequality(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((0.0..=PI).contains(&ab));
        }
    }
}
