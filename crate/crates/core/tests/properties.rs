use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

use scvt::cvt::{compute_moments, energy_and_gradient, lloyd_map};
use scvt::delaunay::global_delaunay;
use scvt::density::{sample_by_density, DensityField};
use scvt::geometry::IntegrationScheme;
use scvt::quality::tri_quality;
use scvt::{Epsilons, SpherePoint, Vec3};

fn energy(points: &[SpherePoint], density: &DensityField) -> (f64, Vec<f64>) {
    let tri = global_delaunay(points, &Epsilons::default()).unwrap();
    let r = energy_and_gradient(points, &compute_moments(points, &tri, density, &IntegrationScheme::default())).unwrap();
    (r.energy, r.gradient)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With constant density the energy depends only on relative positions,
    /// and the gradient turns with the points.
    #[test]
    fn uniform_energy_is_rotation_invariant(seed in 0u64..1000, axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0), angle in 0.0f64..std::f64::consts::TAU) {
        let density = DensityField::constant();
        let points = sample_by_density(&density, 120, seed);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(axis.0, axis.1, axis.2)), angle);
        let turned: Vec<SpherePoint> = points.iter().map(|p| SpherePoint::from_vec(rot * p.vec())).collect();
        let (f, g) = energy(&points, &density);
        let (ft, gt) = energy(&turned, &density);
        prop_assert!((f - ft).abs() <= 1e-12 * f);
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for i in 0..points.len() {
            let gi = rot * Vec3::new(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
            let diff = (gi - Vec3::new(gt[3 * i], gt[3 * i + 1], gt[3 * i + 2])).amax();
            prop_assert!(diff <= 1e-9 * scale, "generator {}: {}", i, diff);
        }
    }

    #[test]
    fn lloyd_steps_never_raise_the_energy(seed in 0u64..1000, which in 0usize..4) {
        let density = [DensityField::constant(), DensityField::x3(), DensityField::x16(), DensityField::x64()][which];
        let mut points = sample_by_density(&density, 150, seed);
        let mut previous = f64::INFINITY;
        for _ in 0..3 {
            let tri = global_delaunay(&points, &Epsilons::default()).unwrap();
            let moments = compute_moments(&points, &tri, &density, &IntegrationScheme::default());
            let f = energy_and_gradient(&points, &moments).unwrap().energy;
            prop_assert!(f <= previous + 1e-10);
            previous = f;
            points = lloyd_map(&moments, &Epsilons::default()).unwrap();
        }
    }

    #[test]
    fn gradient_is_tangent_to_the_sphere(seed in 0u64..1000) {
        let density = DensityField::x16();
        let points = sample_by_density(&density, 100, seed);
        let (_, g) = energy(&points, &density);
        for (i, z) in points.iter().enumerate() {
            prop_assert!(Vec3::new(g[3 * i], g[3 * i + 1], g[3 * i + 2]).dot(z.vec()).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_quality_is_symmetric(a in 0.1f64..5.0, b in 0.1f64..5.0, t in 0.01f64..0.99) {
        let c = (a - b).abs() + t * (a + b - (a - b).abs());
        let q = tri_quality(a, b, c).unwrap();
        prop_assert!((tri_quality(b, c, a).unwrap() - q).abs() < 1e-12);
        prop_assert!((tri_quality(c, b, a).unwrap() - q).abs() < 1e-12);
    }
}
