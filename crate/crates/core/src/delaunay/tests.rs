use super::*;
use crate::density::{sample_by_density, DensityField};
use crate::geometry::flat_area;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn eps() -> Epsilons {
    Epsilons::default()
}

fn random_sphere(n: usize, seed: u64) -> Vec<SpherePoint> {
    sample_by_density(&DensityField::constant(), n, seed)
}

fn planar_oracle(tri: &PlanarTriangulation) {
    let pos = |id: u32| tri.points[tri.ids.iter().position(|&i| i == id).unwrap()];
    for t in &tri.triangles {
        let [a, b, c] = t.map(pos);
        let o = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        assert!(o > 0.0);
        for (p, id) in tri.points.iter().zip(&tri.ids) {
            if t.contains(id) {
                continue;
            }
            let det = robust::incircle(
                robust::Coord { x: a[0], y: a[1] },
                robust::Coord { x: b[0], y: b[1] },
                robust::Coord { x: c[0], y: c[1] },
                robust::Coord { x: p[0], y: p[1] },
            );
            assert!(det <= 0.0, "point {id} inside circumcircle of {t:?}");
        }
    }
}

#[test]
fn planar_square_is_two_triangles_and_deterministic() {
    let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let ids = [0, 1, 2, 3];
    let a = planar_delaunay(&pts, &ids).unwrap();
    assert_eq!(a.triangles.len(), 2);
    planar_oracle(&a);
    assert_eq!(a, planar_delaunay(&pts, &ids).unwrap());
    // Same IDs in a different input order give the same diagonal.
    let b = planar_delaunay(&[pts[2], pts[0], pts[3], pts[1]], &[2, 0, 3, 1]).unwrap();
    let diag = |t: &PlanarTriangulation| {
        let mut e = t.triangles.iter().map(|x| { let mut s = *x; s.sort(); s }).collect::<Vec<_>>();
        e.sort();
        e
    };
    assert_eq!(diag(&a), diag(&b));
}

#[test]
fn planar_three_points() {
    let t = planar_delaunay(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], &[5, 6, 7]).unwrap();
    assert_eq!(t.triangles.len(), 1);
    assert_eq!(t.neighbors[0], [None; 3]);
}

#[test]
fn planar_random_passes_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<[f64; 2]> = (0..500).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let ids: Vec<u32> = (0..500).collect();
    let t = planar_delaunay(&pts, &ids).unwrap();
    planar_oracle(&t);
}

#[test]
fn cap_with_three_points() {
    let pts = [
        SpherePoint::from_lat_lon(1.4, 0.0),
        SpherePoint::from_lat_lon(1.4, 2.0),
        SpherePoint::from_lat_lon(1.4, 4.0),
    ];
    let cap = Cap { center: SpherePoint::new(0.0, 0.0, 1.0), radius: 0.5 };
    let t = cap_spherical_delaunay(&pts, &[0, 1, 2], &cap, &eps()).unwrap();
    assert_eq!(t.len(), 1);
    let (c, r) = spherical_circumcircle(&pts[0], &pts[1], &pts[2], &eps()).unwrap();
    assert_eq!(t.triangles[0].v, [0, 1, 2]);
    assert!((t.triangles[0].circumcenter.vec() - c.vec()).norm() < 1e-15);
    assert!((t.triangles[0].radius - r).abs() < 1e-15);
    assert!(t.triangles[0].circumcenter.z() > 0.99);
}

#[test]
fn cap_errors() {
    let cap = Cap { center: SpherePoint::new(0.0, 0.0, 1.0), radius: 0.5 };
    let two = [SpherePoint::new(0.0, 0.1, 1.0), SpherePoint::new(0.1, 0.0, 1.0)];
    assert_eq!(cap_spherical_delaunay(&two, &[0, 1], &cap, &eps()), Err(ScvtError::InsufficientPoints { count: 2 }));
    let anti = [two[0], two[1], SpherePoint::new(0.0, 0.0, -1.0)];
    assert!(matches!(cap_spherical_delaunay(&anti, &[0, 1, 2], &cap, &eps()), Err(ScvtError::Antipode { .. })));
}

#[test]
fn selection_criterion_examples() {
    let cap = Cap { center: SpherePoint::new(0.0, 0.0, 1.0), radius: 0.5 };
    let at = |d: f64| SphericalTriangle { v: [0, 1, 2], circumcenter: SpherePoint::from_lat_lon(std::f64::consts::FRAC_PI_2 - d, 0.3), radius: 0.1 };
    assert!(circle_inside(&at(0.0), &cap));
    assert!(!circle_inside(&at(0.45), &cap));
    let t = SphericalTriangulation { triangles: vec![at(0.0), at(0.45), at(0.39)] };
    assert_eq!(select_interior_triangles(&t, &cap).len(), 2);
}

fn cap_points(points: &[SpherePoint], cap: &Cap) -> (Vec<SpherePoint>, Vec<u32>) {
    let mut p = Vec::new();
    let mut ids = Vec::new();
    for (i, z) in points.iter().enumerate() {
        if geodesic_distance(&cap.center, z) <= cap.radius {
            p.push(*z);
            ids.push(i as u32);
        }
    }
    (p, ids)
}

fn kept_set(points: &[SpherePoint], cap: &Cap) -> Vec<[u32; 3]> {
    let (p, ids) = cap_points(points, cap);
    let t = cap_spherical_delaunay(&p, &ids, cap, &eps()).unwrap();
    let mut v: Vec<[u32; 3]> = select_interior_triangles(&t, cap).triangles.iter().map(|t| t.v).collect();
    v.sort();
    v
}

#[test]
fn kept_triangles_do_not_depend_on_contact_point() {
    let all = random_sphere(400, 3);
    let north = SpherePoint::new(0.0, 0.0, 1.0);
    let pts: Vec<SpherePoint> = all.into_iter().filter(|p| geodesic_distance(&north, p) < 0.9).collect();
    let ids: Vec<u32> = (0..pts.len() as u32).collect();
    let region = Cap { center: north, radius: 0.9 };
    let tilted = Cap { center: SpherePoint::from_lat_lon(1.3, 1.0), radius: 0.0 };
    let a = cap_spherical_delaunay(&pts, &ids, &region, &eps()).unwrap();
    let b = cap_spherical_delaunay(&pts, &ids, &Cap { radius: 0.9, ..tilted }, &eps()).unwrap();
    let sel = Cap { center: north, radius: 0.8 };
    let mut ka = select_interior_triangles(&a, &sel).triangles;
    let mut kb = select_interior_triangles(&b, &sel).triangles;
    ka.sort_by_key(|t| t.v);
    kb.sort_by_key(|t| t.v);
    assert!(!ka.is_empty());
    assert_eq!(ka, kb);
}

#[test]
fn kept_density_sampled_triangles_are_globally_delaunay() {
    let all = sample_by_density(&DensityField::x64(), 2000, 8);
    let cap = Cap { center: DensityField::x64().center(), radius: 0.6 };
    let (p, ids) = cap_points(&all, &cap);
    let p200: Vec<SpherePoint> = p.iter().take(200).copied().collect();
    let id200: Vec<u32> = ids.iter().take(200).copied().collect();
    assert_eq!(p200.len(), 200);
    let t = cap_spherical_delaunay(&p200, &id200, &cap, &eps()).unwrap();
    let kept = select_interior_triangles(&t, &cap);
    assert!(kept.len() > 100);
    // Oracle over the 200 points, IDs remapped to positions.
    let remap = SphericalTriangulation {
        triangles: kept
            .triangles
            .iter()
            .map(|t| SphericalTriangle { v: t.v.map(|g| id200.iter().position(|&x| x == g).unwrap() as u32), ..*t })
            .collect(),
    };
    assert!(empty_circle_violations(&remap, &p200).is_empty());
}

#[test]
fn caps_union_to_global_triangulation() {
    let (pts, global) = icosphere(3).unwrap();
    assert_eq!(pts.len(), 642);
    assert_eq!(global.len(), 1280);
    let mut parts = Vec::new();
    for c in icosahedron() {
        let cap = Cap { center: c, radius: 1.0 };
        let (p, ids) = cap_points(&pts, &cap);
        let t = cap_spherical_delaunay(&p, &ids, &cap, &eps()).unwrap();
        parts.push(select_interior_triangles(&t, &cap));
    }
    let merged = merge_triangulations(parts, pts.len()).unwrap();
    assert_eq!(merged.len(), 1280);
    assert_eq!(merged.edges().len(), 3 * 642 - 6);
    let a: Vec<[u32; 3]> = merged.triangles.iter().map(|t| t.v).collect();
    let b: Vec<[u32; 3]> = global.triangles.iter().map(|t| t.v).collect();
    assert_eq!(a, b);
    assert!(empty_circle_violations(&merged, &pts).is_empty());
}

#[test]
fn cap_selection_is_independent_of_cap_for_random_points() {
    let pts = random_sphere(1500, 21);
    let caps = [SpherePoint::new(0.0, 0.0, 1.0), SpherePoint::new(0.3, 0.1, 0.95)];
    let a = kept_set(&pts, &Cap { center: caps[0], radius: 0.7 });
    let b = kept_set(&pts, &Cap { center: caps[1], radius: 0.7 });
    let inner = Cap { center: caps[0], radius: 0.3 };
    let pick = |v: &Vec<[u32; 3]>| -> Vec<[u32; 3]> {
        v.iter()
            .filter(|t| t.iter().all(|&i| geodesic_distance(&inner.center, &pts[i as usize]) < inner.radius))
            .copied()
            .collect()
    };
    assert_eq!(pick(&a), pick(&b));
}

#[test]
fn merge_detects_missing_triangles() {
    let (pts, global) = icosphere(1).unwrap();
    let mut parts = global.clone();
    parts.triangles.pop();
    assert!(matches!(
        merge_triangulations(vec![parts], pts.len()),
        Err(ScvtError::IncompleteTriangulation { .. })
    ));
    let dup = merge_triangulations(vec![global.clone(), global.clone()], pts.len()).unwrap();
    assert_eq!(dup, global);
}

#[test]
fn platonic_solids_with_cocircular_faces() {
    let s = 1.0 / 3f64.sqrt();
    let cube: Vec<SpherePoint> =
        (0..8).map(|i| SpherePoint::new(if i & 1 == 0 { s } else { -s }, if i & 2 == 0 { s } else { -s }, if i & 4 == 0 { s } else { -s })).collect();
    let octa = vec![
        SpherePoint::new(1.0, 0.0, 0.0),
        SpherePoint::new(-1.0, 0.0, 0.0),
        SpherePoint::new(0.0, 1.0, 0.0),
        SpherePoint::new(0.0, -1.0, 0.0),
        SpherePoint::new(0.0, 0.0, 1.0),
        SpherePoint::new(0.0, 0.0, -1.0),
    ];
    for pts in [cube, octa, icosahedron()] {
        let t = global_delaunay(&pts, &eps()).unwrap();
        assert_eq!(t.len(), 2 * pts.len() - 4);
        assert!(empty_circle_violations(&t, &pts).is_empty());
        for st in &t.triangles {
            let [a, b, c] = st.v.map(|i| *pts[i as usize].vec());
            assert!(a.dot(&b.cross(&c)) > 0.0, "outward orientation");
        }
    }
}

#[test]
fn global_random_is_delaunay() {
    let pts = random_sphere(1000, 5);
    let t = global_delaunay(&pts, &eps()).unwrap();
    assert_eq!(t.len(), 1996);
    assert!(empty_circle_violations(&t, &pts).is_empty());
    let adj = t.adjacency();
    assert!(adj.iter().all(|a| a.iter().all(Option::is_some)));
}

#[test]
fn global_rejects_duplicates() {
    let mut pts = random_sphere(20, 1);
    pts.push(pts[7]);
    assert!(matches!(global_delaunay(&pts, &eps()), Err(ScvtError::DuplicatePoint { first: 7, second: 20 })));
    pts[20] = pts[0];
    assert!(matches!(global_delaunay(&pts, &eps()), Err(ScvtError::DuplicatePoint { first: 0, second: 20 })));
}

#[test]
fn bisection_counts() {
    let (p, t) = icosphere(2).unwrap();
    assert_eq!(p.len(), 162);
    assert_eq!(bisect_points(&p, &t).len(), 4 * 162 - 6);
}

#[test]
fn equilateral_triangle_splits_into_six_congruent_pieces() {
    let pts = vec![
        SpherePoint::from_lat_lon(0.4, 0.0),
        SpherePoint::from_lat_lon(0.4, 2.0 * std::f64::consts::PI / 3.0),
        SpherePoint::from_lat_lon(0.4, 4.0 * std::f64::consts::PI / 3.0),
    ];
    let tri = SphericalTriangulation { triangles: vec![SphericalTriangle::new([0, 1, 2], &pts, &eps()).unwrap()] };
    let geo = build_voronoi_geometry(&tri, &pts);
    let areas: Vec<f64> = geo.fans.iter().flatten().map(|s| s.signed_area).collect();
    assert_eq!(areas.len(), 6);
    let total = flat_area(pts[0].vec(), pts[1].vec(), pts[2].vec());
    for a in &areas {
        assert!((a - total / 6.0).abs() < 1e-12);
    }
    assert!((areas.iter().sum::<f64>() - total).abs() < 1e-12);
    assert!(geo.obtuse.is_empty());
}

#[test]
fn icosahedron_cells_are_regular_pentagon_fans() {
    let pts = icosahedron();
    let tri = global_delaunay(&pts, &eps()).unwrap();
    assert_eq!(tri.len(), 20);
    let geo = build_voronoi_geometry(&tri, &pts);
    let first: f64 = geo.fans[0].iter().map(|s| s.signed_area).sum();
    for fan in &geo.fans {
        assert_eq!(fan.len(), 10);
        let a: f64 = fan.iter().map(|s| s.signed_area).sum();
        assert!((a - first).abs() < 1e-12);
        for s in fan {
            assert!((s.signed_area - first / 10.0).abs() < 1e-12);
        }
    }
}

#[test]
fn signed_sub_areas_sum_to_triangle_areas() {
    let pts = sample_by_density(&DensityField::x16(), 500, 4);
    let tri = global_delaunay(&pts, &eps()).unwrap();
    let geo = build_voronoi_geometry(&tri, &pts);
    let sub: f64 = geo.fans.iter().flatten().map(|s| s.signed_area).sum();
    let whole: f64 = tri
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.v.map(|i| *pts[i as usize].vec());
            flat_area(&a, &b, &c)
        })
        .sum();
    assert!((sub - whole).abs() < 1e-12 * whole.max(1.0));
    assert!(whole < 4.0 * std::f64::consts::PI);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn global_triangulation_invariants(seed in any::<u64>(), k in 4usize..200) {
        let pts = random_sphere(k, seed);
        let t = global_delaunay(&pts, &eps()).unwrap();
        prop_assert_eq!(t.len(), 2 * k - 4);
        prop_assert_eq!(t.edges().len(), 3 * k - 6);
        prop_assert!(empty_circle_violations(&t, &pts).is_empty());
        // Relabeling the points permutes the triangles accordingly.
        let rev: Vec<SpherePoint> = pts.iter().rev().copied().collect();
        let t2 = global_delaunay(&rev, &eps()).unwrap();
        let mut back: Vec<[u32; 3]> = t2.triangles.iter().map(|x| canonical(x.v.map(|i| (k - 1) as u32 - i))).collect();
        back.sort();
        let orig: Vec<[u32; 3]> = t.triangles.iter().map(|x| x.v).collect();
        prop_assert_eq!(back, orig);
    }
}
