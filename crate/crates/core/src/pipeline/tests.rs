use super::*;
use crate::cvt::compute_moments;
use crate::delaunay::{icosahedron, validate_closed};
use crate::geometry::geodesic_distance;
use crate::optimizer::SerialObjective;

fn objective(density: &DensityField, p: usize, workers: usize) -> ParallelObjective {
    let cov = bootstrap_partition_cvt(p, density, 1).unwrap();
    ParallelObjective::new(*density, IntegrationScheme::default(), cov, Arc::new(thread_pool(workers).unwrap()))
}

#[test]
fn parallel_moments_equal_the_serial_ones() {
    let density = DensityField::x3();
    let points = sample_by_density(&density, 642, 3);
    let tri = global_delaunay(&points, &Epsilons::default()).unwrap();
    let serial = compute_moments(&points, &tri, &density, &IntegrationScheme::default());
    for p in [1, 2, 12, 42] {
        let mut obj = objective(&density, p, 2);
        let (moments, _) = obj.parallel_iteration(&points).unwrap();
        assert!(moments.complete.iter().all(|&c| c));
        assert_eq!(moments.cells, serial.cells, "p = {p}");
        let a = obj.evaluate(&points).unwrap();
        let b = SerialObjective::new(density, IntegrationScheme::default()).evaluate(&points).unwrap();
        assert!((a.energy - b.energy).abs() <= 1e-12 * b.energy);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let density = DensityField::x16();
    let points = sample_by_density(&density, 2562, 4);
    let reference = objective(&density, 12, 1).evaluate(&points).unwrap();
    for workers in [2, 4] {
        let r = objective(&density, 12, workers).evaluate(&points).unwrap();
        assert_eq!(r.energy.to_bits(), reference.energy.to_bits());
        assert!(r.gradient.iter().zip(&reference.gradient).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn owners_partition_the_generators() {
    let density = DensityField::constant();
    let points = sample_by_density(&density, 2562, 5);
    let mut obj = objective(&density, 12, 1);
    obj.evaluate(&points).unwrap();
    let members = obj.assignment().unwrap().members(12);
    let mut all: Vec<u32> = members.concat();
    assert_eq!(all.len(), 2562);
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 2562);
    assert_eq!(obj.stats.global_fallbacks, 0);
}

#[test]
fn merged_region_triangles_close_the_sphere() {
    let density = DensityField::x3();
    let points = sample_by_density(&density, 1000, 6);
    let mut obj = objective(&density, 12, 2);
    let tri = obj.triangulate(&points).unwrap();
    validate_closed(&tri, 1000).unwrap();
    assert_eq!(tri.triangles, global_delaunay(&points, &Epsilons::default()).unwrap().triangles);
}

#[test]
fn teleported_generator_resets_the_decomposition() {
    let density = DensityField::constant();
    let mut points = sample_by_density(&density, 800, 7);
    let mut obj = objective(&density, 12, 1);
    obj.evaluate(&points).unwrap();
    assert!(!obj.take_reset());
    points[0] = points[0].antipode();
    if points[1..].iter().all(|p| geodesic_distance(p, &points[0]) > 1e-6) {
        let (_, status) = obj.parallel_iteration(&points).unwrap();
        assert_eq!(status, MigrationStatus::OutOfRange);
        assert!(obj.take_reset());
        assert!(!obj.take_reset());
        assert_eq!(obj.stats.decomposition_resets, 1);
    }
}

#[test]
fn bisection_counts() {
    let ico = icosahedron();
    let tri = global_delaunay(&ico, &Epsilons::default()).unwrap();
    let once = bisect(&ico, &tri);
    assert_eq!(once.len(), 42);
    // Bisect again without optimizing: still no coincident points.
    let tri = global_delaunay(&once, &Epsilons::default()).unwrap();
    let twice = bisect(&once, &tri);
    assert_eq!(twice.len(), bisected_size(42));
    let mut min: f64 = f64::INFINITY;
    for i in 0..twice.len() {
        for j in 0..i {
            min = min.min((twice[i].vec() - twice[j].vec()).norm());
        }
    }
    assert!(min > 0.1, "min distance {min}");
    assert_eq!(bisected_size(2562), 10242);
}

#[test]
fn plans_reject_bad_ladders() {
    let mut plan = RunPlan::new(642, DensityField::x3(), Method::LloydPLbfgs);
    plan.ladder = vec![162];
    assert!(plan.validate().is_ok());
    plan.ladder = vec![160];
    assert!(matches!(plan.validate(), Err(ScvtError::Config(_))));
    plan.ladder = vec![];
    plan.workers = 0;
    assert!(plan.validate().is_err());
}

#[test]
fn ladder_run_produces_a_closed_mesh() {
    let mut plan = RunPlan::new(642, DensityField::x3(), Method::LloydPLbfgs);
    plan.ladder = vec![162];
    plan.workers = 2;
    plan.partitions = Some(2);
    plan.seed = 8;
    let mut seen = Vec::new();
    let mut observer = |level: usize, r: &IterationRecord| seen.push((level, r.n));
    let out = run(&plan, Some(&mut observer)).unwrap();
    assert_eq!(out.levels.len(), 2);
    assert_eq!(out.points.len(), 642);
    validate_closed(&out.triangulation, 642).unwrap();
    assert_eq!(seen.len(), out.levels.iter().map(|l| l.result.records.len()).sum::<usize>());
    // The bisected start of level 1 is already close to a minimizer.
    let first = &out.levels[1].result.records;
    assert!(first.last().unwrap().energy < first[0].energy);
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let mut plan = RunPlan::new(642, DensityField::x3(), Method::LloydPLbfgs);
    plan.partitions = Some(2);
    plan.seed = 9;
    plan.criteria.max_iterations = 15;
    plan.workers = 1;
    let a = run(&plan, None).unwrap();
    plan.workers = 3;
    let b = run(&plan, None).unwrap();
    assert_eq!(a.points, b.points);
}

#[test]
fn partition_defaults() {
    assert_eq!(default_partitions(642), 1);
    assert_eq!(default_partitions(2562), 12);
    assert_eq!(default_partitions(10242), 42);
    assert_eq!(default_partitions(40962), 162);
}
