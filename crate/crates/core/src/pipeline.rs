//! Parallel energy evaluation over an overlapping decomposition, bisection
//! refinement and the optimize–bisect ladder.
//!
//! Each region triangulates the generators of its partition cell and the
//! adjacent cells, keeps the triangles whose circumcircle fits in a cap that
//! lies inside the region, and integrates the cells it owns. Triangles are
//! sorted canonically, so a cell's moment is computed from the same
//! triangles in the same order as the whole-sphere path and the result is
//! bitwise independent of the decomposition and of the worker count.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sprs::CsMat;

use crate::cvt::{cell_moment, energy_and_gradient, graph_laplacian, CellMoments, DualGeometry, EnergyReport, Moment};
use crate::delaunay::{
    bisect_points, cap_spherical_delaunay, circle_inside, global_delaunay, merge_triangulations, Cap, SphericalTriangle,
    SphericalTriangulation,
};
use crate::density::{sample_by_density, DensityField};
use crate::error::{Result, ScvtError};
use crate::geometry::{geodesic_distance, Epsilons, IntegrationScheme, SpherePoint};
use crate::optimizer::{minimize, IterationRecord, Method, Objective, OptimizationResult, OptimizerOptions, StoppingCriteria};
use crate::partition::{
    assign_points, bootstrap_partition_cvt, detect_migration, Covering, MigrationStatus, Overlap, PointAssignment,
};

/// Environment variable with the default worker count.
pub const WORKERS_ENV: &str = "SCVT_WORKERS";

/// `SCVT_WORKERS` if set and positive, otherwise the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Partition cells for `k` generators: the largest of 12, 42, 162, 642 that
/// leaves at least 64 generators per cell, or 1 (no decomposition).
pub fn default_partitions(k: usize) -> usize {
    [642, 162, 42, 12].into_iter().find(|&p| k >= 64 * p).unwrap_or(1)
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScvtError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Cells that ended up without a closed fan are retried with larger point
/// sets, then with the whole sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvaluationStats {
    pub evaluations: usize,
    pub decomposition_resets: usize,
    pub neighbor_moves: usize,
    pub widened_regions: usize,
    pub global_fallbacks: usize,
}

/// Energy evaluation through the overlapping decomposition.
pub struct ParallelObjective {
    pub density: DensityField,
    pub scheme: IntegrationScheme,
    pub eps: Epsilons,
    covering: Covering,
    assignment: Option<PointAssignment>,
    pool: Arc<rayon::ThreadPool>,
    reset_pending: bool,
    pub stats: EvaluationStats,
    last_tri: Option<(Vec<SpherePoint>, SphericalTriangulation)>,
}

impl std::fmt::Debug for ParallelObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelObjective")
            .field("partitions", &self.covering.len())
            .field("workers", &self.pool.current_num_threads())
            .field("stats", &self.stats)
            .finish()
    }
}

/// Per-evaluation result of one region.
struct RegionOutput {
    moments: Vec<(u32, Moment)>,
    widened: bool,
    global: bool,
}

impl ParallelObjective {
    pub fn new(
        density: DensityField,
        scheme: IntegrationScheme,
        covering: Covering,
        pool: Arc<rayon::ThreadPool>,
    ) -> Self {
        ParallelObjective {
            density,
            scheme,
            eps: Epsilons::default(),
            covering,
            assignment: None,
            pool,
            reset_pending: false,
            stats: EvaluationStats::default(),
            last_tri: None,
        }
    }

    pub fn covering(&self) -> &Covering {
        &self.covering
    }

    pub fn assignment(&self) -> Option<&PointAssignment> {
        self.assignment.as_ref()
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Updates geometric positions, resetting the decomposition when a
    /// generator left the neighborhood of its owner.
    fn refresh_assignment(&mut self, points: &[SpherePoint]) -> MigrationStatus {
        let cov = &self.covering;
        let status = match &mut self.assignment {
            Some(a) if a.arithmetic.len() == points.len() => {
                self.pool.install(|| a.update(points, cov));
                detect_migration(a, cov)
            }
            _ => {
                self.assignment = Some(self.pool.install(|| assign_points(points, cov)));
                return MigrationStatus::InPlace;
            }
        };
        match status {
            MigrationStatus::OutOfRange => {
                log::info!("generator left its owner's neighborhood; rebuilding the decomposition");
                self.assignment = Some(self.pool.install(|| assign_points(points, cov)));
                self.stats.decomposition_resets += 1;
                self.reset_pending = true;
            }
            MigrationStatus::NeighborMove => self.stats.neighbor_moves += 1,
            MigrationStatus::InPlace => {}
        }
        status
    }

    /// Moments of every generator, plus the migration status seen.
    pub fn parallel_iteration(&mut self, points: &[SpherePoint]) -> Result<(CellMoments, MigrationStatus)> {
        let k = points.len();
        if k < 4 {
            return Err(ScvtError::InsufficientPoints { count: k });
        }
        let status = self.refresh_assignment(points);
        let p = self.covering.len();
        let members = self.assignment.as_ref().expect("assigned above").members(p);
        let (cov, density, scheme, eps) = (&self.covering, &self.density, &self.scheme, &self.eps);
        let outputs: Vec<Result<RegionOutput>> = self.pool.install(|| {
            (0..p)
                .into_par_iter()
                .with_max_len(1)
                .map(|l| region_moments(l, points, cov, &members, density, scheme, eps))
                .collect()
        });
        let mut cells = vec![Moment::default(); k];
        let mut complete = vec![false; k];
        for out in outputs {
            let out = out?;
            self.stats.widened_regions += usize::from(out.widened);
            self.stats.global_fallbacks += usize::from(out.global);
            for (i, m) in out.moments {
                cells[i as usize] = m;
                complete[i as usize] = true;
            }
        }
        self.stats.evaluations += 1;
        Ok((CellMoments { cells, complete }, status))
    }

    /// Union of the region triangulations, checked to be closed.
    pub fn triangulate(&mut self, points: &[SpherePoint]) -> Result<SphericalTriangulation> {
        if let Some((p, tri)) = &self.last_tri {
            if p.as_slice() == points {
                return Ok(tri.clone());
            }
        }
        self.refresh_assignment(points);
        let p = self.covering.len();
        let members = self.assignment.as_ref().expect("assigned above").members(p);
        let (cov, eps) = (&self.covering, &self.eps);
        let parts: Vec<Result<SphericalTriangulation>> = self.pool.install(|| {
            (0..p)
                .into_par_iter()
                .with_max_len(1)
                .map(|l| region_triangles(l, points, cov, &members, eps).map(|(t, _, _)| t))
                .collect()
        });
        let tri = merge_triangulations(parts.into_iter().collect::<Result<Vec<_>>>()?, points.len())?;
        self.last_tri = Some((points.to_vec(), tri.clone()));
        Ok(tri)
    }
}

impl Objective for ParallelObjective {
    fn evaluate(&mut self, points: &[SpherePoint]) -> Result<EnergyReport> {
        let (moments, _) = self.parallel_iteration(points)?;
        energy_and_gradient(points, &moments)
    }

    fn laplacian(&mut self, points: &[SpherePoint]) -> Result<CsMat<f64>> {
        let tri = self.triangulate(points)?;
        Ok(self.pool.install(|| graph_laplacian(points, &tri, &self.density, &self.scheme)))
    }

    fn take_reset(&mut self) -> bool {
        std::mem::take(&mut self.reset_pending)
    }
}

/// Generators in the given partition cells, sorted by index.
fn gather(cells: &[u32], members: &[Vec<u32>]) -> Vec<u32> {
    let mut ids: Vec<u32> = cells.iter().flat_map(|&c| members[c as usize].iter().copied()).collect();
    ids.sort_unstable();
    ids
}

/// Whether the triangles around `i` close up into a fan.
fn closed_fan(i: u32, tri: &SphericalTriangulation, incident: &[u32]) -> bool {
    if incident.len() < 3 {
        return false;
    }
    let mut next = Vec::with_capacity(incident.len());
    let mut prev = Vec::with_capacity(incident.len());
    for &t in incident {
        let v = tri.triangles[t as usize].v;
        let s = v.iter().position(|&x| x == i).expect("incident");
        next.push(v[(s + 1) % 3]);
        prev.push(v[(s + 2) % 3]);
    }
    next.sort_unstable();
    prev.sort_unstable();
    next == prev && next.windows(2).all(|w| w[0] != w[1])
}

/// The triangles around the generators owned by region `l`, each certainly
/// Delaunay for the whole point set, as (triangles, widened, fell back to
/// the whole sphere). The owned generators (`members[l]`) all have closed
/// fans in the result. Regions that cover the whole sphere are triangulated
/// globally without counting as a fallback.
fn region_triangles(
    l: usize,
    points: &[SpherePoint],
    cov: &Covering,
    members: &[Vec<u32>],
    eps: &Epsilons,
) -> Result<(SphericalTriangulation, bool, bool)> {
    let owned = &members[l];
    let p = cov.len();
    let attempts: Vec<Vec<u32>> = match cov.overlap {
        Overlap::VoronoiSort => vec![cov.region_cells(l), cov.two_level[l].clone()],
        Overlap::GeodesicDisk { .. } => vec![Vec::new()],
    };
    let frame = Cap { center: cov.centers[l], radius: std::f64::consts::PI };
    let mut fallback = true;
    for (attempt, cells) in attempts.iter().enumerate() {
        // Point set and containment test of this attempt.
        let (ids, inside): (Vec<u32>, Box<dyn Fn(&SphericalTriangle) -> bool>) = match cov.overlap {
            Overlap::VoronoiSort => {
                if cells.len() == p {
                    fallback = attempt > 0;
                    break;
                }
                let flags: Vec<bool> = (0..p as u32).map(|m| cells.binary_search(&m).is_ok()).collect();
                let test = move |t: &SphericalTriangle| cov.disk_in_cells(&flags, t.circumcenter.vec(), t.radius);
                (gather(cells, members), Box::new(test))
            }
            Overlap::GeodesicDisk { .. } => {
                let cap = cov.safe_cap(l, cells);
                if cap.radius >= 0.95 * std::f64::consts::PI {
                    fallback = false;
                    break;
                }
                let ids = (0..points.len() as u32)
                    .filter(|&i| geodesic_distance(&cap.center, &points[i as usize]) <= cap.radius)
                    .collect();
                (ids, Box::new(move |t: &SphericalTriangle| circle_inside(t, &cap)))
            }
        };
        if ids.len() < 4 {
            continue;
        }
        let local: Vec<SpherePoint> = ids.iter().map(|&i| points[i as usize]).collect();
        let tri = match cap_spherical_delaunay(&local, &ids, &frame, eps) {
            Ok(t) => t,
            Err(e) if e.is_numerical() => {
                log::debug!("region {l}: local triangulation failed ({e}); widening");
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut kept: Vec<SphericalTriangle> = tri
            .triangles
            .into_iter()
            .filter(|t| t.v.iter().any(|v| owned.binary_search(v).is_ok()) && inside(t))
            .collect();
        kept.sort_by_key(|a| a.v);
        let kept = SphericalTriangulation { triangles: kept };
        let incidence = incidence_of(&kept, owned);
        if owned.iter().zip(&incidence).all(|(&i, inc)| closed_fan(i, &kept, inc)) {
            return Ok((kept, attempt > 0, false));
        }
    }
    if fallback {
        log::debug!("region {l}: falling back to the whole-sphere triangulation");
    }
    let tri = global_delaunay(points, eps)?;
    Ok((tri, fallback, fallback))
}

/// Incident triangles (in triangle order) of each generator in `ids`.
fn incidence_of(tri: &SphericalTriangulation, ids: &[u32]) -> Vec<Vec<u32>> {
    let mut inc = vec![Vec::new(); ids.len()];
    for (t, st) in tri.triangles.iter().enumerate() {
        for v in st.v {
            if let Ok(k) = ids.binary_search(&v) {
                inc[k].push(t as u32);
            }
        }
    }
    inc
}

fn region_moments(
    l: usize,
    points: &[SpherePoint],
    cov: &Covering,
    members: &[Vec<u32>],
    density: &DensityField,
    scheme: &IntegrationScheme,
    eps: &Epsilons,
) -> Result<RegionOutput> {
    let owned = &members[l];
    if owned.is_empty() {
        return Ok(RegionOutput { moments: Vec::new(), widened: false, global: false });
    }
    let (tri, widened, global) = region_triangles(l, points, cov, members, eps)?;
    let incidence = incidence_of(&tri, owned);
    let dual = DualGeometry::new(points, &tri);
    let moments = owned
        .iter()
        .zip(&incidence)
        .map(|(&i, inc)| (i, cell_moment(i, points, &tri, &dual, inc, density, scheme)))
        .collect();
    Ok(RegionOutput { moments, widened, global })
}

/// The points plus the sphere-projected midpoints of all Delaunay edges.
pub fn bisect(points: &[SpherePoint], tri: &SphericalTriangulation) -> Vec<SpherePoint> {
    bisect_points(points, tri)
}

/// Next size on the bisection ladder.
pub fn bisected_size(k: usize) -> usize {
    4 * k - 6
}

/// Where the first level's generators come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    /// Rejection sampling from the density.
    #[default]
    MonteCarlo,
    /// Given generators (for example read from a mesh file).
    Points(Vec<SpherePoint>),
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    /// Final number of generators.
    pub points: usize,
    pub density: DensityField,
    pub method: Method,
    pub workers: usize,
    /// Partition cells; `None` picks from the level size.
    pub partitions: Option<usize>,
    /// Sizes optimized before the final one, each followed by a bisection.
    pub ladder: Vec<usize>,
    pub seed: u64,
    pub criteria: StoppingCriteria,
    /// Looser movement tolerance for the intermediate levels, if any.
    pub intermediate_movement: Option<f64>,
    pub scheme: IntegrationScheme,
    pub eps: Epsilons,
    pub init: Initialization,
}

impl RunPlan {
    pub fn new(points: usize, density: DensityField, method: Method) -> Self {
        RunPlan {
            points,
            density,
            method,
            workers: default_workers(),
            partitions: None,
            ladder: Vec::new(),
            seed: 0,
            criteria: StoppingCriteria::default(),
            intermediate_movement: None,
            scheme: IntegrationScheme::default(),
            eps: Epsilons::default(),
            init: Initialization::MonteCarlo,
        }
    }

    /// All level sizes, ending with the target.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels = self.ladder.clone();
        levels.push(self.points);
        levels
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if levels[0] < 4 {
            return Err(ScvtError::Config(format!("at least 4 generators are needed, got {}", levels[0])));
        }
        for w in levels.windows(2) {
            if w[1] != bisected_size(w[0]) {
                return Err(ScvtError::Config(format!(
                    "ladder step {} -> {} does not bisect (expected {})",
                    w[0],
                    w[1],
                    bisected_size(w[0])
                )));
            }
        }
        if let Initialization::Points(p) = &self.init {
            if p.len() != levels[0] {
                return Err(ScvtError::Config(format!("{} initial points for a first level of {}", p.len(), levels[0])));
            }
        }
        if self.workers == 0 {
            return Err(ScvtError::Config("worker count must be positive".into()));
        }
        self.criteria.validate()?;
        self.density.validate()
    }
}

#[derive(Debug, Clone)]
pub struct LevelOutput {
    pub points_in: usize,
    pub result: OptimizationResult,
    pub stats: EvaluationStats,
    pub partitions: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub levels: Vec<LevelOutput>,
    pub points: Vec<SpherePoint>,
    pub triangulation: SphericalTriangulation,
    pub seconds: f64,
}

/// Called with the level index and each iteration record.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &IterationRecord);

/// Optimizes every level of the plan, bisecting in between. `observer`
/// receives `(level index, record)` for every iteration.
pub fn run(plan: &RunPlan, mut observer: Option<Observer<'_>>) -> Result<RunOutput> {
    plan.validate()?;
    let clock = Instant::now();
    let pool = Arc::new(thread_pool(plan.workers)?);
    let levels = plan.levels();
    let mut points = match &plan.init {
        Initialization::MonteCarlo => sample_by_density(&plan.density, levels[0], plan.seed),
        Initialization::Points(p) => p.clone(),
    };
    let mut outputs = Vec::with_capacity(levels.len());
    let mut triangulation = SphericalTriangulation::default();
    for (index, &k) in levels.iter().enumerate() {
        let level_clock = Instant::now();
        let partitions = plan.partitions.unwrap_or_else(|| default_partitions(k));
        let covering = bootstrap_partition_cvt(partitions, &plan.density, plan.seed)?;
        let mut objective = ParallelObjective::new(plan.density, plan.scheme.clone(), covering, pool.clone());
        objective.eps = plan.eps;
        let mut options = OptimizerOptions::new(plan.method);
        options.criteria = plan.criteria;
        options.eps = plan.eps;
        let last = index + 1 == levels.len();
        if let (false, Some(m)) = (last, plan.intermediate_movement) {
            options.criteria.movement = m;
        }
        let mut forward = |r: &IterationRecord| {
            if let Some(obs) = observer.as_mut() {
                obs(index, r);
            }
        };
        log::info!("level {index}: {k} generators, {partitions} partition cells, method {}", plan.method);
        let result = minimize(&mut objective, points, &options, Some(&mut forward))
            .inspect_err(|e| log::error!("level {index} ({k} generators) failed: {e}"))?;
        triangulation = objective.triangulate(&result.points)?;
        points = if last { result.points.clone() } else { bisect(&result.points, &triangulation) };
        outputs.push(LevelOutput {
            points_in: k,
            stats: objective.stats,
            partitions,
            seconds: level_clock.elapsed().as_secs_f64(),
            result,
        });
    }
    Ok(RunOutput { levels: outputs, points, triangulation, seconds: clock.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests;
