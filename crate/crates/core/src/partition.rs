//! Overlapping decomposition of the sphere into the Voronoi cells of a
//! coarse CVT ("partition cells"). A region is a partition cell together
//! with its adjacent cells; generators are owned by the cell they belong to.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvt::{compute_moments_background, lloyd_map};
use crate::delaunay::{global_delaunay, Cap};
use crate::density::{sample_by_density, DensityField};
use crate::error::{Result, ScvtError};
use crate::geometry::{geodesic_distance, Epsilons, IntegrationScheme, SpherePoint, Vec3};
use crate::optimizer::{minimize, Method, OptimizerOptions, SerialObjective};

/// How a region extends beyond its own partition cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
#[derive(Default)]
pub enum Overlap {
    /// Own cell plus the adjacent partition cells.
    #[default]
    VoronoiSort,
    /// Geodesic disk around the center, `factor` times the distance to the
    /// farthest adjacent center. Only sensible for quasi-uniform meshes.
    GeodesicDisk { factor: f64 },
}


#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    pub centers: Vec<SpherePoint>,
    /// Adjacent cells, sorted, without the cell itself.
    pub neighbors: Vec<Vec<u32>>,
    /// Cells within two adjacency steps, sorted, including the cell itself.
    pub two_level: Vec<Vec<u32>>,
    pub overlap: Overlap,
}

impl Covering {
    /// Neighbor lists from the Delaunay adjacency of `centers`; with fewer
    /// than four centers every cell is adjacent to every other.
    pub fn from_centers(centers: Vec<SpherePoint>, overlap: Overlap) -> Result<Covering> {
        let p = centers.len();
        if p == 0 {
            return Err(ScvtError::Config("a covering needs at least one partition cell".into()));
        }
        let mut neighbors = vec![Vec::new(); p];
        if p < 4 {
            for (l, list) in neighbors.iter_mut().enumerate() {
                list.extend((0..p as u32).filter(|&m| m as usize != l));
            }
        } else {
            for (a, b) in global_delaunay(&centers, &Epsilons::default())?.edges() {
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
            for list in &mut neighbors {
                list.sort_unstable();
            }
        }
        let two_level = (0..p)
            .map(|l| {
                let mut cells = vec![l as u32];
                for &m in &neighbors[l] {
                    cells.push(m);
                    cells.extend(&neighbors[m as usize]);
                }
                cells.sort_unstable();
                cells.dedup();
                cells
            })
            .collect();
        Ok(Covering { centers, neighbors, two_level, overlap })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Nearest center by Euclidean distance, lowest index on ties.
    pub fn nearest(&self, x: &SpherePoint) -> u32 {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (l, c) in self.centers.iter().enumerate() {
            let d = c.dot(x);
            if d > best_dot {
                best = l;
                best_dot = d;
            }
        }
        best as u32
    }

    /// The cell and its adjacent cells, sorted.
    pub fn region_cells(&self, l: usize) -> Vec<u32> {
        let mut cells = self.neighbors[l].clone();
        cells.push(l as u32);
        cells.sort_unstable();
        cells
    }

    fn disk_radius(&self, l: usize, factor: f64) -> f64 {
        let far = self.neighbors[l]
            .iter()
            .map(|&m| geodesic_distance(&self.centers[l], &self.centers[m as usize]))
            .fold(0.0, f64::max);
        if far == 0.0 {
            std::f64::consts::PI
        } else {
            (factor * far).min(std::f64::consts::PI)
        }
    }

    /// Whether `x` (with nearest center `nearest`) lies in region `l`.
    pub fn in_region(&self, l: usize, x: &SpherePoint, nearest: u32) -> bool {
        match self.overlap {
            Overlap::VoronoiSort => nearest as usize == l || self.neighbors[l].binary_search(&nearest).is_ok(),
            Overlap::GeodesicDisk { factor } => geodesic_distance(&self.centers[l], x) <= self.disk_radius(l, factor),
        }
    }

    /// A cap around center `l` contained in the union of partition cells
    /// `cells` (sorted): any point closer to `c_l` than half the distance to
    /// every other center is nearer to `c_l` than to those centers. For a
    /// geodesic-disk overlap this is the disk itself. A radius of π means
    /// the cells cover the whole sphere.
    pub fn safe_cap(&self, l: usize, cells: &[u32]) -> Cap {
        let center = self.centers[l];
        let radius = match self.overlap {
            Overlap::GeodesicDisk { factor } => self.disk_radius(l, factor),
            Overlap::VoronoiSort => (0..self.len() as u32)
                .filter(|m| cells.binary_search(m).is_err())
                .map(|m| 0.5 * geodesic_distance(&center, &self.centers[m as usize]))
                .fold(std::f64::consts::PI, f64::min),
        };
        Cap { center, radius }
    }

    /// Whether the geodesic disk of radius `r` around `q` lies in the union
    /// of the cells flagged in `inside`. With chord distances, every point of
    /// the disk is within `δ + ρ` of the nearest inside center and at least
    /// `D − ρ` from any outside center (`ρ` the chord radius), so `D − δ > 2ρ`
    /// suffices.
    pub fn disk_in_cells(&self, inside: &[bool], q: &Vec3, r: f64) -> bool {
        let chord = 2.0 * (0.5 * r).sin();
        let (mut near_in, mut near_out) = (f64::INFINITY, f64::INFINITY);
        for (c, &flag) in self.centers.iter().zip(inside) {
            let d = (c.vec() - q).norm();
            if flag {
                near_in = near_in.min(d);
            } else {
                near_out = near_out.min(d);
            }
        }
        near_out - near_in > 2.0 * chord
    }

    /// Symmetric neighbor relation and self-inclusion in the two-level lists.
    pub fn validate(&self) -> Result<()> {
        for (l, list) in self.neighbors.iter().enumerate() {
            for &m in list {
                if m as usize == l || self.neighbors[m as usize].binary_search(&(l as u32)).is_err() {
                    return Err(ScvtError::Config(format!("partition cells {l} and {m} are not mutual neighbors")));
                }
            }
            if self.two_level[l].binary_search(&(l as u32)).is_err() {
                return Err(ScvtError::Config(format!("partition cell {l} missing from its two-level list")));
            }
        }
        Ok(())
    }
}

/// Builds a covering from a coarse CVT of `p` cells with the target density:
/// Monte Carlo start, then Lloyd iterations to a movement of 1e-3.
pub fn bootstrap_partition_cvt(p: usize, density: &DensityField, seed: u64) -> Result<Covering> {
    if p == 0 {
        return Err(ScvtError::Config("partition count must be positive".into()));
    }
    let eps = Epsilons::default();
    let scheme = IntegrationScheme::default();
    let mut centers = sample_by_density(density, p, seed);
    if p >= 4 {
        let mut options = OptimizerOptions::new(Method::Lloyd);
        options.criteria.movement = 1e-3;
        options.criteria.max_iterations = 1000;
        let mut objective = SerialObjective::new(*density, scheme);
        centers = minimize(&mut objective, centers, &options, None)?.points;
    } else if p > 1 {
        for _ in 0..1000 {
            let moments = compute_moments_background(&centers, density, &scheme)?;
            let next = lloyd_map(&moments, &eps)?;
            let moved = next.iter().zip(&centers).map(|(a, b)| (a.vec() - b.vec()).norm()).fold(0.0, f64::max);
            centers = next;
            if moved < 1e-3 {
                break;
            }
        }
    }
    Covering::from_centers(centers, Overlap::VoronoiSort)
}

/// Points per partition cell below which regions are considered underfilled.
pub const MIN_POINTS_PER_CELL: usize = 16;

/// Where each generator lives: `arithmetic` is the owner fixed when the
/// decomposition was made, `geometric` the current nearest center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointAssignment {
    pub arithmetic: Vec<u32>,
    pub geometric: Vec<u32>,
    /// Fewer than `MIN_POINTS_PER_CELL` points per cell on average.
    pub underfilled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MigrationStatus {
    InPlace,
    NeighborMove,
    OutOfRange,
}

fn nearest_all(points: &[SpherePoint], cov: &Covering) -> Vec<u32> {
    points.par_iter().with_min_len(256).map(|z| cov.nearest(z)).collect()
}

/// Fresh decomposition: both positions are the nearest center.
pub fn assign_points(points: &[SpherePoint], cov: &Covering) -> PointAssignment {
    let geometric = nearest_all(points, cov);
    let underfilled = points.len() < MIN_POINTS_PER_CELL * cov.len();
    if underfilled {
        log::warn!(
            "{} points for {} partition cells; at least {} are recommended",
            points.len(),
            cov.len(),
            MIN_POINTS_PER_CELL * cov.len()
        );
    }
    PointAssignment { arithmetic: geometric.clone(), geometric, underfilled }
}

impl PointAssignment {
    /// Recomputes geometric positions, keeping the owners.
    pub fn update(&mut self, points: &[SpherePoint], cov: &Covering) {
        self.geometric = nearest_all(points, cov);
    }

    /// Generators per cell by geometric position, in index order.
    pub fn members(&self, p: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); p];
        for (i, &g) in self.geometric.iter().enumerate() {
            out[g as usize].push(i as u32);
        }
        out
    }

    /// Generators owned by each cell (arithmetic position).
    pub fn owned_counts(&self, p: usize) -> Vec<usize> {
        let mut out = vec![0; p];
        for &a in &self.arithmetic {
            out[a as usize] += 1;
        }
        out
    }

    /// Regions that contain generator `i`.
    pub fn regions_of(&self, i: usize, points: &[SpherePoint], cov: &Covering) -> Vec<u32> {
        (0..cov.len()).filter(|&l| cov.in_region(l, &points[i], self.geometric[i])).map(|l| l as u32).collect()
    }
}

/// `OutOfRange` once some generator's current cell is neither its owner nor
/// adjacent to it; `NeighborMove` if some generator changed cell.
pub fn detect_migration(assign: &PointAssignment, cov: &Covering) -> MigrationStatus {
    let mut status = MigrationStatus::InPlace;
    for (&a, &g) in assign.arithmetic.iter().zip(&assign.geometric) {
        if a == g {
            continue;
        }
        if cov.neighbors[a as usize].binary_search(&g).is_err() {
            return MigrationStatus::OutOfRange;
        }
        status = MigrationStatus::NeighborMove;
    }
    status
}
