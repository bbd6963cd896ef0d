//! Mesh quality: triangle quality from edge lengths, cell quality from
//! Voronoi edge lengths, histograms and local spacing statistics.

use serde::Serialize;

use crate::delaunay::SphericalTriangulation;
use crate::density::{is_polar, DensityField};
use crate::error::{Result, ScvtError};
use crate::geometry::{angle_between, geodesic_distance, SpherePoint};

pub const HISTOGRAM_BINS: usize = 20;

/// `(a+b−c)(b+c−a)(c+a−b) / (abc)`; 1 for equilateral, 0 for degenerate.
pub fn tri_quality(a: f64, b: f64, c: f64) -> Result<f64> {
    let f = [a + b - c, b + c - a, c + a - b];
    if !(a > 0.0 && b > 0.0 && c > 0.0) || f.iter().any(|&x| x < -1e-14 * (a + b + c)) {
        return Err(ScvtError::InvalidTriangle { a, b, c });
    }
    let q = f.iter().map(|x| x.max(0.0)).product::<f64>() / (a * b * c);
    Ok(q.clamp(0.0, 1.0))
}

/// Shortest over longest edge of a cell.
pub fn cell_quality(edges: &[f64]) -> f64 {
    let (lo, hi) = edges.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// Counts of `values` in equal bins over [0, 1]; 1.0 lands in the last bin.
pub fn histogram(values: &[f64]) -> [usize; HISTOGRAM_BINS] {
    let mut h = [0; HISTOGRAM_BINS];
    for &v in values {
        let b = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        h[b] += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        Summary { min, mean, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingSummary {
    /// Largest over smallest local spacing.
    pub ratio: f64,
    /// `(max ρ / min ρ)^{1/4}` over the generators.
    pub predicted: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    pub tri_q: Vec<f64>,
    pub cell_q: Vec<f64>,
    pub tri_summary: Summary,
    pub cell_summary: Summary,
    pub tri_histogram: [usize; HISTOGRAM_BINS],
    pub cell_histogram: [usize; HISTOGRAM_BINS],
    /// Mean geodesic length of the Delaunay edges at each generator.
    pub local_spacing: Vec<f64>,
    pub spacing: SpacingSummary,
}

/// Voronoi edge lengths of every cell: the arcs between circumcenters of
/// the two triangles on either side of each Delaunay edge.
pub fn cell_edges(points: &[SpherePoint], tri: &SphericalTriangulation) -> Vec<Vec<f64>> {
    let mut edges = vec![Vec::with_capacity(6); points.len()];
    for (t, nbrs) in tri.adjacency().iter().enumerate() {
        let v = tri.triangles[t].v;
        for (i, n) in nbrs.iter().enumerate() {
            let Some(n) = *n else { continue };
            if (n as usize) < t {
                continue;
            }
            let len = angle_between(tri.triangles[t].circumcenter.vec(), tri.triangles[n as usize].circumcenter.vec());
            edges[v[(i + 1) % 3] as usize].push(len);
            edges[v[(i + 2) % 3] as usize].push(len);
        }
    }
    edges
}

/// Mean geodesic length of the Delaunay edges at each generator.
pub fn local_spacing(points: &[SpherePoint], tri: &SphericalTriangulation) -> Vec<f64> {
    let mut sum = vec![0.0; points.len()];
    let mut count = vec![0usize; points.len()];
    for (a, b) in tri.edges() {
        let d = geodesic_distance(&points[a as usize], &points[b as usize]);
        for v in [a, b] {
            sum[v as usize] += d;
            count[v as usize] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Quality metrics of a closed mesh on geodesic edge lengths.
pub fn report(points: &[SpherePoint], tri: &SphericalTriangulation, density: &DensityField) -> Result<QualityReport> {
    let tri_q = tri
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.v.map(|i| &points[i as usize]);
            tri_quality(geodesic_distance(b, c), geodesic_distance(c, a), geodesic_distance(a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let cell_q: Vec<f64> = cell_edges(points, tri).iter().map(|e| cell_quality(e)).collect();
    let local = local_spacing(points, tri);
    let s = Summary::of(&local);
    let rho = Summary::of(&points.iter().map(|p| density.eval(p.vec())).collect::<Vec<_>>());
    Ok(QualityReport {
        tri_summary: Summary::of(&tri_q),
        cell_summary: Summary::of(&cell_q),
        tri_histogram: histogram(&tri_q),
        cell_histogram: histogram(&cell_q),
        spacing: SpacingSummary { ratio: s.max / s.min, predicted: (rho.max / rho.min).powf(0.25), min: s.min, max: s.max },
        local_spacing: local,
        tri_q,
        cell_q,
    })
}

/// Mean local spacing of generators within `band` radians of the equator
/// divided by that within `band` of either pole. `None` if a band is empty.
pub fn equator_to_pole_spacing(points: &[SpherePoint], local: &[f64], band: f64) -> Option<f64> {
    let mean = |pick: &dyn Fn(&SpherePoint) -> bool| {
        let v: Vec<f64> = points.iter().zip(local).filter(|(p, _)| pick(p)).map(|(_, &s)| s).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let pole = mean(&|p| is_polar(p, band))?;
    let equator = mean(&|p| p.latitude().abs() < band)?;
    Some(equator / pole)
}
