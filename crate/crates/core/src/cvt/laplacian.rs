//! Mass-weighted graph Laplacian of the Delaunay graph, used as a baseline
//! initial inverse Hessian.
//!
//! `a_ij = −∫_{T_ij ∪ T_ji} ρ` where `T_ij` is the part of cell `i` between
//! the generator and the face shared with cell `j` (two sub-triangles, one
//! per adjacent Delaunay triangle), and `a_ii = −Σ_j a_ij`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use super::{integrate_piece, sub_triangles, DualGeometry, Moment};
use crate::delaunay::SphericalTriangulation;
use crate::density::DensityField;
use crate::error::{Result, ScvtError};
use crate::geometry::{IntegrationScheme, SpherePoint};

/// Regularization that makes the singular Laplacian definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianPerturbation {
    /// `A + 1e-6 I`
    A6,
    /// `A_ii ← 1.01 A_ii`
    M2,
}

impl LaplacianPerturbation {
    pub fn name(self) -> &'static str {
        match self {
            LaplacianPerturbation::A6 => "a6",
            LaplacianPerturbation::M2 => "m2",
        }
    }
}

impl fmt::Display for LaplacianPerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LaplacianPerturbation {
    type Err = ScvtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a6" => Ok(LaplacianPerturbation::A6),
            "m2" => Ok(LaplacianPerturbation::M2),
            _ => Err(ScvtError::Config(format!("unknown laplacian perturbation '{s}' (expected a6 or m2)"))),
        }
    }
}

/// Unperturbed Laplacian, `K × K`, in CSR form.
pub fn graph_laplacian(
    points: &[SpherePoint],
    tri: &SphericalTriangulation,
    density: &DensityField,
    scheme: &IntegrationScheme,
) -> CsMat<f64> {
    let k = points.len();
    let mut trip = TriMat::new((k, k));
    let mut diag = vec![0.0; k];
    let dual = DualGeometry::new(points, tri);
    let kinks = density.kinks();
    for (index, t) in tri.triangles.iter().enumerate() {
        // Masses of the six sub-triangles, two per vertex slot.
        let mut sub = [[0.0; 2]; 3];
        for (slot, masses) in sub.iter_mut().enumerate() {
            for (m, piece) in masses.iter_mut().zip(&sub_triangles(&dual, index, slot, scheme.measure)) {
                let mut acc = Moment::default();
                integrate_piece(piece, &piece.vertices[0], density, &kinks, scheme, &mut acc);
                *m = acc.mass;
            }
        }
        for s in 0..3 {
            let (i, j) = (t.v[s] as usize, t.v[(s + 1) % 3] as usize);
            let w = sub[s][0] + sub[(s + 1) % 3][1];
            trip.add_triplet(i, j, -w);
            trip.add_triplet(j, i, -w);
            diag[i] += w;
            diag[j] += w;
        }
    }
    for (i, d) in diag.into_iter().enumerate() {
        trip.add_triplet(i, i, d);
    }
    trip.to_csr()
}

/// A perturbed Laplacian and its `LDLᵀ` factorization.
pub struct LaplacianFactor {
    pub perturbation: LaplacianPerturbation,
    pub matrix: CsMat<f64>,
    ldl: LdlNumeric<f64, usize>,
}

impl fmt::Debug for LaplacianFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplacianFactor")
            .field("perturbation", &self.perturbation)
            .field("rows", &self.matrix.rows())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl LaplacianFactor {
    /// Perturbs `laplacian` and factors it; fails if a pivot is not positive.
    pub fn new(laplacian: &CsMat<f64>, perturbation: LaplacianPerturbation) -> Result<Self> {
        let n = laplacian.rows();
        let mut shift = TriMat::new((n, n));
        for i in 0..n {
            let d = match perturbation {
                LaplacianPerturbation::A6 => 1e-6,
                LaplacianPerturbation::M2 => 0.01 * laplacian.get(i, i).copied().unwrap_or(0.0),
            };
            shift.add_triplet(i, i, d);
        }
        let matrix: CsMat<f64> = laplacian + &shift.to_csr();
        let ldl = Ldl::new()
            .numeric(matrix.view())
            .map_err(|e| ScvtError::Factorization(e.to_string()))?;
        if let Some((i, d)) = ldl.d().iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(ScvtError::Factorization(format!("pivot {i} is {d:e}")));
        }
        Ok(LaplacianFactor { perturbation, matrix, ldl })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.ldl.solve(b)
    }

    /// Applies `A⁻¹` to each coordinate channel of a `3K` vector and projects
    /// every block to the tangent plane of its generator. For a tangential
    /// input the result stays a descent direction when negated.
    pub fn apply_tangent(&self, points: &[SpherePoint], g: &[f64]) -> Vec<f64> {
        let k = points.len();
        let mut out = vec![0.0; 3 * k];
        for c in 0..3 {
            let channel: Vec<f64> = (0..k).map(|i| g[3 * i + c]).collect();
            for (i, x) in self.solve(&channel).into_iter().enumerate() {
                out[3 * i + c] = x;
            }
        }
        for (i, z) in points.iter().enumerate() {
            let block = &mut out[3 * i..3 * i + 3];
            let dot = block[0] * z.x() + block[1] * z.y() + block[2] * z.z();
            block[0] -= dot * z.x();
            block[1] -= dot * z.y();
            block[2] -= dot * z.z();
        }
        out
    }
}
