//! Limited-memory BFGS corrections and the two-loop recursion.

use std::collections::VecDeque;

use crate::cvt::LaplacianFactor;
use crate::geometry::SpherePoint;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionPair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// `1 / yᵀs`
    pub rho: f64,
}

/// The most recent `capacity` pairs `(s, y)`, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionHistory {
    capacity: usize,
    pairs: VecDeque<CorrectionPair>,
    /// Pairs rejected by the curvature test since construction.
    pub skipped: usize,
}

impl Default for CorrectionHistory {
    fn default() -> Self {
        CorrectionHistory::new(7)
    }
}

impl CorrectionHistory {
    pub fn new(capacity: usize) -> Self {
        CorrectionHistory { capacity: capacity.max(1), pairs: VecDeque::new(), skipped: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CorrectionPair> + ExactSizeIterator {
        self.pairs.iter()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores the pair if `yᵀs > 1e-14 ‖s‖‖y‖`; returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&y, &s);
        if !(ys > 1e-14 * norm(&s) * norm(&y)) {
            self.skipped += 1;
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CorrectionPair { s, y, rho: 1.0 / ys });
        true
    }

    /// `γ = yᵀs / yᵀy` of the newest pair.
    pub fn gamma(&self) -> Option<f64> {
        self.pairs.back().map(|p| dot(&p.y, &p.s) / dot(&p.y, &p.y))
    }
}

/// Which initial inverse Hessian a method uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialInverse {
    GammaIdentity,
    LloydDiagonal,
    LaplacianSolve,
}

/// An initial inverse Hessian ready to apply.
#[derive(Debug, Clone, Copy)]
pub enum InitialOperator<'a> {
    Scalar(f64),
    /// One positive entry per generator, applied to its 3-block.
    BlockDiagonal(&'a [f64]),
    Laplacian { factor: &'a LaplacianFactor, points: &'a [SpherePoint] },
}

impl InitialOperator<'_> {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            InitialOperator::Scalar(g) => v.iter().map(|x| g * x).collect(),
            InitialOperator::BlockDiagonal(d) => v.iter().enumerate().map(|(i, x)| d[i / 3] * x).collect(),
            InitialOperator::Laplacian { factor, points } => factor.apply_tangent(points, v),
        }
    }
}

/// `q = −H̃ g` by the backward and forward loops.
pub fn two_loop_direction(g: &[f64], history: &CorrectionHistory, h0: &InitialOperator) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (a, p) in alpha.iter_mut().zip(history.pairs()).rev() {
        *a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= *a * yi;
        }
    }
    let mut q = h0.apply(&q);
    for (a, p) in alpha.iter().zip(history.pairs()) {
        let beta = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += si * (a - beta);
        }
    }
    for qi in &mut q {
        *qi = -*qi;
    }
    q
}
