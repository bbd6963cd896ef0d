//! Lloyd iteration, LBFGS with a choice of initial inverse Hessian, and the
//! stopping rules shared by all methods.

mod lbfgs;
mod line_search;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sprs::CsMat;

use crate::cvt::{compute_moments, energy_and_gradient, graph_laplacian, EnergyReport, LaplacianFactor, LaplacianPerturbation};
use crate::delaunay::{global_delaunay, SphericalTriangulation};
use crate::density::DensityField;
use crate::error::{Result, ScvtError};
use crate::geometry::{Epsilons, IntegrationScheme, SpherePoint};

pub use lbfgs::{dot, norm, two_loop_direction, CorrectionHistory, CorrectionPair, InitialInverse, InitialOperator};
pub use line_search::{retract, wolfe_line_search, LineSearchOutcome, WolfeParams};

/// Something that can evaluate the CVT energy at a configuration.
pub trait Objective {
    fn evaluate(&mut self, points: &[SpherePoint]) -> Result<EnergyReport>;

    /// Unperturbed graph Laplacian at `points`.
    fn laplacian(&mut self, _points: &[SpherePoint]) -> Result<CsMat<f64>> {
        Err(ScvtError::Config("this objective does not provide a graph Laplacian".into()))
    }

    /// True once after the objective rebuilt its domain decomposition, which
    /// invalidates stored corrections.
    fn take_reset(&mut self) -> bool {
        false
    }
}

/// Whole-sphere evaluation on one triangulation per call.
#[derive(Debug, Clone)]
pub struct SerialObjective {
    pub density: DensityField,
    pub scheme: IntegrationScheme,
    pub eps: Epsilons,
    last: Option<(Vec<SpherePoint>, SphericalTriangulation)>,
}

impl SerialObjective {
    pub fn new(density: DensityField, scheme: IntegrationScheme) -> Self {
        SerialObjective { density, scheme, eps: Epsilons::default(), last: None }
    }

    /// Triangulation of `points`, reusing the last one if it matches.
    pub fn triangulation(&mut self, points: &[SpherePoint]) -> Result<&SphericalTriangulation> {
        if self.last.as_ref().is_none_or(|(p, _)| p.as_slice() != points) {
            let tri = global_delaunay(points, &self.eps)?;
            self.last = Some((points.to_vec(), tri));
        }
        Ok(&self.last.as_ref().expect("just stored").1)
    }
}

impl Objective for SerialObjective {
    fn evaluate(&mut self, points: &[SpherePoint]) -> Result<EnergyReport> {
        self.triangulation(points)?;
        let tri = &self.last.as_ref().expect("just stored").1;
        let moments = compute_moments(points, tri, &self.density, &self.scheme);
        energy_and_gradient(points, &moments)
    }

    fn laplacian(&mut self, points: &[SpherePoint]) -> Result<CsMat<f64>> {
        self.triangulation(points)?;
        let tri = &self.last.as_ref().expect("just stored").1;
        Ok(graph_laplacian(points, tri, &self.density, &self.scheme))
    }
}

/// Optimization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Lloyd,
    /// LBFGS with `γ I` as initial inverse.
    Lbfgs,
    /// LBFGS with the inverse Lloyd diagonal as initial inverse.
    LloydPLbfgs,
    /// LBFGS with a perturbed graph Laplacian solve as initial inverse.
    Laplacian(LaplacianPerturbation),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lloyd,
        Method::Lbfgs,
        Method::LloydPLbfgs,
        Method::Laplacian(LaplacianPerturbation::A6),
        Method::Laplacian(LaplacianPerturbation::M2),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lloyd => "lloyd",
            Method::Lbfgs => "lbfgs",
            Method::LloydPLbfgs => "lloyd-plbfgs",
            Method::Laplacian(LaplacianPerturbation::A6) => "laplacian-a6",
            Method::Laplacian(LaplacianPerturbation::M2) => "laplacian-m2",
        }
    }

    pub fn initial_inverse(self) -> Option<InitialInverse> {
        match self {
            Method::Lloyd => None,
            Method::Lbfgs => Some(InitialInverse::GammaIdentity),
            Method::LloydPLbfgs => Some(InitialInverse::LloydDiagonal),
            Method::Laplacian(_) => Some(InitialInverse::LaplacianSolve),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ScvtError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                ScvtError::Config(format!("unknown method '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = ScvtError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// Lloyd stops on the movement test; the line-search methods stop on the
/// gradient and energy-stall tests. All methods share the iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingCriteria {
    pub max_iterations: usize,
    /// Largest single-generator displacement.
    pub movement: f64,
    /// `‖∇F‖ / F`
    pub relative_gradient: f64,
    /// `|F_n − F_{n−1}| / F_{n−1}`
    pub energy_stall: f64,
    /// Also apply the movement test to line-search methods. Off by default:
    /// one short accepted step would otherwise end an LBFGS run.
    pub movement_for_quasi_newton: bool,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria { max_iterations: 2000, movement: 5e-4, relative_gradient: 5e-4, energy_stall: 1e-7, movement_for_quasi_newton: false }
    }
}

impl StoppingCriteria {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && [self.movement, self.relative_gradient, self.energy_stall].iter().all(|t| *t > 0.0 && t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ScvtError::Config(format!("stopping criteria need positive limits: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    Movement,
    Gradient,
    EnergyStall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Energy evaluations of the line search; `None` for Lloyd steps.
    pub evaluations: Option<usize>,
    /// Seconds since the start of `minimize`.
    pub time: f64,
    pub movement: f64,
    /// Stored corrections were discarded during this iteration.
    pub reset: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub points: Vec<SpherePoint>,
    pub report: EnergyReport,
    /// Record 0 is the starting configuration.
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub evaluations: usize,
    pub resets: usize,
    /// Iterations that fell back to a plain Lloyd step.
    pub lloyd_fallbacks: usize,
    pub skipped_pairs: usize,
}

impl OptimizationResult {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }
}

/// Constrained centroids recovered from the gradient and Lloyd diagonal:
/// `c_i = (d_i z_i − g_i) / 2`.
pub fn lloyd_step(points: &[SpherePoint], report: &EnergyReport, eps: &Epsilons) -> Result<Vec<SpherePoint>> {
    points
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let g = &report.gradient[3 * i..3 * i + 3];
            let d = report.diagonal[i];
            let c = [0.5 * (d * z.x() - g[0]), 0.5 * (d * z.y() - g[1]), 0.5 * (d * z.z() - g[2])];
            let n = norm(&c);
            if n <= eps.centroid {
                return Err(ScvtError::CentroidAtOrigin { id: i as u32 });
            }
            Ok(SpherePoint::new(c[0], c[1], c[2]))
        })
        .collect()
}

fn movement(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p.vec() - q.vec()).norm()).fold(0.0, f64::max)
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn flatten(points: &[SpherePoint]) -> Vec<f64> {
    points.iter().flat_map(|p| p.to_array()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub method: Method,
    pub criteria: StoppingCriteria,
    pub memory: usize,
    pub wolfe: WolfeParams,
    pub eps: Epsilons,
}

impl OptimizerOptions {
    pub fn new(method: Method) -> Self {
        OptimizerOptions {
            method,
            criteria: StoppingCriteria::default(),
            memory: 7,
            wolfe: WolfeParams::default(),
            eps: Epsilons::default(),
        }
    }
}

/// What one iteration produced before the stopping tests.
struct Step {
    points: Vec<SpherePoint>,
    report: EnergyReport,
    alpha: f64,
    evaluations: Option<usize>,
    reset: bool,
}

/// Runs `options.method` from `start` until a stopping criterion holds.
/// `callback` sees every record, including the starting one.
pub fn minimize(
    objective: &mut dyn Objective,
    start: Vec<SpherePoint>,
    options: &OptimizerOptions,
    mut callback: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<OptimizationResult> {
    options.criteria.validate()?;
    if start.len() < 4 {
        return Err(ScvtError::InsufficientPoints { count: start.len() });
    }
    let clock = Instant::now();
    let mut points = start;
    let mut report = objective.evaluate(&points)?;
    objective.take_reset();
    let mut result = OptimizationResult {
        points: Vec::new(),
        report: EnergyReport::default(),
        records: Vec::new(),
        stop: StopReason::MaxIterations,
        evaluations: 1,
        resets: 0,
        lloyd_fallbacks: 0,
        skipped_pairs: 0,
    };
    let mut push = |record: IterationRecord, result: &mut OptimizationResult| {
        if let Some(cb) = callback.as_mut() {
            cb(&record);
        }
        result.records.push(record);
    };
    push(
        IterationRecord {
            n: 0,
            energy: report.energy,
            grad_norm: report.grad_norm,
            step: 0.0,
            evaluations: options.method.initial_inverse().map(|_| 1),
            time: clock.elapsed().as_secs_f64(),
            movement: 0.0,
            reset: false,
        },
        &mut result,
    );
    let mut history = CorrectionHistory::new(options.memory);
    let criteria = &options.criteria;

    for n in 1..=criteria.max_iterations {
        let step = match options.method.initial_inverse() {
            None => {
                let next = lloyd_step(&points, &report, &options.eps)?;
                let r = objective.evaluate(&next)?;
                objective.take_reset();
                Step { points: next, report: r, alpha: 1.0, evaluations: None, reset: false }
            }
            Some(h0) => lbfgs_step(objective, &points, &report, &mut history, h0, options, &mut result)?,
        };
        result.evaluations += step.evaluations.unwrap_or(1);
        if step.reset {
            result.resets += 1;
        }
        let moved = movement(&points, &step.points);
        let previous = report.energy;
        points = step.points;
        report = step.report;
        push(
            IterationRecord {
                n,
                energy: report.energy,
                grad_norm: report.grad_norm,
                step: step.alpha,
                evaluations: step.evaluations,
                time: clock.elapsed().as_secs_f64(),
                movement: moved,
                reset: step.reset,
            },
            &mut result,
        );
        let lloyd = options.method == Method::Lloyd;
        let stop = if moved < criteria.movement && (lloyd || criteria.movement_for_quasi_newton) {
            Some(StopReason::Movement)
        } else if !lloyd && report.grad_norm / report.energy <= criteria.relative_gradient {
            Some(StopReason::Gradient)
        } else if !lloyd && (report.energy - previous).abs() / previous < criteria.energy_stall {
            Some(StopReason::EnergyStall)
        } else {
            None
        };
        if let Some(stop) = stop {
            result.stop = stop;
            break;
        }
    }
    result.skipped_pairs = history.skipped;
    result.points = points;
    result.report = report;
    Ok(result)
}

fn lbfgs_step(
    objective: &mut dyn Objective,
    points: &[SpherePoint],
    report: &EnergyReport,
    history: &mut CorrectionHistory,
    h0: InitialInverse,
    options: &OptimizerOptions,
    result: &mut OptimizationResult,
) -> Result<Step> {
    let g = &report.gradient;
    let mut reset = false;
    let factor = match (h0, options.method) {
        (InitialInverse::LaplacianSolve, Method::Laplacian(perturbation)) => {
            match objective.laplacian(points).and_then(|a| LaplacianFactor::new(&a, perturbation)) {
                Ok(f) => Some(f),
                Err(e) => {
                    log::warn!("Laplacian preconditioner unavailable, using γI this iteration: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let inverse_diagonal: Option<Vec<f64>> = match h0 {
        InitialInverse::LloydDiagonal => {
            match report.diagonal.iter().position(|d| !(*d > 0.0)) {
                None => Some(report.diagonal.iter().map(|d| 1.0 / d).collect()),
                Some(i) => {
                    let e = ScvtError::NonpositiveDiagonal { id: i as u32, value: report.diagonal[i] };
                    log::warn!("{e}; using γI this iteration");
                    None
                }
            }
        }
        _ => None,
    };
    let operator = |history: &CorrectionHistory| -> (InitialOperator<'_>, bool) {
        if let Some(f) = &factor {
            (InitialOperator::Laplacian { factor: f, points }, false)
        } else if let Some(d) = &inverse_diagonal {
            (InitialOperator::BlockDiagonal(d), false)
        } else {
            match history.gamma() {
                Some(gamma) => (InitialOperator::Scalar(gamma), false),
                None => (InitialOperator::Scalar(1.0), true),
            }
        }
    };

    let direction = |history: &CorrectionHistory| {
        let (op, unscaled) = operator(history);
        let q = two_loop_direction(g, history, &op);
        // Without curvature information the identity has the wrong scale;
        // start with a unit-length step instead.
        let alpha0 = if unscaled { 1.0 / norm(&q).max(f64::MIN_POSITIVE) } else { 1.0 };
        (q, alpha0)
    };
    let (mut q, mut alpha0) = direction(history);
    if !(dot(&q, g) < 0.0) {
        log::debug!("{}; clearing corrections", ScvtError::NonDescent { slope: dot(&q, g) });
        history.clear();
        reset = true;
        (q, alpha0) = direction(history);
    }
    let search = if dot(&q, g) < 0.0 {
        wolfe_line_search(objective, points, &q, report, alpha0, &options.wolfe)
    } else {
        Err(ScvtError::NonDescent { slope: dot(&q, g) })
    };
    match search {
        Ok(outcome) => {
            if objective.take_reset() {
                history.clear();
                reset = true;
            } else {
                let s = difference(&flatten(&outcome.points), &flatten(points));
                let y = difference(&outcome.report.gradient, g);
                history.push(s, y);
            }
            Ok(Step {
                points: outcome.points,
                report: outcome.report,
                alpha: outcome.step,
                evaluations: Some(outcome.evaluations),
                reset,
            })
        }
        Err(e @ (ScvtError::LineSearchFailure { .. } | ScvtError::NonDescent { .. })) => {
            log::debug!("{e}; clearing corrections and taking a Lloyd step");
            history.clear();
            objective.take_reset();
            result.lloyd_fallbacks += 1;
            let evaluations = match &e {
                ScvtError::LineSearchFailure { evaluations } => *evaluations,
                _ => 0,
            };
            let next = lloyd_step(points, report, &options.eps)?;
            let r = objective.evaluate(&next)?;
            objective.take_reset();
            Ok(Step { points: next, report: r, alpha: 1.0, evaluations: Some(evaluations + 1), reset: true })
        }
        Err(e) => Err(e),
    }
}
