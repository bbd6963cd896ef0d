//! Strong Wolfe line search along a tangential direction, with points
//! renormalized to the sphere at every trial step.

use super::lbfgs::dot;
use super::Objective;
use crate::cvt::EnergyReport;
use crate::error::{Result, ScvtError};
use crate::geometry::SpherePoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evaluations: usize,
    /// Largest step tried during extrapolation.
    pub max_step: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        WolfeParams { c1: 1e-4, c2: 0.9, max_evaluations: 10, max_step: 1e8 }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub points: Vec<SpherePoint>,
    pub report: EnergyReport,
    pub evaluations: usize,
    /// The strong Wolfe conditions were not met; the best decreasing trial
    /// was returned instead.
    pub exhausted: bool,
}

/// `z_i ← (z_i + α q_i) / ‖z_i + α q_i‖`
pub fn retract(points: &[SpherePoint], q: &[f64], alpha: f64) -> Vec<SpherePoint> {
    points
        .iter()
        .enumerate()
        .map(|(i, z)| SpherePoint::new(z.x() + alpha * q[3 * i], z.y() + alpha * q[3 * i + 1], z.z() + alpha * q[3 * i + 2]))
        .collect()
}

/// Derivative of `α ↦ F(retract(Z, q, α))`. The gradient is tangential at the
/// trial point, so only the `1/‖z + αq‖` factor of the retraction survives.
fn slope(points: &[SpherePoint], q: &[f64], alpha: f64, gradient: &[f64]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let (a, b, c) = (z.x() + alpha * q[3 * i], z.y() + alpha * q[3 * i + 1], z.z() + alpha * q[3 * i + 2]);
            let r = (a * a + b * b + c * c).sqrt();
            dot(&gradient[3 * i..3 * i + 3], &q[3 * i..3 * i + 3]) / r
        })
        .sum()
}

struct Trial {
    alpha: f64,
    phi: f64,
    dphi: f64,
    state: Option<(Vec<SpherePoint>, EnergyReport)>,
}

/// Minimizer of the cubic through two points with slopes, kept inside the
/// middle 80% of the bracket; bisection when the cubic is unusable.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let width = right - left;
    let guess = if hi.phi.is_finite() && hi.dphi.is_finite() {
        let d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
        let disc = d1 * d1 - lo.dphi * hi.dphi;
        if disc >= 0.0 {
            let d2 = (b - a).signum() * disc.sqrt();
            b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2)
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };
    if guess.is_finite() {
        guess.clamp(left + 0.1 * width, right - 0.1 * width)
    } else {
        0.5 * (a + b)
    }
}

/// Searches along `q` from `points` (energy `report`) starting at `alpha0`.
///
/// Fails with `LineSearchFailure` if no trial lowers the energy. Trial
/// points where the objective fails count as infinitely bad.
pub fn wolfe_line_search(
    objective: &mut dyn Objective,
    points: &[SpherePoint],
    q: &[f64],
    report: &EnergyReport,
    alpha0: f64,
    params: &WolfeParams,
) -> Result<LineSearchOutcome> {
    let phi0 = report.energy;
    let dphi0 = dot(&report.gradient, q);
    if !(dphi0 < 0.0) {
        return Err(ScvtError::NonDescent { slope: dphi0 });
    }
    let mut evaluations = 0;
    let mut best: Option<Trial> = None;
    let mut eval = |alpha: f64, evaluations: &mut usize| -> Result<Trial> {
        *evaluations += 1;
        let trial = retract(points, q, alpha);
        match objective.evaluate(&trial) {
            Ok(r) => Ok(Trial { alpha, phi: r.energy, dphi: slope(&trial, q, alpha, &r.gradient), state: Some((trial, r)) }),
            Err(e) if e.is_numerical() => {
                log::debug!("line search trial at step {alpha:e} failed: {e}");
                Ok(Trial { alpha, phi: f64::INFINITY, dphi: f64::NAN, state: None })
            }
            Err(e) => Err(e),
        }
    };
    let sufficient = |t: &Trial| t.phi <= phi0 + params.c1 * t.alpha * dphi0;
    let curvature = |t: &Trial| t.dphi.abs() <= -params.c2 * dphi0;
    let keep_best = |t: &Trial, best: &mut Option<Trial>| {
        if t.phi < phi0 && best.as_ref().is_none_or(|b| t.phi < b.phi) {
            *best = Some(Trial { alpha: t.alpha, phi: t.phi, dphi: t.dphi, state: t.state.clone() });
        }
    };
    let finish = |t: Trial, evaluations: usize, exhausted: bool| {
        let (points, report) = t.state.expect("accepted trial has a state");
        LineSearchOutcome { step: t.alpha, points, report, evaluations, exhausted }
    };

    let mut prev = Trial { alpha: 0.0, phi: phi0, dphi: dphi0, state: None };
    let mut alpha = alpha0;
    // Bracketing phase: (lo, hi) once a bracket is found.
    let mut bracket: Option<(Trial, Trial)> = None;
    while evaluations < params.max_evaluations {
        let t = eval(alpha, &mut evaluations)?;
        keep_best(&t, &mut best);
        if !sufficient(&t) || (prev.alpha > 0.0 && t.phi >= prev.phi) {
            bracket = Some((prev, t));
            break;
        }
        if curvature(&t) {
            return Ok(finish(t, evaluations, false));
        }
        if t.dphi >= 0.0 {
            bracket = Some((t, prev));
            break;
        }
        let next = (4.0 * alpha).min(params.max_step);
        if next <= alpha {
            break;
        }
        prev = t;
        alpha = next;
    }
    // Zoom phase.
    if let Some((mut lo, mut hi)) = bracket {
        while evaluations < params.max_evaluations {
            let alpha = interpolate(&lo, &hi);
            let t = eval(alpha, &mut evaluations)?;
            keep_best(&t, &mut best);
            if !sufficient(&t) || t.phi >= lo.phi {
                hi = t;
                continue;
            }
            if curvature(&t) {
                return Ok(finish(t, evaluations, false));
            }
            if t.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    match best {
        Some(t) => Ok(finish(t, evaluations, true)),
        None => Err(ScvtError::LineSearchFailure { evaluations }),
    }
}
