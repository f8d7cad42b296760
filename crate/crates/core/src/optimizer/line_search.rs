//! Bracket-and-zoom line search for the Wolfe conditions.

use crate::error::{Error, Result};

use super::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOptions {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_trials: usize,
    /// Enforce `|phi'(a)| <= c2 |phi'(0)|` instead of `phi'(a) >= c2 phi'(0)`.
    pub strong: bool,
    pub initial_step: f64,
    pub expansion: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_trials: 25,
            strong: false,
            initial_step: 1.0,
            expansion: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub alpha: f64,
    /// Objective evaluations (each one energy plus a full gradient).
    pub evaluations: usize,
    /// False when no Wolfe point was found; the fields then hold the best
    /// sufficient-decrease point seen, or the start point.
    pub satisfied: bool,
}

#[derive(Clone, Debug)]
struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, or
/// `None` when the interpolant has no real minimizer.
fn cubic_minimizer(a: &Trial, b: &Trial) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Wolfe line search along `p` from `x`.
///
/// The first trial is `alpha = initial_step`; the step grows by `expansion`
/// until a point fails sufficient decrease or stops improving, after which
/// the bracket is shrunk by safeguarded cubic interpolation.
pub fn wolfe_line_search(
    objective: &mut dyn Objective,
    x: &[f64],
    f_x: f64,
    grad_x: &[f64],
    p: &[f64],
    options: &LineSearchOptions,
) -> Result<LineSearchOutcome> {
    if x.len() != p.len() || grad_x.len() != p.len() {
        return Err(Error::Dimension(format!(
            "line search with x/grad/p of lengths {}/{}/{}",
            x.len(),
            grad_x.len(),
            p.len()
        )));
    }
    let slope0 = dot(grad_x, p);
    if !(slope0 < 0.0) {
        return Err(Error::NotDescent(slope0));
    }
    let start = Trial {
        alpha: 0.0,
        f: f_x,
        slope: slope0,
        x: x.to_vec(),
        grad: grad_x.to_vec(),
    };
    let mut lo = start.clone();
    let mut hi: Option<Trial> = None;
    let mut alpha = options.initial_step;
    let mut evaluations = 0;

    let curvature_ok = |slope: f64| {
        if options.strong {
            slope.abs() <= -options.c2 * slope0
        } else {
            slope >= options.c2 * slope0
        }
    };

    for _ in 0..options.max_trials {
        let xa: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        let (fa, ga) = objective.value_and_gradient(&xa)?;
        evaluations += 1;
        let trial = Trial {
            alpha,
            f: fa,
            slope: dot(&ga, p),
            x: xa,
            grad: ga,
        };
        let armijo = trial.f <= f_x + options.c1 * alpha * slope0;
        if !trial.f.is_finite() || !armijo || trial.f >= lo.f {
            hi = Some(trial);
        } else if curvature_ok(trial.slope) {
            return Ok(LineSearchOutcome {
                x: trial.x,
                f: trial.f,
                grad: trial.grad,
                alpha: trial.alpha,
                evaluations,
                satisfied: true,
            });
        } else if options.strong && trial.slope * (trial.alpha - lo.alpha) > 0.0 {
            // Overshot a minimizer: the old low end becomes the far end.
            hi = Some(std::mem::replace(&mut lo, trial));
        } else {
            lo = trial;
        }

        alpha = match &hi {
            None => lo.alpha * options.expansion,
            Some(h) => {
                let (a, b) = (lo.alpha.min(h.alpha), lo.alpha.max(h.alpha));
                let width = b - a;
                if width <= f64::EPSILON * b.max(1.0) {
                    break;
                }
                let guard = 0.1 * width;
                let usable = h.f.is_finite() && h.slope.is_finite();
                match usable.then(|| cubic_minimizer(&lo, h)).flatten() {
                    Some(t) => t.clamp(a + guard, b - guard),
                    None => 0.5 * (a + b),
                }
            }
        };
    }

    log::debug!("line search found no Wolfe point after {evaluations} evaluations");
    let best = if lo.alpha > 0.0 { lo } else { start };
    Ok(LineSearchOutcome {
        x: best.x,
        f: best.f,
        grad: best.grad,
        alpha: best.alpha,
        evaluations,
        satisfied: false,
    })
}
