//! BFGS with a Wolfe line search, and the recycling variant that starts each
//! optimization from the previous optimization's inverse Hessian.

mod hessian;
mod line_search;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hessian::{bfgs_update, InverseHessian, Update, CURVATURE_SKIP_RATIO};
pub use line_search::{wolfe_line_search, LineSearchOptions, LineSearchOutcome};

/// A differentiable scalar function.
pub trait Objective {
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// One partial derivative. The default evaluates the full gradient.
    fn partial(&mut self, x: &[f64], index: usize) -> Result<f64> {
        let (_, g) = self.value_and_gradient(x)?;
        g.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            len: g.len(),
        })
    }
}

/// Adapts a closure returning `(f, grad)`.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.0)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerOptions {
    /// Gradient-norm convergence threshold.
    pub tolerance: f64,
    /// Maximum number of line searches.
    pub max_iterations: usize,
    pub line_search: LineSearchOptions,
    /// Keep every iterate, direction and inverse Hessian for diagnostics.
    pub record_history: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 10_000,
            line_search: LineSearchOptions::default(),
            record_history: false,
        }
    }
}

/// One row of the optimizer trace. Row `k = 0` describes the initial
/// evaluation; row `k > 0` the line search that produced iterate `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub alpha: Option<f64>,
    pub energy_evals: usize,
    pub gradient_evals: usize,
    pub fevals_cumulative: u64,
    pub update_skipped: bool,
}

/// Full state at one iterate, kept when `record_history` is set.
#[derive(Clone, Debug)]
pub struct IterateRecord {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    /// Inverse Hessian used to form the search direction from this iterate.
    pub h: DMatrix<f64>,
    /// Search direction taken from this iterate; `None` at the last iterate.
    pub direction: Option<Vec<f64>>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizerResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub h: InverseHessian,
    pub h0: InverseHessian,
    pub line_searches: usize,
    pub converged: bool,
    pub line_search_failed: bool,
    pub trace: Vec<TraceRecord>,
    pub history: Vec<IterateRecord>,
}

impl OptimizerResult {
    pub fn function_evaluations(&self) -> u64 {
        self.trace.last().map_or(0, |r| r.fevals_cumulative)
    }

    pub fn skipped_updates(&self) -> usize {
        self.trace.iter().filter(|r| r.update_skipped).count()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bookkeeping shared by both drivers.
struct Run<'a> {
    options: &'a OptimizerOptions,
    trace: Vec<TraceRecord>,
    history: Vec<IterateRecord>,
    fevals: u64,
}

impl<'a> Run<'a> {
    fn new(options: &'a OptimizerOptions) -> Self {
        Self {
            options,
            trace: Vec::new(),
            history: Vec::new(),
            fevals: 0,
        }
    }

    fn record(
        &mut self,
        k: usize,
        f: f64,
        grad: &[f64],
        alpha: Option<f64>,
        energy_evals: usize,
        gradient_evals: usize,
        update_skipped: bool,
    ) {
        self.fevals += energy_evals as u64 + 2 * gradient_evals as u64;
        self.trace.push(TraceRecord {
            k,
            f,
            grad_norm: norm(grad),
            alpha,
            energy_evals,
            gradient_evals,
            fevals_cumulative: self.fevals,
            update_skipped,
        });
    }

    fn remember(&mut self, x: &[f64], grad: &[f64], h: &InverseHessian) {
        if self.options.record_history {
            self.history.push(IterateRecord {
                x: x.to_vec(),
                grad: grad.to_vec(),
                h: h.matrix().clone(),
                direction: None,
                alpha: None,
            });
        }
    }

    fn set_step(&mut self, p: &[f64], alpha: f64) {
        if let Some(last) = self.history.last_mut() {
            last.direction = Some(p.to_vec());
            last.alpha = Some(alpha);
        }
    }
}

fn direction(h: &InverseHessian, grad: &[f64]) -> Vec<f64> {
    h.apply(grad).into_iter().map(|v| -v).collect()
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("initial point".into()))
    }
}

/// Textbook BFGS from `H_0 = I`.
///
/// The inverse Hessian is updated only after a line search that did not
/// reach the tolerance, so the returned `h` is the one used for the final
/// search direction.
pub fn minimize_canonical(
    objective: &mut dyn Objective,
    x0: &[f64],
    options: &OptimizerOptions,
) -> Result<OptimizerResult> {
    check_finite(x0)?;
    let n = x0.len();
    let mut run = Run::new(options);
    let (mut f, mut grad) = objective
        .value_and_gradient(x0)
        .map_err(|e| e.in_optimizer(0))?;
    if grad.len() != n {
        return Err(Error::Dimension(format!(
            "objective returned a gradient of length {} for {n} parameters",
            grad.len()
        )));
    }
    let mut x = x0.to_vec();
    let h0 = InverseHessian::identity(n);
    let mut h = h0.clone();
    run.record(0, f, &grad, None, 1, n, false);
    run.remember(&x, &grad, &h);

    let mut converged = norm(&grad) < options.tolerance;
    let mut failed = false;
    let mut line_searches = 0;
    let mut k = 0;
    while !converged && k < options.max_iterations {
        let p = direction(&h, &grad);
        let step = wolfe_line_search(objective, &x, f, &grad, &p, &options.line_search)
            .map_err(|e| e.in_optimizer(k + 1))?;
        line_searches += 1;
        run.set_step(&p, step.alpha);
        if !step.satisfied {
            failed = true;
            run.record(k + 1, step.f, &step.grad, Some(step.alpha), step.evaluations, step.evaluations * n, true);
            if step.alpha > 0.0 {
                x = step.x;
                f = step.f;
                grad = step.grad;
                run.remember(&x, &grad, &h);
            }
            break;
        }
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        x = step.x;
        f = step.f;
        grad = step.grad;
        if norm(&grad) > options.tolerance {
            let up = bfgs_update(&h, &s, &y)?;
            h = up.h;
            k += 1;
            run.record(k, f, &grad, Some(step.alpha), step.evaluations, step.evaluations * n, up.skipped);
            run.remember(&x, &grad, &h);
        } else {
            converged = true;
            run.record(k + 1, f, &grad, Some(step.alpha), step.evaluations, step.evaluations * n, false);
            run.remember(&x, &grad, &h);
        }
    }

    Ok(OptimizerResult {
        x,
        f,
        grad,
        h,
        h0,
        line_searches,
        converged,
        line_search_failed: failed,
        trace: run.trace,
        history: run.history,
    })
}

/// Optimizer state carried from the previous ADAPT iteration.
#[derive(Clone, Debug)]
pub struct RecycledStart<'a> {
    pub x: &'a [f64],
    pub f: f64,
    pub grad: &'a [f64],
    pub h: &'a InverseHessian,
}

/// BFGS warm-started from a previous optimum.
///
/// `new_params` zeros are appended to `start.x`; the objective value at the
/// extended point must equal `start.f` (new parameters at zero act as the
/// identity). Only the new partial derivatives are evaluated for the initial
/// gradient, and the initial inverse Hessian is `[[H_prev, 0], [0, I]]`. The
/// inverse Hessian is updated after every line search, before the
/// convergence check, so the returned `h` is current.
pub fn minimize_recycled(
    objective: &mut dyn Objective,
    start: RecycledStart<'_>,
    new_params: usize,
    options: &OptimizerOptions,
) -> Result<OptimizerResult> {
    let prev = start.x.len();
    if start.grad.len() != prev || start.h.dim() != prev {
        return Err(Error::Dimension(format!(
            "recycled state has x/grad/H dimensions {}/{}/{}",
            prev,
            start.grad.len(),
            start.h.dim()
        )));
    }
    check_finite(start.x)?;
    let n = prev + new_params;
    let mut x = start.x.to_vec();
    x.resize(n, 0.0);
    let mut grad = start.grad.to_vec();
    for index in prev..n {
        grad.push(objective.partial(&x, index).map_err(|e| e.in_optimizer(0))?);
    }
    let mut f = start.f;
    let h0 = start.h.expand(new_params);
    let mut h = h0.clone();
    let mut run = Run::new(options);
    run.record(0, f, &grad, None, 0, new_params, false);
    run.remember(&x, &grad, &h);

    let mut converged = norm(&grad) < options.tolerance;
    let mut failed = false;
    let mut line_searches = 0;
    let mut k = 0;
    while !converged && k < options.max_iterations {
        let p = direction(&h, &grad);
        let step = wolfe_line_search(objective, &x, f, &grad, &p, &options.line_search)
            .map_err(|e| e.in_optimizer(k + 1))?;
        line_searches += 1;
        run.set_step(&p, step.alpha);
        if !step.satisfied {
            failed = true;
            run.record(k + 1, step.f, &step.grad, Some(step.alpha), step.evaluations, step.evaluations * n, true);
            if step.alpha > 0.0 {
                x = step.x;
                f = step.f;
                grad = step.grad;
                run.remember(&x, &grad, &h);
            }
            break;
        }
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        x = step.x;
        f = step.f;
        grad = step.grad;
        let up = bfgs_update(&h, &s, &y)?;
        h = up.h;
        k += 1;
        run.record(k, f, &grad, Some(step.alpha), step.evaluations, step.evaluations * n, up.skipped);
        run.remember(&x, &grad, &h);
        converged = norm(&grad) < options.tolerance;
    }

    Ok(OptimizerResult {
        x,
        f,
        grad,
        h,
        h0,
        line_searches,
        converged,
        line_search_failed: failed,
        trace: run.trace,
        history: run.history,
    })
}
