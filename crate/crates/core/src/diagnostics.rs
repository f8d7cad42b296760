//! Exact Hessians, Newton directions, convergence-rate series and
//! inverse-Hessian distances for finished runs. Evaluations made here are
//! charged to a separate shadow ledger, never to the run's own.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::driver::{AdaptResult, CostLedger, Mode, Problem};
use crate::error::{Error, Result};
use crate::exec;
use crate::optimizer::IterateRecord;
use crate::pauli::PauliSum;
use crate::simulator::{energy_and_gradient_uncharged, AnsatzState};

/// Default central-difference step.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-5;

/// Relative eigenvalue magnitude below which a Hessian counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianOptions {
    pub step: f64,
    /// Combine steps `h` and `h/2` as `(4 D(h/2) - D(h)) / 3`.
    pub richardson: bool,
}

impl Default for HessianOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_HESSIAN_STEP,
            richardson: false,
        }
    }
}

impl HessianOptions {
    /// Gradient evaluations needed for a Hessian of dimension `n`.
    pub fn gradient_calls(&self, n: usize) -> usize {
        if self.richardson {
            4 * n
        } else {
            2 * n
        }
    }
}

/// A finite-difference Hessian with its raw asymmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianEstimate {
    /// `(A + A^T) / 2`.
    pub matrix: DMatrix<f64>,
    /// `max |A_ij - A_ji|` before symmetrization.
    pub asymmetry: f64,
}

fn central_rows<G>(gradient: &G, x: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let rows = exec::map_indexed(n, |i| -> Result<Vec<f64>> {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += step;
        minus[i] -= step;
        let gp = gradient(&plus)?;
        let gm = gradient(&minus)?;
        if gp.len() != n || gm.len() != n {
            return Err(Error::Dimension(format!(
                "gradient of length {} for {n} parameters",
                gp.len()
            )));
        }
        Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    });
    let mut a = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    Ok(a)
}

/// Hessian by central differences of an analytic gradient: row `i` is
/// `[g(x + h e_i) - g(x - h e_i)] / 2h`.
pub fn finite_difference_hessian<G>(gradient: G, x: &[f64], options: &HessianOptions) -> Result<HessianEstimate>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if !(options.step > 0.0 && options.step.is_finite()) {
        return Err(Error::Config(format!("Hessian step must be positive, got {}", options.step)));
    }
    let coarse = central_rows(&gradient, x, options.step)?;
    let a = if options.richardson {
        let fine = central_rows(&gradient, x, options.step / 2.0)?;
        (fine * 4.0 - coarse) / 3.0
    } else {
        coarse
    };
    let asymmetry = if a.is_empty() { 0.0 } else { (&a - a.transpose()).amax() };
    let matrix = (&a + a.transpose()) * 0.5;
    Ok(HessianEstimate { matrix, asymmetry })
}

/// Energy Hessian of an ansatz at its current parameters.
pub fn exact_hessian(
    ansatz: &AnsatzState,
    hamiltonian: &PauliSum,
    options: &HessianOptions,
) -> Result<HessianEstimate> {
    let gradient = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(energy_and_gradient_uncharged(&ansatz.with_parameters(x)?, hamiltonian)?.1)
    };
    finite_difference_hessian(gradient, &ansatz.parameters(), options)
}

/// Charges the shadow ledger for one Hessian of dimension `n`.
fn charge_hessian(shadow: &mut CostLedger, n: usize, options: &HessianOptions) {
    for _ in 0..options.gradient_calls(n) {
        shadow.charge_energy();
        shadow.charge_gradient_components(n);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonDirection {
    pub direction: Vec<f64>,
    /// False when the Hessian is not positive definite; the direction then
    /// comes from a pseudo-inverse solve.
    pub positive_definite: bool,
}

/// Solves `hessian p = -grad`, by Cholesky when possible and otherwise by
/// the SVD pseudo-inverse.
pub fn newton_direction(grad: &[f64], hessian: &DMatrix<f64>) -> Result<NewtonDirection> {
    let n = grad.len();
    if hessian.nrows() != n || hessian.ncols() != n {
        return Err(Error::Dimension(format!(
            "Hessian {}x{} for a gradient of length {n}",
            hessian.nrows(),
            hessian.ncols()
        )));
    }
    let rhs = -DVector::from_column_slice(grad);
    if let Some(chol) = hessian.clone().cholesky() {
        return Ok(NewtonDirection {
            direction: chol.solve(&rhs).iter().copied().collect(),
            positive_definite: true,
        });
    }
    let svd = hessian.clone().svd(true, true);
    let cutoff = SINGULAR_RATIO * svd.singular_values.max();
    let p = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(NewtonDirection {
        direction: p.iter().copied().collect(),
        positive_definite: false,
    })
}

/// Inverse of a symmetric matrix, or `None` when it is numerically singular.
pub fn symmetric_inverse(matrix: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if matrix.is_empty() {
        return Some(matrix.clone());
    }
    let eig = matrix.clone().symmetric_eigen();
    let largest = eig.eigenvalues.amax();
    if largest == 0.0 || eig.eigenvalues.iter().any(|l| l.abs() <= SINGULAR_RATIO * largest) {
        return None;
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / l);
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose())
}

/// `||a - b||_F`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "cannot compare {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok((a - b).norm())
}

/// Successive error ratios `||x_{k+1} - x*|| / ||x_k - x*||`; `None` where
/// the denominator vanishes.
pub fn error_ratios(iterates: &[Vec<f64>], solution: &[f64]) -> Vec<Option<f64>> {
    let errors: Vec<f64> = iterates
        .iter()
        .map(|x| x.iter().zip(solution).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    errors
        .windows(2)
        .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
        .collect()
}

/// `||(B - exact) p|| / ||p||`.
pub fn superlinear_marker(b: &DMatrix<f64>, exact: &DMatrix<f64>, p: &[f64]) -> f64 {
    let p = DVector::from_column_slice(p);
    ((b - exact) * &p).norm() / p.norm()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub alpha: Option<f64>,
    /// `||x_{k+1} - x*|| / ||x_k - x*||`.
    pub error_ratio: Option<f64>,
    /// `||p_k - p_k^Newton||`, with both unit-normalized when requested.
    pub newton_distance: Option<f64>,
    pub newton_positive_definite: Option<bool>,
    /// `||(B_k - H(x*)) p_k|| / ||p_k||` with `B_k = H_k^{-1}`.
    pub superlinear_marker: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// False when fewer than three iterates were recorded.
    pub sufficient: bool,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// Rate diagnostics for one optimization. The final iterate stands in for
/// `x*`; `hessian_at` supplies exact Hessians at `x*` and every iterate.
pub fn convergence_report(
    history: &[IterateRecord],
    hessian_at: &mut dyn FnMut(&[f64]) -> Result<DMatrix<f64>>,
    normalized_newton: bool,
) -> Result<ConvergenceReport> {
    let Some(last) = history.last() else {
        return Ok(ConvergenceReport {
            rows: Vec::new(),
            sufficient: false,
        });
    };
    let solution = &last.x;
    let iterates: Vec<Vec<f64>> = history.iter().map(|r| r.x.clone()).collect();
    let ratios = error_ratios(&iterates, solution);
    let at_solution = hessian_at(solution)?;
    let mut rows = Vec::with_capacity(history.len());
    for (k, rec) in history.iter().enumerate() {
        let mut row = ConvergenceRow {
            k,
            alpha: rec.alpha,
            error_ratio: ratios.get(k).copied().flatten(),
            newton_distance: None,
            newton_positive_definite: None,
            superlinear_marker: None,
        };
        if let Some(p) = &rec.direction {
            let newton = newton_direction(&rec.grad, &hessian_at(&rec.x)?)?;
            let (a, b) = if normalized_newton {
                (unit(p), unit(&newton.direction))
            } else {
                (p.clone(), newton.direction)
            };
            row.newton_distance = Some(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
            row.newton_positive_definite = Some(newton.positive_definite);
            let b_k = symmetric_inverse(&rec.h).ok_or_else(|| {
                Error::Dimension(format!("inverse Hessian approximation at iterate {k} is singular"))
            })?;
            row.superlinear_marker = Some(superlinear_marker(&b_k, &at_solution, p));
        }
        rows.push(row);
    }
    Ok(ConvergenceReport {
        rows,
        sufficient: history.len() >= 3,
    })
}

/// Ansatz made of the first `params.len()` generators of a run.
pub fn ansatz_prefix(result: &AdaptResult, params: &[f64]) -> Result<AnsatzState> {
    let full = &result.ansatz;
    if params.len() > full.len() {
        return Err(Error::IndexOutOfRange {
            index: params.len(),
            len: full.len(),
        });
    }
    let mut a = AnsatzState::new(full.n_qubits(), full.reference())?;
    for (g, theta) in full.generators().zip(params) {
        a.push(g.clone(), *theta)?;
    }
    Ok(a)
}

/// Convergence report for the optimization at ADAPT iteration `n`; the run
/// must have recorded optimizer histories.
pub fn adapt_convergence_report(
    problem: &Problem,
    result: &AdaptResult,
    n: usize,
    options: &HessianOptions,
    normalized_newton: bool,
    shadow: &mut CostLedger,
) -> Result<ConvergenceReport> {
    let record = result
        .optimizations
        .iter()
        .find(|o| o.n == n)
        .ok_or(Error::IndexOutOfRange {
            index: n,
            len: result.optimizations.len(),
        })?;
    if record.result.history.is_empty() {
        return Err(Error::Config("optimizer history was not recorded".into()));
    }
    let dim = record.x0.len();
    let template = ansatz_prefix(result, &record.x0)?;
    let mut hessian_at = |x: &[f64]| -> Result<DMatrix<f64>> {
        charge_hessian(shadow, dim, options);
        Ok(exact_hessian(&template.with_parameters(x)?, &problem.hamiltonian, options)?.matrix)
    };
    convergence_report(&record.result.history, &mut hessian_at, normalized_newton)
}

/// One ADAPT iteration of the paired inverse-Hessian comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HessianDistanceRow {
    pub n: usize,
    /// `||H_0^canonical - H_0^exact||_F`, where `H_0^canonical = I`.
    pub canonical_initial: f64,
    /// `||H_0^recycled - H_0^exact||_F`.
    pub recycled_initial: f64,
    /// `||H_0^exact - H_final^exact||_F`.
    pub exact_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub n: usize,
    pub mode: Mode,
    /// `|H_0^exact - H_0^opt|` element-wise.
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianDistanceSeries {
    pub rows: Vec<HessianDistanceRow>,
    /// Iterations skipped because an exact Hessian was singular.
    pub excluded: Vec<usize>,
    pub heatmaps: Vec<Heatmap>,
}

/// Compares each mode's initial inverse Hessian with the exact one.
///
/// Both modes are measured against one exact matrix per iteration, taken at
/// the recycled run's starting point, so that the difference matrices differ
/// only through the approximations.
pub fn hessian_distance_series(
    problem: &Problem,
    canonical: &AdaptResult,
    recycled: &AdaptResult,
    options: &HessianOptions,
    heatmap_iterations: &[usize],
    shadow: &mut CostLedger,
) -> Result<HessianDistanceSeries> {
    if canonical.mode != Mode::Canonical || recycled.mode != Mode::Recycling {
        return Err(Error::Config("expected a canonical and a recycling run".into()));
    }
    let count = canonical.optimizations.len().min(recycled.optimizations.len());
    let per_iteration = exec::map_indexed(count, |i| -> Result<Option<(HessianDistanceRow, DMatrix<f64>)>> {
        let rec = &recycled.optimizations[i];
        let can = &canonical.optimizations[i];
        let start = ansatz_prefix(recycled, &rec.x0)?;
        let end = start.with_parameters(&rec.result.x)?;
        let h_start = exact_hessian(&start, &problem.hamiltonian, options)?.matrix;
        let h_end = exact_hessian(&end, &problem.hamiltonian, options)?.matrix;
        let (Some(inv_start), Some(inv_end)) = (symmetric_inverse(&h_start), symmetric_inverse(&h_end)) else {
            log::warn!("ADAPT iteration {}: exact Hessian is singular, excluded", rec.n);
            return Ok(None);
        };
        let row = HessianDistanceRow {
            n: rec.n,
            canonical_initial: frobenius_distance(can.result.h0.matrix(), &inv_start)?,
            recycled_initial: frobenius_distance(rec.result.h0.matrix(), &inv_start)?,
            exact_drift: frobenius_distance(&inv_start, &inv_end)?,
        };
        Ok(Some((row, inv_start)))
    });
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut heatmaps = Vec::new();
    for (i, item) in per_iteration.into_iter().enumerate() {
        let dim = recycled.optimizations[i].x0.len();
        charge_hessian(shadow, dim, options);
        charge_hessian(shadow, dim, options);
        match item? {
            None => excluded.push(recycled.optimizations[i].n),
            Some((row, exact)) => {
                if heatmap_iterations.contains(&row.n) {
                    for (mode, run) in [(Mode::Canonical, canonical), (Mode::Recycling, recycled)] {
                        let h0 = run.optimizations[i].result.h0.matrix();
                        heatmaps.push(Heatmap {
                            n: row.n,
                            mode,
                            matrix: (&exact - h0).abs(),
                        });
                    }
                }
                rows.push(row);
            }
        }
    }
    Ok(HessianDistanceSeries {
        rows,
        excluded,
        heatmaps,
    })
}
