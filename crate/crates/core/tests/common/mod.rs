//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use adapt_core::optimizer::{LineSearchOptions, OptimizerResult};
use adapt_core::simulator::AnsatzState;
use adapt_core::PauliSum;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

pub fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

/// Dense matrix of a Pauli sum in the simulator's basis (qubit 0 is the
/// least significant bit).
pub fn dense(op: &PauliSum) -> DMatrix<Complex64> {
    let d = 1usize << op.n_qubits();
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d {
        for (p, c) in op.iter() {
            let (phase, row) = p.apply_to_basis(col);
            m[(row, col)] += c * phase;
        }
    }
    m
}

/// `prod_k exp(theta_k A_k) |ref>` by dense matrix exponentials.
pub fn dense_ansatz_state(ansatz: &AnsatzState) -> DVector<Complex64> {
    let d = 1usize << ansatz.n_qubits();
    let mut psi = DVector::zeros(d);
    psi[ansatz.reference()] = Complex64::new(1.0, 0.0);
    for (g, theta) in ansatz.generators().zip(ansatz.parameters()) {
        let a = dense(g.sum()) * Complex64::new(theta, 0.0);
        psi = a.exp() * psi;
    }
    psi
}

pub fn fidelity(a: &[Complex64], b: &DVector<Complex64>) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    overlap.norm_sqr()
}

/// Largest `||H_{k+1} y_k - s_k|| / max(1, ||s_k||)` over applied updates.
pub fn max_secant_residual(result: &OptimizerResult) -> f64 {
    let h = &result.history;
    let mut worst: f64 = 0.0;
    for k in 0..h.len().saturating_sub(1) {
        let skipped = result.trace.get(k + 1).map_or(true, |t| t.update_skipped);
        if skipped || h[k + 1].h == h[k].h {
            continue;
        }
        let s = DVector::from_iterator(h[k].x.len(), h[k + 1].x.iter().zip(&h[k].x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(s.len(), h[k + 1].grad.iter().zip(&h[k].grad).map(|(a, b)| a - b));
        let r = (&h[k + 1].h * y - &s).norm() / s.norm().max(1.0);
        worst = worst.max(r);
    }
    worst
}

/// Smallest eigenvalue over every recorded inverse Hessian, including `H_0`
/// and the returned matrix.
pub fn min_inverse_hessian_eigenvalue(result: &OptimizerResult) -> f64 {
    let mut mats: Vec<&DMatrix<f64>> = result.history.iter().map(|r| &r.h).collect();
    mats.push(result.h.matrix());
    mats.push(result.h0.matrix());
    mats.iter()
        .map(|m| (*m).clone().symmetric_eigen().eigenvalues.min())
        .fold(f64::INFINITY, f64::min)
}

/// Number of accepted steps violating the Wolfe conditions. `f` values come
/// from the trace, which is aligned with the history for runs whose line
/// searches all succeeded.
pub fn wolfe_violations(result: &OptimizerResult, ls: &LineSearchOptions) -> usize {
    assert!(!result.line_search_failed, "audit needs a run without failed searches");
    let h = &result.history;
    let mut bad = 0;
    for k in 0..h.len().saturating_sub(1) {
        let (Some(p), Some(alpha)) = (&h[k].direction, h[k].alpha) else {
            continue;
        };
        let dot = |g: &[f64]| g.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        let slope0 = dot(&h[k].grad);
        let slope = dot(&h[k + 1].grad);
        let (f0, f1) = (result.trace[k].f, result.trace[k + 1].f);
        let armijo = f1 <= f0 + ls.c1 * alpha * slope0 + 1e-12 * f0.abs().max(1.0);
        let curvature = if ls.strong {
            slope.abs() <= ls.c2 * slope0.abs()
        } else {
            slope >= ls.c2 * slope0
        };
        if !(slope0 < 0.0 && armijo && curvature) {
            bad += 1;
        }
    }
    bad
}
