mod common;

use adapt_core::diagnostics::{hessian_distance_series, HessianOptions};
use adapt_core::io::load_hamiltonian;
use adapt_core::pools::{build_qe_pool, nearest_neighbor_pool, OperatorPool, QePoolOptions};
use adapt_core::simulator::prepare;
use adapt_core::{run_adapt, AdaptOptions, AdaptResult, CostLedger, Mode, Problem};
use common::{dense_ansatz_state, fidelity, fixture};

fn h2() -> (Problem, OperatorPool) {
    let h = load_hamiltonian(fixture("h2_sto3g_0p7414.json")).unwrap();
    (h.problem(), build_qe_pool(4, 2, QePoolOptions::default()).unwrap())
}

fn tfim6() -> (Problem, OperatorPool) {
    let h = load_hamiltonian(fixture("tfim_n6_j1_h0p5.json")).unwrap();
    (h.problem(), nearest_neighbor_pool(6).unwrap())
}

/// One energy at the reference plus the optimizers' own counts; pool
/// screening at 8 units per qubit.
fn audit(result: &AdaptResult, n_qubits: usize) {
    let from_trace: u64 = 1 + result
        .optimizations
        .iter()
        .map(|o| o.result.function_evaluations())
        .sum::<u64>();
    assert_eq!(result.ledger.function_evaluations(), from_trace);
    assert_eq!(result.trace.last().unwrap().fevals_cumulative, from_trace);
    let rate = 8 * n_qubits as u64;
    for it in result.ledger.iterations().iter().skip(1) {
        assert_eq!(it.pool_gradient_units, rate, "iteration {}", it.n);
    }
    let screenings = result.ledger.iterations().len() as u64 - 1;
    assert_eq!(result.ledger.pool_gradient_units(), rate * screenings);
    let per_iteration: u64 = result.ledger.iterations().iter().map(|i| i.function_evaluations).sum();
    assert_eq!(per_iteration, result.ledger.function_evaluations());
}

#[test]
fn ledgers_reproduce_optimizer_traces() {
    for (problem, pool) in [h2(), tfim6()] {
        for mode in [Mode::Canonical, Mode::Recycling] {
            let r = run_adapt(&problem, &pool, mode, &AdaptOptions::default()).unwrap();
            audit(&r, problem.n_qubits());
        }
    }
}

#[test]
fn h2_modes_agree() {
    let (problem, pool) = h2();
    let exact = problem.exact_energy.unwrap();
    let c = run_adapt(&problem, &pool, Mode::Canonical, &AdaptOptions::default()).unwrap();
    let r = run_adapt(&problem, &pool, Mode::Recycling, &AdaptOptions::default()).unwrap();
    assert!(c.converged() && r.converged());
    assert_eq!(c.selected(), r.selected());
    assert!((c.energy - exact).abs() < 1e-9);
    assert!((r.energy - exact).abs() < 1e-9);
    assert!(r.function_evaluations() < c.function_evaluations());
}

#[test]
fn runs_are_deterministic() {
    let (problem, pool) = tfim6();
    let options = AdaptOptions {
        max_iterations: 8,
        ..AdaptOptions::default()
    };
    for mode in [Mode::Canonical, Mode::Recycling] {
        let a = run_adapt(&problem, &pool, mode, &options).unwrap();
        let b = run_adapt(&problem, &pool, mode, &options).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(format!("{:?}", a.trace), format!("{:?}", b.trace));
    }
}

#[test]
fn prepared_states_match_dense_exponentials() {
    for (problem, pool) in [h2(), tfim6()] {
        let r = run_adapt(&problem, &pool, Mode::Recycling, &AdaptOptions::default()).unwrap();
        let psi = prepare(&r.ansatz).unwrap();
        let f = fidelity(psi.amplitudes(), &dense_ansatz_state(&r.ansatz));
        assert!(f >= 1.0 - 1e-10, "fidelity {f}");
    }
}

#[test]
fn hessian_distances_on_weakly_correlated_chain() {
    let (problem, pool) = tfim6();
    let mut options = AdaptOptions::default();
    options.optimizer.record_history = true;
    let c = run_adapt(&problem, &pool, Mode::Canonical, &options).unwrap();
    let r = run_adapt(&problem, &pool, Mode::Recycling, &options).unwrap();
    let all: Vec<usize> = (1..=r.optimizations.len()).collect();
    let mut shadow = CostLedger::new();
    let s = hessian_distance_series(&problem, &c, &r, &HessianOptions::default(), &all, &mut shadow).unwrap();

    // One parameter, no history: both modes start from the 1x1 identity.
    let first = &s.rows[0];
    assert_eq!(first.n, 1);
    assert_eq!(first.canonical_initial, first.recycled_initial);

    let late: Vec<_> = s.rows.iter().filter(|row| row.n > 3).collect();
    let closer = late.iter().filter(|row| row.recycled_initial < row.canonical_initial).count();
    assert!(closer * 10 >= late.len() * 9, "{closer} of {}", late.len());

    for pair in s.heatmaps.chunks(2) {
        let (a, b) = (&pair[0].matrix, &pair[1].matrix);
        assert_eq!(pair[0].n, pair[1].n);
        let last = a.nrows() - 1;
        assert_eq!(a.row(last), b.row(last), "iteration {}", pair[0].n);
        assert_eq!(a.column(last), b.column(last), "iteration {}", pair[0].n);
    }
    // Diagnostics never touch the run ledgers.
    assert!(shadow.function_evaluations() > 0);
    audit(&r, problem.n_qubits());
}
