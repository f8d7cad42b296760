//! The ADAPT-VQE outer loop: screen the pool, grow the ansatz by the operator
//! with the largest gradient magnitude, re-optimize, repeat.

mod ledger;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::optimizer::{
    minimize_canonical, minimize_recycled, InverseHessian, Objective, OptimizerOptions,
    OptimizerResult, RecycledStart,
};
use crate::pauli::PauliSum;
use crate::pools::OperatorPool;
use crate::simulator::{self, expectation_raw, AnsatzState, Generator, StateVector};

pub use ledger::{CostLedger, IterationCost};

/// Whether each optimization starts from the identity or from the previous
/// optimization's inverse Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Canonical,
    Recycling,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Canonical => write!(f, "canonical"),
            Mode::Recycling => write!(f, "recycling"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Mode::Canonical),
            "recycling" | "recycled" => Ok(Mode::Recycling),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// Hamiltonian plus reference determinant.
#[derive(Clone, Debug)]
pub struct Problem {
    pub hamiltonian: PauliSum,
    /// Basis index of the reference state (bit `i` = qubit `i`).
    pub reference: usize,
    pub exact_energy: Option<f64>,
}

impl Problem {
    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.n_qubits()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptOptions {
    /// Pool-gradient norm threshold.
    pub epsilon: f64,
    /// Maximum number of ADAPT iterations.
    pub max_iterations: usize,
    pub optimizer: OptimizerOptions,
    /// Cost of one pool screening in energy-evaluation units; `None` means
    /// `8 * n_qubits`.
    pub pool_gradient_rate: Option<u64>,
    /// Consecutive optimizations whose first line search fails before the
    /// run is abandoned.
    pub stall_limit: usize,
    /// See [`select_operator`].
    pub tie_tolerance: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 100,
            optimizer: OptimizerOptions::default(),
            pool_gradient_rate: None,
            stall_limit: 3,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

/// Precomputed commutators `[H, A_k]` for repeated pool screening.
#[derive(Clone, Debug)]
pub struct PoolGradientEvaluator {
    commutators: Vec<PauliSum>,
    rate: u64,
}

impl PoolGradientEvaluator {
    pub fn new(hamiltonian: &PauliSum, pool: &OperatorPool, rate: Option<u64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let commutators = exec::map_indexed(pool.len(), |k| hamiltonian.commutator(&pool.operators()[k]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            commutators,
            rate: rate.unwrap_or(8 * hamiltonian.n_qubits() as u64),
        })
    }

    pub fn commutators(&self) -> &[PauliSum] {
        &self.commutators
    }

    /// `g_k = <psi|[H, A_k]|psi>` for every pool operator.
    pub fn evaluate(&self, state: &StateVector, ledger: &mut CostLedger) -> Result<Vec<f64>> {
        if let Some(c) = self.commutators.first() {
            if c.n_qubits() != state.n_qubits() {
                return Err(Error::QubitMismatch {
                    left: c.n_qubits(),
                    right: state.n_qubits(),
                });
            }
        }
        let psi = state.amplitudes();
        let grads = exec::map_indexed(self.commutators.len(), |k| {
            expectation_raw(&self.commutators[k], psi)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        ledger.charge_pool_gradients(self.rate);
        Ok(grads)
    }
}

/// One-shot pool screening at the default `8N` rate.
pub fn pool_gradients(
    state: &StateVector,
    pool: &OperatorPool,
    hamiltonian: &PauliSum,
    ledger: &mut CostLedger,
) -> Result<Vec<f64>> {
    PoolGradientEvaluator::new(hamiltonian, pool, None)?.evaluate(state, ledger)
}

/// Gradient magnitudes this close to the largest are treated as tied.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-6;

/// Index of the largest `|g_k|` and the Euclidean norm of all gradients.
///
/// Magnitudes within `tie_tolerance` of the largest count as tied and the
/// lowest index among them wins, so symmetry-degenerate operators are chosen
/// the same way whatever optimizer noise sits on the gradients.
pub fn select_operator(gradients: &[f64], tie_tolerance: f64) -> Result<(usize, f64)> {
    let largest = gradients
        .iter()
        .map(|g| g.abs())
        .reduce(f64::max)
        .ok_or(Error::EmptyPool)?;
    let best = gradients
        .iter()
        .position(|g| g.abs() >= largest - tie_tolerance)
        .unwrap_or(0);
    let norm = gradients.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok((best, norm))
}

/// Energy of a fixed-structure ansatz as a function of its parameters,
/// charging the ledger through the simulator.
pub struct AnsatzObjective<'a> {
    ansatz: AnsatzState,
    hamiltonian: &'a PauliSum,
    ledger: &'a mut CostLedger,
}

impl<'a> AnsatzObjective<'a> {
    pub fn new(ansatz: AnsatzState, hamiltonian: &'a PauliSum, ledger: &'a mut CostLedger) -> Self {
        Self {
            ansatz,
            hamiltonian,
            ledger,
        }
    }
}

impl Objective for AnsatzObjective<'_> {
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.ansatz.set_parameters(x)?;
        simulator::energy_and_gradient(&self.ansatz, self.hamiltonian, self.ledger)
    }

    fn partial(&mut self, x: &[f64], index: usize) -> Result<f64> {
        self.ansatz.set_parameters(x)?;
        simulator::partial_derivative(&self.ansatz, self.hamiltonian, index, self.ledger)
    }
}

/// One row per ADAPT iteration; row `n = 0` is the reference state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptRecord {
    pub n: usize,
    pub selected_index: Option<usize>,
    pub selected_label: String,
    pub selected_gradient: f64,
    pub pool_grad_norm: f64,
    pub energy: f64,
    pub error: Option<f64>,
    pub line_searches: usize,
    pub fevals_cumulative: u64,
}

/// The optimization run at one ADAPT iteration.
#[derive(Clone, Debug)]
pub struct OptimizationRecord {
    pub n: usize,
    pub x0: Vec<f64>,
    pub result: OptimizerResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct AdaptResult {
    pub mode: Mode,
    pub ansatz: AnsatzState,
    pub x: Vec<f64>,
    pub energy: f64,
    pub termination: Termination,
    pub trace: Vec<AdaptRecord>,
    pub optimizations: Vec<OptimizationRecord>,
    pub ledger: CostLedger,
    /// Pool-gradient norm at the last screening.
    pub final_pool_grad_norm: Option<f64>,
}

impl AdaptResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn selected(&self) -> Vec<usize> {
        self.trace.iter().filter_map(|r| r.selected_index).collect()
    }

    pub fn function_evaluations(&self) -> u64 {
        self.ledger.function_evaluations()
    }
}

/// Runs ADAPT-VQE from the reference state.
pub fn run_adapt(
    problem: &Problem,
    pool: &OperatorPool,
    mode: Mode,
    options: &AdaptOptions,
) -> Result<AdaptResult> {
    if options.epsilon <= 0.0 || options.optimizer.tolerance <= 0.0 || options.tie_tolerance < 0.0 {
        return Err(Error::Config("thresholds must be positive".into()));
    }
    if options.optimizer.max_iterations == 0 {
        return Err(Error::Config("optimizer iteration limit must be at least 1".into()));
    }
    if pool.n_qubits().is_some_and(|n| n != problem.n_qubits()) {
        return Err(Error::QubitMismatch {
            left: problem.n_qubits(),
            right: pool.n_qubits().unwrap_or(0),
        });
    }
    let hamiltonian = &problem.hamiltonian;
    let screen = PoolGradientEvaluator::new(hamiltonian, pool, options.pool_gradient_rate)?;
    let mut ledger = CostLedger::new();
    let mut ansatz = AnsatzState::new(problem.n_qubits(), problem.reference)?;
    let mut energy = simulator::energy(&ansatz, hamiltonian, &mut ledger)?;
    ledger.close_iteration(0);
    let error_of = |e: f64| problem.exact_energy.map(|exact| e - exact);

    let mut trace = vec![AdaptRecord {
        n: 0,
        selected_index: None,
        selected_label: String::new(),
        selected_gradient: 0.0,
        pool_grad_norm: f64::NAN,
        energy,
        error: error_of(energy),
        line_searches: 0,
        fevals_cumulative: ledger.function_evaluations(),
    }];
    let mut optimizations = Vec::new();
    let mut x: Vec<f64> = Vec::new();
    let mut grad: Vec<f64> = Vec::new();
    let mut h = InverseHessian::identity(0);
    let mut termination = Termination::MaxIterations;
    let mut final_norm = None;
    let mut stalls = 0;

    for n in 1..=options.max_iterations {
        let state = simulator::prepare(&ansatz).map_err(|e| e.in_adapt(n))?;
        let grads = screen.evaluate(&state, &mut ledger).map_err(|e| e.in_adapt(n))?;
        let (selected, norm) = select_operator(&grads, options.tie_tolerance)?;
        final_norm = Some(norm);
        if norm <= options.epsilon {
            ledger.close_iteration(n);
            termination = Termination::Converged;
            break;
        }

        ansatz
            .push(Generator::new(pool.operators()[selected].clone())?, 0.0)
            .map_err(|e| e.in_adapt(n))?;
        let mut x0 = x.clone();
        x0.push(0.0);
        let result = {
            let mut objective = AnsatzObjective::new(ansatz.clone(), hamiltonian, &mut ledger);
            match mode {
                Mode::Canonical => minimize_canonical(&mut objective, &x0, &options.optimizer),
                Mode::Recycling => minimize_recycled(
                    &mut objective,
                    RecycledStart {
                        x: &x,
                        f: energy,
                        grad: &grad,
                        h: &h,
                    },
                    1,
                    &options.optimizer,
                ),
            }
            .map_err(|e| e.in_adapt(n))?
        };
        if result.line_search_failed {
            log::warn!(
                "{mode} ADAPT iteration {n}: line search failed after {} line searches",
                result.line_searches
            );
        }
        stalls = if result.line_search_failed && result.line_searches == 1 {
            stalls + 1
        } else {
            0
        };

        x = result.x.clone();
        grad = result.grad.clone();
        h = result.h.clone();
        energy = result.f;
        ansatz.set_parameters(&x)?;
        ledger.close_iteration(n);
        trace.push(AdaptRecord {
            n,
            selected_index: Some(selected),
            selected_label: pool.labels()[selected].clone(),
            selected_gradient: grads[selected],
            pool_grad_norm: norm,
            energy,
            error: error_of(energy),
            line_searches: result.line_searches,
            fevals_cumulative: ledger.function_evaluations(),
        });
        optimizations.push(OptimizationRecord { n, x0, result });

        if stalls >= options.stall_limit {
            log::warn!("{mode}: {stalls} consecutive optimizations stalled at their first line search");
            termination = Termination::Stalled;
            break;
        }
    }

    Ok(AdaptResult {
        mode,
        ansatz,
        x,
        energy,
        termination,
        trace,
        optimizations,
        ledger,
        final_pool_grad_norm: final_norm,
    })
}
