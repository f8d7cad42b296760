//! ADAPT-VQE with quasi-Newton Hessian recycling on a state-vector simulator.

pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod exec;
pub mod io;
pub mod optimizer;
pub mod pauli;
pub mod pools;
pub mod simulator;

pub use driver::{run_adapt, AdaptOptions, AdaptResult, CostLedger, Mode, Problem};
pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString, PauliSum};
pub use pools::{OperatorPool, PoolKind};
