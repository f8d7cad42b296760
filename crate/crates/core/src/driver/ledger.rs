use serde::{Deserialize, Serialize};

/// Measurement-cost counters in units of one energy evaluation.
///
/// An energy costs 1, each gradient component costs 2 (two shifted energy
/// measurements), and pool-gradient screening is charged at a configured rate
/// per ADAPT iteration. The simulator's own shortcuts never change what is
/// charged here.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    function_evaluations: u64,
    energy_evaluations: u64,
    gradient_component_evaluations: u64,
    pool_gradient_units: u64,
    iterations: Vec<IterationCost>,
    #[serde(skip)]
    mark: (u64, u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCost {
    pub n: usize,
    pub function_evaluations: u64,
    pub pool_gradient_units: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_energy(&mut self) {
        self.energy_evaluations += 1;
        self.function_evaluations += 1;
    }

    pub fn charge_gradient_components(&mut self, components: usize) {
        self.gradient_component_evaluations += components as u64;
        self.function_evaluations += 2 * components as u64;
    }

    pub fn charge_pool_gradients(&mut self, units: u64) {
        self.pool_gradient_units += units;
    }

    /// Closes the books for ADAPT iteration `n`, recording what was charged
    /// since the previous call.
    pub fn close_iteration(&mut self, n: usize) {
        let (f0, p0) = self.mark;
        self.iterations.push(IterationCost {
            n,
            function_evaluations: self.function_evaluations - f0,
            pool_gradient_units: self.pool_gradient_units - p0,
        });
        self.mark = (self.function_evaluations, self.pool_gradient_units);
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.function_evaluations += other.function_evaluations;
        self.energy_evaluations += other.energy_evaluations;
        self.gradient_component_evaluations += other.gradient_component_evaluations;
        self.pool_gradient_units += other.pool_gradient_units;
    }

    pub fn function_evaluations(&self) -> u64 {
        self.function_evaluations
    }

    pub fn energy_evaluations(&self) -> u64 {
        self.energy_evaluations
    }

    pub fn gradient_component_evaluations(&self) -> u64 {
        self.gradient_component_evaluations
    }

    pub fn pool_gradient_units(&self) -> u64 {
        self.pool_gradient_units
    }

    pub fn iterations(&self) -> &[IterationCost] {
        &self.iterations
    }
}
