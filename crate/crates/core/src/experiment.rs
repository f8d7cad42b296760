//! Paired-mode experiment orchestration and file output.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{adapt_convergence_report, hessian_distance_series, ConvergenceReport, HessianOptions};
use crate::driver::{run_adapt, AdaptOptions, AdaptResult, CostLedger, Mode, Problem, Termination};
use crate::error::{Error, Result};
use crate::exec;
use crate::io::{builtin_model, load_hamiltonian, LoadedHamiltonian, ModelSpec};
use crate::optimizer::{LineSearchOptions, OptimizerOptions};
use crate::pools::{build_qe_pool, build_qubit_pool, nearest_neighbor_pool, OperatorPool, QePoolOptions};

/// Name of the lock file held in the output directory while a run writes.
pub const LOCK_FILE: &str = "adapt.lock";

/// Largest disagreement accepted between a recorded and recomputed exact
/// energy under `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianSource {
    Path(PathBuf),
    Builtin(ModelSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolChoice {
    Qe,
    Qubit,
    NearestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    /// ADAPT iterations whose inverse-Hessian difference matrices are exported.
    pub heatmap_iterations: Vec<usize>,
    /// ADAPT iterations whose optimizer convergence series are exported;
    /// empty means the last optimization of each run.
    pub convergence_iterations: Vec<usize>,
    pub richardson: bool,
    pub normalized_newton: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            heatmap_iterations: Vec::new(),
            convergence_iterations: Vec::new(),
            richardson: false,
            normalized_newton: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianSource,
    /// Defaults to the QE pool for files and the nearest-neighbor qubit pool
    /// for lattice models.
    #[serde(default)]
    pub pool: Option<PoolChoice>,
    #[serde(default = "default_true")]
    pub qe_singles: bool,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// ADAPT pool-gradient norm threshold.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Maximum number of ADAPT iterations.
    #[serde(default = "default_max_adapt")]
    pub max_adapt_iterations: usize,
    /// Optimizer gradient-norm threshold.
    #[serde(default = "default_epsilon")]
    pub optimizer_tolerance: f64,
    /// Maximum number of line searches per optimization.
    #[serde(default = "default_max_optimizer")]
    pub optimizer_max_iterations: usize,
    #[serde(default)]
    pub strong_wolfe: bool,
    #[serde(default = "default_tie_tolerance")]
    pub tie_tolerance: f64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    pub output_dir: PathBuf,
    /// Reserved for randomized tooling; the core path is deterministic.
    #[serde(default)]
    pub seed: u64,
    /// Recompute the exact ground energy and compare with the metadata.
    #[serde(default)]
    pub verify: bool,
}

fn default_true() -> bool {
    true
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Canonical, Mode::Recycling]
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_max_adapt() -> usize {
    AdaptOptions::default().max_iterations
}

fn default_max_optimizer() -> usize {
    OptimizerOptions::default().max_iterations
}

fn default_tie_tolerance() -> f64 {
    AdaptOptions::default().tie_tolerance
}

impl ExperimentConfig {
    pub fn new(hamiltonian: HamiltonianSource, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            hamiltonian,
            pool: None,
            qe_singles: true,
            modes: default_modes(),
            epsilon: default_epsilon(),
            max_adapt_iterations: default_max_adapt(),
            optimizer_tolerance: default_epsilon(),
            optimizer_max_iterations: default_max_optimizer(),
            strong_wolfe: false,
            tie_tolerance: default_tie_tolerance(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: output_dir.into(),
            seed: 0,
            verify: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: format!("line {}, column {}: {e}", e.line(), e.column()),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// `max_adapt_iterations = 0` is accepted and yields the reference row only.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("optimizer_tolerance", self.optimizer_tolerance)?;
        positive("tie_tolerance", self.tie_tolerance)?;
        if self.optimizer_max_iterations == 0 {
            return Err(Error::Config("optimizer_max_iterations must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.modes.len() > 2 || (self.modes.len() == 2 && self.modes[0] == self.modes[1]) {
            return Err(Error::Config("modes must be distinct".into()));
        }
        Ok(())
    }

    pub fn adapt_options(&self) -> AdaptOptions {
        AdaptOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_adapt_iterations,
            optimizer: OptimizerOptions {
                tolerance: self.optimizer_tolerance,
                max_iterations: self.optimizer_max_iterations,
                line_search: LineSearchOptions {
                    strong: self.strong_wolfe,
                    ..LineSearchOptions::default()
                },
                record_history: self.diagnostics.enabled,
            },
            tie_tolerance: self.tie_tolerance,
            ..AdaptOptions::default()
        }
    }

    pub fn hessian_options(&self) -> HessianOptions {
        HessianOptions {
            richardson: self.diagnostics.richardson,
            ..HessianOptions::default()
        }
    }
}

/// Loads the Hamiltonian named by `source`, verifying its exact energy when
/// asked.
pub fn load_source(source: &HamiltonianSource, verify: bool) -> Result<LoadedHamiltonian> {
    let loaded = match source {
        HamiltonianSource::Path(p) => load_hamiltonian(p)?,
        HamiltonianSource::Builtin(spec) => builtin_model(spec, true)?,
    };
    if verify {
        let (computed, recorded) = loaded.verify()?;
        match recorded {
            Some(r) if (r - computed).abs() > VERIFY_TOLERANCE => {
                return Err(Error::Config(format!(
                    "recorded exact energy {r} disagrees with diagonalization {computed}"
                )))
            }
            Some(_) => log::info!("verified exact ground energy {computed}"),
            None => log::warn!("no recorded exact energy; diagonalization gives {computed}"),
        }
    }
    Ok(loaded)
}

pub fn build_pool(
    source: &HamiltonianSource,
    hamiltonian: &LoadedHamiltonian,
    choice: Option<PoolChoice>,
    qe_singles: bool,
) -> Result<OperatorPool> {
    let n = hamiltonian.hamiltonian.n_qubits();
    let choice = choice.unwrap_or(match source {
        HamiltonianSource::Path(_) => PoolChoice::Qe,
        HamiltonianSource::Builtin(_) => PoolChoice::NearestNeighbor,
    });
    let qe = || {
        let ne = hamiltonian
            .metadata
            .n_electrons
            .ok_or_else(|| Error::Config("the QE pool needs n_electrons in the metadata".into()))?;
        build_qe_pool(
            n,
            ne,
            QePoolOptions {
                include_singles: qe_singles,
                ..QePoolOptions::default()
            },
        )
    };
    match choice {
        PoolChoice::Qe => qe(),
        PoolChoice::Qubit => build_qubit_pool(&qe()?),
        PoolChoice::NearestNeighbor => nearest_neighbor_pool(n),
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirectoryLock {
    path: PathBuf,
}

impl DirectoryLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} exists; another run is writing to this directory",
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirectoryLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub final_energy: f64,
    pub error: Option<f64>,
    pub adapt_iterations: usize,
    pub ansatz_length: usize,
    pub termination: Termination,
    pub function_evaluations: u64,
    pub pool_gradient_units: u64,
    pub line_searches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fixture: String,
    pub n_qubits: usize,
    pub pool: String,
    pub pool_size: usize,
    pub exact_energy: Option<f64>,
    pub runs: Vec<ModeSummary>,
    /// Recycling over canonical function evaluations, when both ran.
    pub feval_ratio: Option<f64>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub results: Vec<AdaptResult>,
    pub problem: Problem,
    pub files: Vec<PathBuf>,
}

/// Runs every configured mode and writes traces, ledgers, diagnostics and
/// `summary.json` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let loaded = load_source(&config.hamiltonian, config.verify)?;
    let pool = build_pool(&config.hamiltonian, &loaded, config.pool, config.qe_singles)?;
    let problem = loaded.problem();
    let options = config.adapt_options();
    let lock = DirectoryLock::acquire(&config.output_dir)?;

    let results: Vec<AdaptResult> = match config.modes.as_slice() {
        [a, b] => {
            let (ra, rb) = exec::join(
                || run_adapt(&problem, &pool, *a, &options),
                || run_adapt(&problem, &pool, *b, &options),
            );
            vec![ra?, rb?]
        }
        modes => modes
            .iter()
            .map(|m| run_adapt(&problem, &pool, *m, &options))
            .collect::<Result<_>>()?,
    };

    let dir = &config.output_dir;
    let mut files = Vec::new();
    files.push(write_json(&dir.join("config.json"), config)?);
    for r in &results {
        files.push(write_json(&dir.join(format!("ledger_{}.json", r.mode)), &r.ledger)?);
    }
    for r in &results {
        files.push(write_adapt_trace(dir, r)?);
        files.push(write_opt_trace(dir, r)?);
    }

    let fixture = sanitize(&loaded.metadata.name);
    if config.diagnostics.enabled {
        files.extend(write_diagnostics(dir, &fixture, config, &problem, &results)?);
    }

    let summary = summarize(&fixture, &loaded, &pool, &results);
    files.push(write_json(&dir.join("summary.json"), &summary)?);
    drop(lock);

    Ok(ExperimentOutcome {
        summary,
        results,
        problem,
        files,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn summarize(fixture: &str, loaded: &LoadedHamiltonian, pool: &OperatorPool, results: &[AdaptResult]) -> Summary {
    let runs: Vec<ModeSummary> = results
        .iter()
        .map(|r| ModeSummary {
            mode: r.mode,
            final_energy: r.energy,
            error: loaded.metadata.exact_ground_energy.map(|e| r.energy - e),
            adapt_iterations: r.trace.len() - 1,
            ansatz_length: r.ansatz.len(),
            termination: r.termination,
            function_evaluations: r.function_evaluations(),
            pool_gradient_units: r.ledger.pool_gradient_units(),
            line_searches: r.trace.iter().map(|t| t.line_searches).sum(),
        })
        .collect();
    let fevals = |m: Mode| runs.iter().find(|r| r.mode == m).map(|r| r.function_evaluations as f64);
    let feval_ratio = match (fevals(Mode::Recycling), fevals(Mode::Canonical)) {
        (Some(r), Some(c)) if c > 0.0 => Some(r / c),
        _ => None,
    };
    Summary {
        fixture: fixture.to_string(),
        n_qubits: loaded.hamiltonian.n_qubits(),
        pool: pool.kind().to_string(),
        pool_size: pool.len(),
        exact_energy: loaded.metadata.exact_ground_energy,
        runs,
        feval_ratio,
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "fixture".into()
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct AdaptRow<'a> {
    n: usize,
    selected_label: &'a str,
    selected_gradient: Option<f64>,
    pool_grad_norm: Option<f64>,
    energy: f64,
    error: Option<f64>,
    line_searches: usize,
    fevals_cumulative: u64,
}

pub fn write_adapt_trace(dir: &Path, result: &AdaptResult) -> Result<PathBuf> {
    let path = dir.join(format!("adapt_trace_{}.csv", result.mode));
    let mut w = csv_writer(&path)?;
    for t in &result.trace {
        let row = AdaptRow {
            n: t.n,
            selected_label: &t.selected_label,
            selected_gradient: t.selected_index.map(|_| t.selected_gradient),
            pool_grad_norm: finite(t.pool_grad_norm),
            energy: t.energy,
            error: t.error,
            line_searches: t.line_searches,
            fevals_cumulative: t.fevals_cumulative,
        };
        w.serialize(row).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct OptRow {
    n: usize,
    k: usize,
    f: f64,
    grad_norm: f64,
    alpha: Option<f64>,
    energy_evals: usize,
    gradient_evals: usize,
    fevals_cumulative: u64,
    update_skipped: bool,
}

pub fn write_opt_trace(dir: &Path, result: &AdaptResult) -> Result<PathBuf> {
    let path = dir.join(format!("opt_trace_{}.csv", result.mode));
    let mut w = csv_writer(&path)?;
    if result.optimizations.is_empty() {
        w.write_record([
            "n",
            "k",
            "f",
            "grad_norm",
            "alpha",
            "energy_evals",
            "gradient_evals",
            "fevals_cumulative",
            "update_skipped",
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    for o in &result.optimizations {
        for t in &o.result.trace {
            let row = OptRow {
                n: o.n,
                k: t.k,
                f: t.f,
                grad_norm: t.grad_norm,
                alpha: t.alpha,
                energy_evals: t.energy_evals,
                gradient_evals: t.gradient_evals,
                fevals_cumulative: t.fevals_cumulative,
                update_skipped: t.update_skipped,
            };
            w.serialize(row).map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ConvergenceCsvRow {
    k: usize,
    alpha: Option<f64>,
    error_ratio: Option<f64>,
    newton_distance: Option<f64>,
    newton_positive_definite: Option<bool>,
    superlinear_marker: Option<f64>,
}

fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in &report.rows {
        w.serialize(ConvergenceCsvRow {
            k: r.k,
            alpha: r.alpha,
            error_ratio: r.error_ratio,
            newton_distance: r.newton_distance,
            newton_positive_definite: r.newton_positive_definite,
            superlinear_marker: r.superlinear_marker,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Hessian-distance series, heatmaps and convergence series. Their
/// evaluations go to `ledger_diagnostics.json`, never to the run ledgers.
fn write_diagnostics(
    dir: &Path,
    fixture: &str,
    config: &ExperimentConfig,
    problem: &Problem,
    results: &[AdaptResult],
) -> Result<Vec<PathBuf>> {
    let opts = config.hessian_options();
    let mut shadow = CostLedger::new();
    let mut files = Vec::new();
    let find = |m: Mode| results.iter().find(|r| r.mode == m);
    if let (Some(can), Some(rec)) = (find(Mode::Canonical), find(Mode::Recycling)) {
        let series = hessian_distance_series(problem, can, rec, &opts, &config.diagnostics.heatmap_iterations, &mut shadow)?;
        let path = dir.join(format!("hessdist_{fixture}.csv"));
        let mut w = csv_writer(&path)?;
        if series.rows.is_empty() {
            w.write_record(["n", "canonical_initial", "recycled_initial", "exact_drift"])
                .map_err(|e| csv_error(&path, e))?;
        }
        for row in &series.rows {
            w.serialize(row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
        for h in &series.heatmaps {
            let path = dir.join(format!("hm_{}_{}.csv", h.mode, h.n));
            write_matrix(&path, &h.matrix)?;
            files.push(path);
        }
        if !series.excluded.is_empty() {
            log::warn!("singular exact Hessians at ADAPT iterations {:?}", series.excluded);
        }
    } else {
        log::warn!("Hessian distances need both modes; skipped");
    }
    for r in results {
        let iterations: Vec<usize> = if config.diagnostics.convergence_iterations.is_empty() {
            r.optimizations.last().map(|o| o.n).into_iter().collect()
        } else {
            config.diagnostics.convergence_iterations.clone()
        };
        for n in iterations {
            if !r.optimizations.iter().any(|o| o.n == n) {
                log::warn!("{} run has no optimization at ADAPT iteration {n}", r.mode);
                continue;
            }
            let report = adapt_convergence_report(
                problem,
                r,
                n,
                &opts,
                config.diagnostics.normalized_newton,
                &mut shadow,
            )?;
            if !report.sufficient {
                log::warn!("{} ADAPT iteration {n}: fewer than 3 iterates", r.mode);
            }
            let path = dir.join(format!("conv_{}_{n}.csv", r.mode));
            write_convergence(&path, &report)?;
            files.push(path);
        }
    }
    files.push(write_json(&dir.join("ledger_diagnostics.json"), &shadow)?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::ModelKind;

    fn tfim(dir: &Path) -> ExperimentConfig {
        let spec = ModelSpec {
            kind: ModelKind::Tfim,
            n_qubits: 3,
            coupling: 1.0,
            field: 0.7,
        };
        ExperimentConfig::new(HamiltonianSource::Builtin(spec), dir)
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tfim(dir.path());
        assert!(c.validate().is_ok());
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        let mut c = tfim(dir.path());
        c.optimizer_max_iterations = 0;
        assert!(c.validate().is_err());
        let mut c = tfim(dir.path());
        c.modes = vec![Mode::Canonical, Mode::Canonical];
        assert!(c.validate().is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirectoryLock::acquire(dir.path()).unwrap();
        assert!(DirectoryLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirectoryLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn locked_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let _held = DirectoryLock::acquire(dir.path()).unwrap();
        assert!(run_experiment(&tfim(dir.path())).is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"hamiltonian": {"builtin": {"kind": "tfim", "n_qubits": 4, "coupling": 1.0, "field": 0.5}},
                "output_dir": "out"}"#,
        )
        .unwrap();
        assert_eq!(c.modes, default_modes());
        assert_eq!(c.epsilon, 1e-6);
        assert!(c.qe_singles);
        assert!(!c.diagnostics.enabled);
        let typo = r#"{"hamiltonian": {"path": "h.json"}, "output_dir": "o", "epsilom": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(typo).is_err());
    }

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("h2 sto-3g/0.74"), "h2_sto-3g_0.74");
        assert_eq!(sanitize(""), "fixture");
    }
}
