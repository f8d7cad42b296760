use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adapt_core::experiment::{
    build_pool, load_source, run_experiment, ExperimentConfig, HamiltonianSource, PoolChoice, Summary,
};
use adapt_core::io::{builtin_model, load_hamiltonian, pool_to_json, ModelKind, ModelSpec};
use adapt_core::pools::{build_qe_pool, build_qubit_pool, nearest_neighbor_pool, QePoolOptions};
use adapt_core::Mode;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adapt", version, about = "ADAPT-VQE with inverse-Hessian recycling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run canonical and/or recycling ADAPT and write traces, ledgers and a summary.
    Run(RunArgs),
    /// Export an operator pool as JSON.
    Pool(PoolArgs),
    /// Emit a built-in lattice Hamiltonian, or re-emit a file in canonical form.
    Model(ModelArgs),
    /// Recompute diagnostics for an existing run directory.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    Qe,
    Qubit,
    NearestNeighbor,
}

impl From<PoolArg> for PoolChoice {
    fn from(p: PoolArg) -> Self {
        match p {
            PoolArg::Qe => PoolChoice::Qe,
            PoolArg::Qubit => PoolChoice::Qubit,
            PoolArg::NearestNeighbor => PoolChoice::NearestNeighbor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Canonical,
    Recycling,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Canonical => Mode::Canonical,
            ModeArg::Recycling => Mode::Recycling,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Tfim,
    Heisenberg,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Tfim => ModelKind::Tfim,
            ModelArg::Heisenberg => ModelKind::Heisenberg,
        }
    }
}

#[derive(Args)]
struct ModelSpecArgs {
    /// Built-in lattice model instead of a Hamiltonian file.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, default_value_t = 6)]
    n_qubits: usize,
    /// Nearest-neighbor coupling J.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    /// Field strength h.
    #[arg(long, default_value_t = 0.5)]
    field: f64,
}

impl ModelSpecArgs {
    fn spec(&self) -> Option<ModelSpec> {
        self.model.map(|kind| ModelSpec {
            kind: kind.into(),
            n_qubits: self.n_qubits,
            coupling: self.coupling,
            field: self.field,
        })
    }
}

#[derive(Args)]
struct DiagnosticArgs {
    /// Iterations whose inverse-Hessian difference matrices are exported.
    #[arg(long, value_delimiter = ',')]
    heatmap_iterations: Option<Vec<usize>>,
    /// Iterations whose optimizer convergence series are exported.
    #[arg(long, value_delimiter = ',')]
    convergence_iterations: Option<Vec<usize>>,
    /// Richardson-extrapolated finite-difference Hessians.
    #[arg(long)]
    richardson: bool,
    /// Compare unit-normalized directions with the Newton direction.
    #[arg(long)]
    normalized_newton: bool,
}

impl DiagnosticArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(h) = &self.heatmap_iterations {
            config.diagnostics.heatmap_iterations = h.clone();
        }
        if let Some(c) = &self.convergence_iterations {
            config.diagnostics.convergence_iterations = c.clone();
        }
        config.diagnostics.richardson |= self.richardson;
        config.diagnostics.normalized_newton |= self.normalized_newton;
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hamiltonian JSON file.
    #[arg(long, conflicts_with = "model")]
    hamiltonian: Option<PathBuf>,
    #[command(flatten)]
    model: ModelSpecArgs,
    #[arg(long, value_enum)]
    pool: Option<PoolArg>,
    /// Include single excitations in the QE pool.
    #[arg(long, value_enum)]
    qe_singles: Option<Switch>,
    #[arg(long, value_enum, value_delimiter = ',')]
    modes: Option<Vec<ModeArg>>,
    /// ADAPT pool-gradient norm threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum number of ADAPT iterations.
    #[arg(long)]
    max_adapt_iterations: Option<usize>,
    /// Optimizer gradient-norm threshold.
    #[arg(long)]
    optimizer_tolerance: Option<f64>,
    /// Maximum line searches per optimization.
    #[arg(long)]
    optimizer_max_iterations: Option<usize>,
    /// Strong instead of weak Wolfe curvature condition.
    #[arg(long)]
    strong_wolfe: bool,
    /// Pool-gradient magnitudes within this of the maximum count as tied
    #[arg(long)]
    tie_tolerance: Option<f64>,
    /// Compute Hessian-distance and convergence diagnostics.
    #[arg(long)]
    diagnostics: bool,
    #[command(flatten)]
    diagnostic_args: DiagnosticArgs,
    /// Recorded in config.json; runs are deterministic without it
    #[arg(long)]
    seed: Option<u64>,
    /// Recompute the exact ground energy and check it against the metadata.
    #[arg(long)]
    verify: bool,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PoolArgs {
    /// Take the register size and electron count from a Hamiltonian file.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "qe")]
    kind: PoolArg,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    n_electrons: Option<usize>,
    #[arg(long, value_enum, default_value = "on")]
    qe_singles: Switch,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    model: ModelSpecArgs,
    /// Re-emit this Hamiltonian file in canonical form instead.
    #[arg(long, conflicts_with = "model")]
    input: Option<PathBuf>,
    /// Skip the exact ground-state energy.
    #[arg(long)]
    no_exact: bool,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Directory written by `adapt run`.
    dir: PathBuf,
    #[command(flatten)]
    diagnostic_args: DiagnosticArgs,
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let source = match (&args.hamiltonian, args.model.spec()) {
        (Some(path), _) => Some(HamiltonianSource::Path(path.clone())),
        (None, Some(spec)) => Some(HamiltonianSource::Builtin(spec)),
        (None, None) => None,
    };
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let source = source.clone().context("give --config, --hamiltonian or --model")?;
            let output = args.output.clone().context("--output is required without --config")?;
            ExperimentConfig::new(source, output)
        }
    };
    if let Some(source) = source {
        config.hamiltonian = source;
    }
    if let Some(o) = &args.output {
        config.output_dir = o.clone();
    }
    if let Some(p) = args.pool {
        config.pool = Some(p.into());
    }
    if let Some(s) = args.qe_singles {
        config.qe_singles = s.into();
    }
    if let Some(m) = &args.modes {
        config.modes = m.iter().map(|&m| m.into()).collect();
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.max_adapt_iterations {
        config.max_adapt_iterations = v;
    }
    if let Some(v) = args.optimizer_tolerance {
        config.optimizer_tolerance = v;
    }
    if let Some(v) = args.optimizer_max_iterations {
        config.optimizer_max_iterations = v;
    }
    if let Some(v) = args.tie_tolerance {
        config.tie_tolerance = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.strong_wolfe |= args.strong_wolfe;
    config.verify |= args.verify;
    config.diagnostics.enabled |= args.diagnostics;
    args.diagnostic_args.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn print_summary(summary: &Summary, dir: &Path) {
    println!(
        "{}: {} qubits, {} pool of {} operators",
        summary.fixture, summary.n_qubits, summary.pool, summary.pool_size
    );
    for r in &summary.runs {
        let error = r.error.map(|e| format!(" error {e:.3e}")).unwrap_or_default();
        println!(
            "  {:<10} energy {:.12}{error}  ansatz {}  fevals {}  pool units {}  {:?}",
            r.mode.to_string(),
            r.final_energy,
            r.ansatz_length,
            r.function_evaluations,
            r.pool_gradient_units,
            r.termination
        );
    }
    if let Some(ratio) = summary.feval_ratio {
        println!("  feval ratio (recycling / canonical) {ratio:.4}");
    }
    println!("  outputs in {}", dir.display());
}

fn write_output(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pool_command(args: &PoolArgs) -> Result<()> {
    let kind = PoolChoice::from(args.kind);
    let pool = match &args.hamiltonian {
        Some(path) => {
            let source = HamiltonianSource::Path(path.clone());
            let loaded = load_source(&source, false)?;
            build_pool(&source, &loaded, Some(kind), args.qe_singles.into())?
        }
        None => {
            let n = args.n_qubits.context("give --hamiltonian or --n-qubits")?;
            let qe = || -> Result<_> {
                let ne = args.n_electrons.context("the QE pool needs --n-electrons")?;
                let options = QePoolOptions {
                    include_singles: args.qe_singles.into(),
                    ..QePoolOptions::default()
                };
                Ok(build_qe_pool(n, ne, options)?)
            };
            match kind {
                PoolChoice::Qe => qe()?,
                PoolChoice::Qubit => build_qubit_pool(&qe()?)?,
                PoolChoice::NearestNeighbor => nearest_neighbor_pool(n)?,
            }
        }
    };
    log::info!("{} pool with {} operators", pool.kind(), pool.len());
    write_output(args.output.as_deref(), &pool_to_json(&pool)?)
}

fn model_command(args: &ModelArgs) -> Result<()> {
    let loaded = match (&args.input, args.model.spec()) {
        (Some(path), _) => load_hamiltonian(path)?,
        (None, Some(spec)) => builtin_model(&spec, !args.no_exact)?,
        (None, None) => bail!("give --model or --input"),
    };
    write_output(args.output.as_deref(), &loaded.to_json()?)
}

fn diagnose_command(args: &DiagnoseArgs) -> Result<()> {
    let path = args.dir.join("config.json");
    let mut config =
        ExperimentConfig::load(&path).with_context(|| format!("{} is not a run directory", args.dir.display()))?;
    config.output_dir = args.dir.clone();
    config.diagnostics.enabled = true;
    args.diagnostic_args.apply(&mut config);
    // The core path is deterministic, so replaying the stored configuration
    // reproduces the optimizer histories the diagnostics need.
    let outcome = run_experiment(&config)?;
    print_summary(&outcome.summary, &config.output_dir);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_config(args).and_then(|config| {
            let outcome = run_experiment(&config)?;
            print_summary(&outcome.summary, &config.output_dir);
            Ok(())
        }),
        Command::Pool(args) => pool_command(args),
        Command::Model(args) => model_command(args),
        Command::Diagnose(args) => diagnose_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
