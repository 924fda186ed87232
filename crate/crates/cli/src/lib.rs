//! Command-line driver: argument parsing, configuration and the artifact
//! layout `<out>/data/` and `<out>/runs/<name>/`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

pub use commands::Workspace;
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "flowfactor", version, about = "Factor-conditioned flow matching on a toy scene dataset")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact root.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Run directory name under the runs directory.
    #[arg(long, global = true, default_value = "default")]
    pub name: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the dataset cache and fit the latent codec.
    GenerateData,
    /// Train a model and write its checkpoint and loss CSV.
    Train(TrainArgs),
    /// Score a checkpoint with FactorVAE, DCI and MIG.
    Evaluate(EvaluateArgs),
    /// Draw samples conditioned on random scenes.
    Sample(SampleArgs),
    /// Swap factor tokens between two scenes, or run a random swap sweep.
    Swap(SwapArgs),
    /// Compare training with and without the orthogonality loss.
    Ablate(AblateArgs),
}

#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub lambda_orth: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SolverArgs {
    /// `euler`, `rk4` or `dopri5`.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Step count for the fixed-step solvers.
    #[arg(long)]
    pub solver_steps: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct EvaluateArgs {
    /// Score the planted ground-truth representation instead of a checkpoint.
    #[arg(long)]
    pub oracle: bool,
    /// Scenes drawn for the DCI and MIG estimates.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    /// Source scene index.
    #[arg(long, required_unless_present = "trials")]
    pub source: Option<usize>,
    /// Target scene index.
    #[arg(long, required_unless_present = "trials")]
    pub target: Option<usize>,
    /// Factor token to swap; every token when omitted.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Run a sweep of this many random single-factor swaps instead.
    #[arg(long, conflicts_with_all = ["source", "target", "factor"])]
    pub trials: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Default, Args)]
pub struct AblateArgs {
    /// Paired seeds per arm.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.train.lambda_orth, self.lambda_orth);
        set(&mut cfg.train.steps, self.steps);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.learning_rate, self.learning_rate);
    }
}

impl SolverArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.solver.kind, self.solver.clone());
        set(&mut cfg.solver.rtol, self.rtol);
        set(&mut cfg.solver.atol, self.atol);
        set(&mut cfg.solver.steps, self.solver_steps);
    }
}

impl Cli {
    /// The file config (or defaults) with every flag applied on top.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        match &self.command {
            Command::GenerateData => {}
            Command::Train(a) => a.apply(&mut cfg),
            Command::Evaluate(a) => set(&mut cfg.metrics.samples, a.samples),
            Command::Sample(a) => a.solver.apply(&mut cfg),
            Command::Swap(a) => {
                a.solver.apply(&mut cfg);
                set(&mut cfg.swap.trials, a.trials);
            }
            Command::Ablate(a) => {
                set(&mut cfg.ablate.seeds, a.seeds);
                // Steps given here bound each arm, not the main run.
                set(&mut cfg.ablate.steps, a.train.steps);
                let TrainArgs { lambda_orth, batch_size, learning_rate, .. } = a.train;
                TrainArgs { lambda_orth, batch_size, learning_rate, steps: None }.apply(&mut cfg);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command and returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.resolve_config()?;
    let ws = Workspace::new(&cli.out, &cfg, &cli.name);
    let partial = match &cli.command {
        Command::GenerateData => return commands::generate_data(&cfg, &ws),
        Command::Train(_) => return commands::train(&cfg, &ws),
        Command::Evaluate(a) => return commands::evaluate(&cfg, &ws, a.oracle),
        Command::Sample(a) => commands::sample(&cfg, &ws, a.count)?,
        Command::Swap(a) => match (a.trials, a.source, a.target) {
            (Some(trials), _, _) => {
                let (summary, _) = commands::swap_sweep(&cfg, &ws, trials)?;
                return Ok(format!(
                    "swap success rate {:.3} ({} / {}); report in {}\n",
                    summary.rate(),
                    summary.successes,
                    summary.trials,
                    ws.samples_dir().join("swap_sweep.txt").display()
                ));
            }
            (None, Some(s), Some(t)) => commands::swap(&cfg, &ws, s, t, a.factor)?,
            _ => bail!("swap needs --source and --target, or --trials"),
        },
        Command::Ablate(_) => commands::ablate(&cfg, &ws)?,
    };
    if !partial.failures.is_empty() {
        bail!(
            "{}{} item(s) failed:\n  {}",
            partial.summary,
            partial.failures.len(),
            partial.failures.join("\n  ")
        );
    }
    Ok(partial.summary)
}
