//! Command-line interface. Every argument struct is also the serialized
//! `args` record of a run manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use jetode_core::node::{ObjectiveSpec, RegKind, Task, TrainConfig};
use jetode_core::ode::{uniform_grid, SolveConfig, SolveMode, TableauId, DEFAULT_TOL};

use crate::table::Format;

#[derive(Debug, Parser)]
#[command(name = "jetode", version, about = "Solver-cost regularized neural ODE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit z(1) = z(0) + z(0)^3 with and without the regularizer.
    FitToy(FitToyArgs),
    /// Steps taken by each adaptive solver on polynomial trajectories.
    NfeGrid(NfeGridArgs),
    /// Train over a logarithmic grid of regularization weights.
    SweepLambda(SweepArgs),
    /// Sweep several regularizer orders and compare them per solver order.
    OrderStudy(OrderStudyArgs),
    /// Operation counts and timings of Taylor mode versus nested forward mode.
    BenchJet(BenchJetArgs),
    /// Compare objective gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitToy(_) => "fit-toy",
            Command::NfeGrid(_) => "nfe-grid",
            Command::SweepLambda(_) => "sweep-lambda",
            Command::OrderStudy(_) => "order-study",
            Command::BenchJet(_) => "bench-jet",
            Command::Gradcheck(_) => "gradcheck",
            Command::Replay(_) => "replay",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::FitToy(a) => &a.common,
            Command::NfeGrid(a) => &a.common,
            Command::SweepLambda(a) => &a.common,
            Command::OrderStudy(a) => &a.common,
            Command::BenchJet(a) => &a.common,
            Command::Gradcheck(a) => &a.common,
            Command::Replay(a) => &a.common,
        }
    }

    pub fn common_mut(&mut self) -> &mut Common {
        match self {
            Command::FitToy(a) => &mut a.common,
            Command::NfeGrid(a) => &mut a.common,
            Command::SweepLambda(a) => &mut a.common,
            Command::OrderStudy(a) => &mut a.common,
            Command::BenchJet(a) => &mut a.common,
            Command::Gradcheck(a) => &mut a.common,
            Command::Replay(a) => &mut a.common,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Root seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: results/<command>].
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    /// Encoding of result tables.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Model and optimizer settings shared by the training commands.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Hidden units of the dynamics MLP.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Training epochs [default: 4000 for fit-toy, 2000 for the sweeps].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate of SGD with momentum 0.9.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Multiply the learning rate by --lr-decay every this many epochs (0: never).
    #[arg(long, default_value_t = 0)]
    pub lr_decay_every: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr_decay: f64,
    /// Global gradient-norm clip (0 disables).
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 32)]
    pub n_train: usize,
    #[arg(long, default_value_t = 64)]
    pub n_test: usize,
    /// Uniform RK4 steps of the training solve on [0, 1].
    #[arg(long, default_value_t = 16)]
    pub grid_steps: usize,
    /// Epochs between history evaluations.
    #[arg(long, default_value_t = 100)]
    pub eval_every: usize,
}

impl Default for TrainArgs {
    fn default() -> Self {
        TrainArgs::parse_from::<[&str; 0], &str>([])
    }
}

#[derive(Parser)]
struct TrainOnly {
    #[command(flatten)]
    train: TrainArgs,
}

impl TrainArgs {
    fn parse_from<I, T>(args: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let argv = std::iter::once(std::ffi::OsString::from("train"))
            .chain(args.into_iter().map(Into::into));
        TrainOnly::parse_from(argv).train
    }

    /// Epochs used by `fit-toy` when `--epochs` is absent.
    pub const FIT_EPOCHS: usize = 4000;
    /// Epochs per λ point of the sweeps when `--epochs` is absent.
    pub const SWEEP_EPOCHS: usize = 2000;

    /// Fills in `--epochs` when it was not given.
    pub fn with_default_epochs(&self, epochs: usize) -> TrainArgs {
        TrainArgs {
            epochs: Some(self.epochs.unwrap_or(epochs)),
            ..self.clone()
        }
    }

    /// Training configuration for one regularization setting.
    pub fn config(
        &self,
        task: Task,
        seed: u64,
        regularizer: RegKind,
        order: usize,
        lambda: f64,
        solver_order: usize,
    ) -> anyhow::Result<TrainConfig> {
        let cfg = TrainConfig {
            task,
            hidden: self.hidden,
            epochs: self.epochs.unwrap_or(Self::FIT_EPOCHS),
            lr: self.lr,
            lr_decay_every: self.lr_decay_every,
            lr_decay: self.lr_decay,
            n_train: self.n_train,
            n_test: self.n_test,
            seed,
            objective: ObjectiveSpec {
                lambda,
                order,
                regularizer,
                mode: SolveMode::Fixed {
                    grid: uniform_grid(0.0, 1.0, self.grid_steps),
                    tableau: TableauId::Rk4,
                },
                t1: 1.0,
            },
            eval_every: self.eval_every,
            nfe_solver: SolveConfig::with_tableau(TableauId::adaptive_of_order(solver_order)?),
            grad_clip: (self.clip > 0.0).then_some(self.clip),
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::from_name(s).map_err(|e| e.to_string())
}

fn parse_reg(s: &str) -> Result<RegKind, String> {
    RegKind::from_name(s).map_err(|e| e.to_string())
}

fn parse_solver_order(s: &str) -> Result<usize, String> {
    let m: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    TableauId::adaptive_of_order(m)
        .map(|_| m)
        .map_err(|e| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct FitToyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Regularization weight (0 runs the baseline only).
    #[arg(long, default_value_t = 0.03)]
    pub lambda: f64,
    /// Order K of the regularized total derivative.
    #[arg(long = "order", default_value_t = 3)]
    pub order: usize,
    #[arg(long, value_parser = parse_reg, default_value = "taylor_rk")]
    pub regularizer: RegKind,
    /// Order of the adaptive solver used to measure NFE (2, 3 or 5).
    #[arg(long, value_parser = parse_solver_order, default_value = "5")]
    pub solver: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct NfeGridArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest trajectory degree.
    #[arg(long, default_value_t = 6)]
    pub max_degree: usize,
    /// Adaptive solver orders.
    #[arg(long, value_delimiter = ',', value_parser = parse_solver_order, default_value = "2,3,5")]
    pub solvers: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub rtol: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub atol: f64,
    /// First trial step [default: the whole interval].
    #[arg(long)]
    pub initial_step: Option<f64>,
    /// Use the automatic initial-step selection instead of a fixed first step.
    #[arg(long, conflicts_with = "initial_step")]
    pub auto_initial_step: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct LambdaRange {
    /// Smallest regularization weight of the grid.
    #[arg(long, default_value_t = 1e-5)]
    pub lambda_min: f64,
    /// Largest regularization weight of the grid.
    #[arg(long, default_value_t = 1e-2)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 8)]
    pub per_decade: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub range: LambdaRange,
    #[arg(long = "order", default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_parser = parse_solver_order, default_value = "5")]
    pub solver: usize,
    #[arg(long, value_parser = parse_reg, default_value = "taylor_rk")]
    pub regularizer: RegKind,
    #[arg(long, value_parser = parse_task, default_value = "toy_map")]
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct OrderStudyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub range: LambdaRange,
    #[arg(long, value_delimiter = ',', value_parser = parse_solver_order, default_value = "2,3,5")]
    pub solvers: Vec<usize>,
    /// Regularizer orders K.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub orders: Vec<usize>,
    #[arg(long, value_parser = parse_task, default_value = "toy_map")]
    pub task: Task,
    /// Loss budget defining the knee of each frontier.
    #[arg(long, default_value_t = 2e-3)]
    pub loss_budget: f64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchJetArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest order K (at most 10).
    #[arg(long, default_value_t = 8)]
    pub max_order: usize,
    /// Timing repetitions per order.
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Regularizer orders K to check.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub orders: Vec<usize>,
    /// Relative error bound.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Scale the reverse partials of this primitive by 1.5.
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: Common,
    /// Manifest of the run to reproduce.
    pub manifest: PathBuf,
}
