//! Command implementations.

mod bench;
mod fit_toy;
mod gradcheck;
mod nfe_grid;
mod replay;
mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use jetode_core::node::{
    mean_nfe, objective, train, RegKind, Task, TrainConfig, TrainOutcome,
};
use jetode_core::ode::{SolveConfig, TableauId};

use crate::args::{Command, TrainArgs};
use crate::manifest::{timestamp, RunManifest};
use crate::svg::Chart;
use crate::table::{write_bytes, Format, Table};

pub use sweep::{sweep_grid, SweepRow};

/// What a command produced.
#[derive(Debug)]
pub struct Report {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// Set when a check the command performs did not pass (exit code 1).
    pub failure: Option<String>,
}

/// Collects the files a command writes.
pub(crate) struct Outputs {
    pub dir: PathBuf,
    pub format: Format,
    pub files: Vec<String>,
    pub volatile: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf, format: Format) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir,
            format,
            files: Vec::new(),
            volatile: Vec::new(),
        })
    }

    pub fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        let name = t.write(&self.dir, stem, self.format)?;
        self.files.push(name);
        Ok(())
    }

    /// A table whose contents vary between runs (wall-clock timings).
    pub fn volatile_table(&mut self, stem: &str, t: &Table) -> Result<()> {
        let name = t.write(&self.dir, stem, self.format)?;
        self.volatile.push(name);
        Ok(())
    }

    pub fn chart(&mut self, name: &str, chart: &Chart) -> Result<()> {
        write_bytes(&self.dir.join(name), chart.render().as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Per-command result before the manifest is attached.
pub(crate) struct Done {
    pub config: serde_json::Value,
    pub summary: Vec<String>,
    pub failure: Option<String>,
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configurations serialize")
}

/// Runs `cmd`, writing its outputs and manifest.
pub fn execute(cmd: &Command) -> Result<Report> {
    if let Command::Replay(a) = cmd {
        return replay::run(a);
    }
    let dir = crate::outdir(cmd);
    let mut out = Outputs::new(dir.clone(), cmd.common().format)?;
    let started = timestamp();
    let done = match cmd {
        Command::FitToy(a) => fit_toy::run(a, &mut out)?,
        Command::NfeGrid(a) => nfe_grid::run(a, &mut out)?,
        Command::SweepLambda(a) => sweep::run_sweep(a, &mut out)?,
        Command::OrderStudy(a) => sweep::run_order_study(a, &mut out)?,
        Command::BenchJet(a) => bench::run(a, &mut out)?,
        Command::Gradcheck(a) => gradcheck::run(a, &mut out)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cmd.common().seed,
        started,
        finished: timestamp(),
        args: to_json(cmd),
        config: done.config,
        outputs: out.files,
        volatile_outputs: out.volatile,
    };
    manifest.write(&dir)?;
    Ok(Report {
        dir,
        manifest,
        summary: done.summary,
        failure: done.failure,
    })
}

/// Adaptive NFE of one trained model under one solver order.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverNfe {
    pub solver: usize,
    pub train: f64,
    pub test: f64,
}

/// A model trained at one regularization setting, with final metrics.
pub struct Fitted {
    pub config: TrainConfig,
    pub outcome: TrainOutcome,
    /// Final training loss and regularizer value (the regularizer is
    /// evaluated even when it was not trained on).
    pub loss: f64,
    pub reg: f64,
    pub test_loss: f64,
    pub nfe: Vec<SolverNfe>,
}

impl Fitted {
    pub fn nfe_of(&self, solver: usize) -> Option<SolverNfe> {
        self.nfe.iter().copied().find(|n| n.solver == solver)
    }
}

pub(crate) fn solver_config(order: usize) -> Result<SolveConfig> {
    Ok(SolveConfig::with_tableau(TableauId::adaptive_of_order(order)?))
}

/// Trains one model. With `lambda == 0` the regularizer is left out of
/// training and only evaluated at the end, so the baseline is the same
/// computation in every command.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    args: &TrainArgs,
    task: Task,
    seed: u64,
    regularizer: RegKind,
    order: usize,
    lambda: f64,
    solvers: &[usize],
) -> Result<Fitted> {
    let first = *solvers.first().context("no solver order given")?;
    let report_cfg = args.config(task, seed, regularizer, order, lambda, first)?;
    let mut config = report_cfg.clone();
    if lambda == 0.0 {
        config.objective.regularizer = RegKind::None;
    }
    let outcome = train(&config)?;
    let model = &outcome.state.model;
    let eps = outcome.state.rng.fork(3);
    let fin = objective(model, &outcome.train, &report_cfg.objective, &eps)?;
    let test = objective(model, &outcome.test, &report_cfg.objective, &eps)?;
    let mut nfe = Vec::with_capacity(solvers.len());
    for &m in solvers {
        let sc = solver_config(m)?;
        nfe.push(SolverNfe {
            solver: m,
            train: mean_nfe(model, &outcome.train.x, report_cfg.objective.t1, &sc)?,
            test: mean_nfe(model, &outcome.test.x, report_cfg.objective.t1, &sc)?,
        });
    }
    Ok(Fitted {
        config,
        outcome,
        loss: fin.loss,
        reg: fin.reg,
        test_loss: test.loss,
        nfe,
    })
}

/// Byte-level comparison of the files named in `names`.
pub(crate) fn compare_files(a: &Path, b: &Path, names: &[String]) -> Vec<(String, bool)> {
    names
        .iter()
        .map(|n| {
            let same = match (std::fs::read(a.join(n)), std::fs::read(b.join(n))) {
                (Ok(x), Ok(y)) => x == y,
                _ => false,
            };
            (n.clone(), same)
        })
        .collect()
}
