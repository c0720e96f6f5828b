//! Full-batch SGD with momentum.

use serde::{Deserialize, Serialize};

use super::objective::{accuracy, mean_nfe, objective, objective_grad, Model, ObjectiveSpec};
use super::task::{Dataset, Task};
use crate::error::{invalid, Result};
use crate::ode::SolveConfig;
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Momentum coefficient.
pub const BETA: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Multiply the learning rate by `lr_decay` every `lr_decay_every`
    /// epochs (0 disables the schedule).
    pub lr_decay_every: usize,
    pub lr_decay: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub objective: ObjectiveSpec,
    /// Evaluate every this many epochs (the final epoch is always evaluated).
    pub eval_every: usize,
    /// Solver used to measure NFE.
    pub nfe_solver: SolveConfig,
    /// Rescale the gradient to at most this global 2-norm.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::ToyMap,
            hidden: 32,
            epochs: 300,
            lr: 0.05,
            momentum: BETA,
            lr_decay_every: 0,
            lr_decay: 1.0,
            n_train: 32,
            n_test: 64,
            seed: 0,
            objective: ObjectiveSpec::default(),
            eval_every: 50,
            nfe_solver: SolveConfig::default(),
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if self.n_train == 0 || self.hidden == 0 {
            return Err(invalid("empty training set or hidden layer"));
        }
        self.objective.validate()?;
        self.nfe_solver.validate()
    }
}

/// One evaluation point of the training history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub epoch: usize,
    pub loss: f64,
    pub reg: f64,
    pub objective: f64,
    /// Mean per-example adaptive NFE on the training inputs.
    pub nfe: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: Model,
    pub velocity: Vec<Tensor>,
    pub epoch: usize,
    pub rng: RngState,
    pub history: Vec<EvalRecord>,
}

/// `v <- beta v + g; theta <- theta - lr v`, in place.
pub fn sgd_momentum(
    params: &mut [Tensor],
    velocity: &mut [Tensor],
    grads: &[Tensor],
    lr: f64,
    beta: f64,
) -> Result<()> {
    if params.len() != velocity.len() || params.len() != grads.len() {
        return Err(invalid("parameter, velocity and gradient lists differ"));
    }
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = v.scale(beta).add(g)?;
        *p = p.axpy(-lr, v)?;
    }
    Ok(())
}

/// Scales `grads` so their joint 2-norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        for g in grads.iter_mut() {
            *g = g.scale(max_norm / norm);
        }
    }
}

impl TrainState {
    pub fn new(model: Model, seed: u64) -> Self {
        let velocity = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        TrainState {
            model,
            velocity,
            epoch: 0,
            rng: RngState::new(seed),
            history: Vec::new(),
        }
    }

    /// One full-batch step; the Jacobian probe for this step is drawn from
    /// a stream keyed by the epoch.
    pub fn step(
        &mut self,
        data: &Dataset,
        spec: &ObjectiveSpec,
        lr: f64,
        beta: f64,
        clip: Option<f64>,
    ) -> Result<f64> {
        let eps_rng = self.rng.fork(1_000 + self.epoch as u64);
        let (diag, mut grads) = objective_grad(&self.model, data, spec, &eps_rng)?;
        if let Some(c) = clip {
            clip_global_norm(&mut grads, c);
        }
        let mut params = self.model.params();
        sgd_momentum(&mut params, &mut self.velocity, &grads, lr, beta)?;
        self.model.set_params(params)?;
        self.epoch += 1;
        Ok(diag.objective)
    }
}

/// Metrics of a model on a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub reg: f64,
    pub objective: f64,
    pub nfe: f64,
    pub accuracy: Option<f64>,
}

pub fn evaluate(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    nfe_solver: &SolveConfig,
    eps_rng: &RngState,
) -> Result<EvalMetrics> {
    let d = objective(model, data, spec, eps_rng)?;
    Ok(EvalMetrics {
        loss: d.loss,
        reg: d.reg,
        objective: d.objective,
        nfe: mean_nfe(model, &data.x, spec.t1, nfe_solver)?,
        accuracy: accuracy(model, data, spec)?,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub train: Dataset,
    pub test: Dataset,
}

/// Datasets and initial model for a configuration; deterministic in the seed.
pub fn setup(cfg: &TrainConfig) -> Result<(Model, Dataset, Dataset)> {
    let root = RngState::new(cfg.seed);
    let model = Model::init(cfg.task, cfg.hidden, &mut root.fork(0));
    let train = cfg.task.generate(&mut root.fork(1), cfg.n_train)?;
    let test = cfg.task.generate(&mut root.fork(2), cfg.n_test.max(1))?;
    Ok((model, train, test))
}

/// Trains from scratch. Deterministic given the configuration.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (model, train, test) = setup(cfg)?;
    let mut state = TrainState::new(model, cfg.seed);
    let mut lr = cfg.lr;
    let eval_rng = state.rng.fork(3);
    for epoch in 0..cfg.epochs {
        if cfg.lr_decay_every > 0 && epoch > 0 && epoch % cfg.lr_decay_every == 0 {
            lr *= cfg.lr_decay;
        }
        state.step(&train, &cfg.objective, lr, cfg.momentum, cfg.grad_clip)?;
        let done = epoch + 1 == cfg.epochs;
        if done || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            let m = evaluate(&state.model, &train, &cfg.objective, &cfg.nfe_solver, &eval_rng)?;
            state.history.push(EvalRecord {
                epoch: epoch + 1,
                loss: m.loss,
                reg: m.reg,
                objective: m.objective,
                nfe: m.nfe,
            });
        }
    }
    Ok(TrainOutcome { state, train, test })
}

/// Logarithmic grid with `per_decade` points per decade from `lo` to `hi`
/// (both included).
pub fn lambda_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || per_decade == 0 {
        return Err(invalid("lambda grid needs 0 < lo <= hi"));
    }
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    Ok((0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo * 10f64.powf(i as f64 / per_decade as f64)
            }
        })
        .collect())
}
