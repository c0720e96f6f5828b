//! Neural ODEs with MLP dynamics and the regularized objective.

mod gradcheck;
mod loss;
mod mlp;
mod objective;
mod task;
mod train;

pub use gradcheck::{fd_gradient, relative_error};
pub use loss::{argmax_rows, cross_entropy, mse};
pub use mlp::{Mlp, MlpParams, Readout};
pub use objective::{
    accuracy, mean_nfe, objective, objective_grad, objective_grad_with_fault, Diagnostics, Model, ObjectiveSpec, RegKind,
};
pub use task::{Dataset, Target, Task, SPIRAL_STATE_DIM};
pub use train::{
    clip_global_norm, evaluate, lambda_grid, setup, sgd_momentum, train, EvalMetrics, EvalRecord, TrainConfig,
    TrainOutcome, TrainState, BETA,
};
