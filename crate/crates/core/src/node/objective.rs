//! The regularized training objective `L + lambda R`.

use serde::{Deserialize, Serialize};

use super::loss::{cross_entropy, mse};
use super::mlp::{Mlp, MlpParams, Readout};
use super::task::{Dataset, Target, Task};
use crate::array::{Array, Primitive, Reduce};
use crate::error::{invalid, Error, Result};
use crate::ode::{
    adaptive_solve, fixed_solve, regularized_fixed, solve_with_regularizer, uniform_grid,
    Integrand, SolveConfig, SolveMode, TableauId,
};
use crate::rng::{self, RngState};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Dynamics plus an optional classification readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mlp: MlpParams,
    pub readout: Option<Readout>,
}

impl Model {
    pub fn init(task: Task, hidden: usize, rng: &mut RngState) -> Self {
        let dim = task.state_dim();
        let mlp = Mlp::init(rng, dim, hidden);
        let readout = task.classes().map(|c| Readout::init(rng, dim, c));
        Model { mlp, readout }
    }

    /// Parameters in a fixed order: `W1, b1, W2, b2[, readout W, readout b]`.
    pub fn params(&self) -> Vec<Tensor> {
        let mut v = self.mlp.clone().into_vec();
        if let Some(r) = &self.readout {
            v.push(r.w.clone());
            v.push(r.b.clone());
        }
        v
    }

    pub fn set_params(&mut self, mut v: Vec<Tensor>) -> Result<()> {
        let expected = 4 + 2 * self.readout.is_some() as usize;
        if v.len() != expected {
            return Err(invalid(format!("expected {expected} parameter tensors")));
        }
        if let Some(r) = &mut self.readout {
            r.b = v.pop().expect("length checked");
            r.w = v.pop().expect("length checked");
        }
        let mut it = v.into_iter();
        self.mlp = Mlp {
            w1: it.next().expect("length checked"),
            b1: it.next().expect("length checked"),
            w2: it.next().expect("length checked"),
            b2: it.next().expect("length checked"),
        };
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "taylor_rk")]
    Taylor,
    #[serde(rename = "finlay_kinetic")]
    Kinetic,
    #[serde(rename = "finlay_jacobian")]
    Jacobian,
}

impl RegKind {
    pub fn name(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::Taylor => "taylor_rk",
            RegKind::Kinetic => "finlay_kinetic",
            RegKind::Jacobian => "finlay_jacobian",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        [RegKind::None, RegKind::Taylor, RegKind::Kinetic, RegKind::Jacobian]
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| invalid(format!("unknown regularizer `{name}`")))
    }
}

/// `L + lambda R` over the flow from `t = 0` to `t1`. `order` is only used
/// by the Taylor regularizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub lambda: f64,
    pub order: usize,
    pub regularizer: RegKind,
    pub mode: SolveMode,
    pub t1: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            lambda: 0.0,
            order: 2,
            regularizer: RegKind::Taylor,
            mode: SolveMode::Fixed {
                grid: uniform_grid(0.0, 1.0, 16),
                tableau: TableauId::Rk4,
            },
            t1: 1.0,
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be finite and non-negative"));
        }
        if self.order == 0 {
            return Err(invalid("regularizer order must be at least 1"));
        }
        if !(self.t1 > 0.0) {
            return Err(invalid("t1 must be positive"));
        }
        Ok(())
    }

    /// The integrand for a batch of `rows` states. The Jacobian probe is
    /// drawn from `eps_rng`, one row per example.
    fn integrand(&self, eps_rng: &RngState, rows: usize, dim: usize) -> Option<Integrand> {
        match self.regularizer {
            RegKind::None => None,
            RegKind::Taylor => Some(Integrand::Taylor { order: self.order }),
            RegKind::Kinetic => Some(Integrand::Kinetic),
            RegKind::Jacobian => Some(Integrand::Jacobian {
                eps: rng::normal(&mut eps_rng.clone(), &[rows, dim]),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub loss: f64,
    /// Batch mean of the regularizer integral (0 without a regularizer).
    pub reg: f64,
}

fn base_loss<A: Reduce>(readout: Option<&Readout<A>>, z: &A, target: &Target) -> Result<A> {
    match target {
        Target::Regression(t) => mse(z, t),
        Target::Classes(labels) => {
            let r = readout.ok_or_else(|| invalid("classification needs a readout"))?;
            cross_entropy(&r.apply(z)?, labels)
        }
    }
}

fn row_integrand(integ: &Integrand, i: usize) -> Result<Integrand> {
    Ok(match integ {
        Integrand::Jacobian { eps } => Integrand::Jacobian {
            eps: eps.row(i)?.as_batch()?,
        },
        other => other.clone(),
    })
}

/// Final states (and per-example regularizer) of the batched solve.
fn solve_batch(
    model: &Model,
    x: &Tensor,
    spec: &ObjectiveSpec,
    integ: Option<&Integrand>,
) -> Result<(Tensor, f64)> {
    match integ {
        Some(i) => {
            let sol = solve_with_regularizer(&model.mlp, x, 0.0, spec.t1, i, &spec.mode)?;
            let reg = sol.mean_reg();
            Ok((sol.z, reg))
        }
        None => {
            let z = match &spec.mode {
                SolveMode::Fixed { grid, tableau } => {
                    fixed_solve(&model.mlp, x, grid, &tableau.tableau())?.z
                }
                SolveMode::Adaptive(cfg) => adaptive_solve(&model.mlp, x, 0.0, spec.t1, cfg)?.z,
            };
            Ok((z, 0.0))
        }
    }
}

/// Attaches the index of the first example whose own solve fails.
fn locate_failure(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    integ: Option<&Integrand>,
    err: Error,
) -> Error {
    for i in 0..data.len() {
        let Ok(x) = data.x.row(i).and_then(|r| r.as_batch()) else {
            break;
        };
        let row_integ = match integ.map(|g| row_integrand(g, i)).transpose() {
            Ok(r) => r,
            Err(_) => break,
        };
        if let Err(e) = solve_batch(model, &x, spec, row_integ.as_ref()) {
            return Error::Example {
                index: i,
                source: Box::new(e),
            };
        }
    }
    err
}

/// `L + lambda R` on a batch, in either solver mode.
pub fn objective(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    eps_rng: &RngState,
) -> Result<Diagnostics> {
    spec.validate()?;
    if data.is_empty() {
        return Err(invalid("empty batch"));
    }
    let (rows, dim) = data.x.dims2("objective")?;
    let integ = spec.integrand(eps_rng, rows, dim);
    let (z, reg) = solve_batch(model, &data.x, spec, integ.as_ref())
        .map_err(|e| locate_failure(model, data, spec, integ.as_ref(), e))?;
    let loss = base_loss(model.readout.as_ref(), &z, &data.target)?.item()?;
    Ok(Diagnostics {
        objective: loss + spec.lambda * reg,
        loss,
        reg,
    })
}

/// [`objective`] plus exact gradients of the fixed-grid discretization,
/// in the order of [`Model::params`].
pub fn objective_grad(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    eps_rng: &RngState,
) -> Result<(Diagnostics, Vec<Tensor>)> {
    objective_grad_with_fault(model, data, spec, eps_rng, None)
}

/// [`objective_grad`] on a tape whose partials of `fault.0` are scaled by
/// `fault.1` (see [`Tape::inject_fault`]). Negative control for gradient
/// checks.
pub fn objective_grad_with_fault(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    eps_rng: &RngState,
    fault: Option<(Primitive, f64)>,
) -> Result<(Diagnostics, Vec<Tensor>)> {
    spec.validate()?;
    let SolveMode::Fixed { grid, tableau } = &spec.mode else {
        return Err(invalid("gradients need a fixed-grid solver mode"));
    };
    if data.is_empty() {
        return Err(invalid("empty batch"));
    }
    let (rows, dim) = data.x.dims2("objective")?;
    let integ = spec.integrand(eps_rng, rows, dim);
    let tape = Tape::new();
    tape.inject_fault(fault);
    let mlp = Mlp::leaves(&model.mlp, &tape);
    let readout = model.readout.as_ref().map(|r| r.map(|p| tape.leaf(p.clone())));
    let z0 = tape.constant(data.x.clone());
    let solved = match &integ {
        Some(i) => regularized_fixed(&mlp, &z0, grid, *tableau, i).map(|s| (s.z, Some(s.reg))),
        None => fixed_solve(&mlp, &z0, grid, &tableau.tableau()).map(|s| (s.z, None)),
    };
    let (z, reg) = solved.map_err(|e| locate_failure(model, data, spec, integ.as_ref(), e))?;
    let loss = base_loss(readout.as_ref(), &z, &data.target)?;
    let (total, reg_value) = match reg {
        Some(r) => {
            let mean = r.sum().scale(1.0 / rows as f64);
            let value = mean.value().item()?;
            (loss.add(&mean.scale(spec.lambda))?, value)
        }
        None => (loss, 0.0),
    };
    let grads = tape.backward(&total)?;
    let mut out: Vec<Tensor> = mlp.into_vec().iter().map(|v| grads.wrt(v)).collect();
    if let Some(r) = &readout {
        out.push(grads.wrt(&r.w));
        out.push(grads.wrt(&r.b));
    }
    let loss_value = loss.value().item()?;
    Ok((
        Diagnostics {
            objective: loss_value + spec.lambda * reg_value,
            loss: loss_value,
            reg: reg_value,
        },
        out,
    ))
}

/// Mean adaptive-solve NFE over the rows of `x`, each solved on its own.
pub fn mean_nfe(model: &Model, x: &Tensor, t1: f64, cfg: &SolveConfig) -> Result<f64> {
    let (rows, _) = x.dims2("mean_nfe")?;
    let mut total = 0usize;
    for i in 0..rows {
        let z0 = x.row(i)?.as_batch()?;
        let sol = adaptive_solve(&model.mlp, &z0, 0.0, t1, cfg).map_err(|e| Error::Example {
            index: i,
            source: Box::new(e),
        })?;
        total += sol.stats.nfe;
    }
    Ok(total as f64 / rows.max(1) as f64)
}

/// Classification accuracy (fraction of rows whose argmax logit matches).
pub fn accuracy(model: &Model, data: &Dataset, spec: &ObjectiveSpec) -> Result<Option<f64>> {
    let (Target::Classes(labels), Some(r)) = (&data.target, &model.readout) else {
        return Ok(None);
    };
    let (z, _) = solve_batch(model, &data.x, spec, None)?;
    let pred = super::loss::argmax_rows(&r.apply(&z)?)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(Some(hits as f64 / labels.len().max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_is_base_loss() {
        let mut rng = RngState::new(5);
        let model = Model::init(Task::ToyMap, 4, &mut rng);
        let data = Task::ToyMap.generate(&mut rng, 6).unwrap();
        let spec = ObjectiveSpec::default();
        let d = objective(&model, &data, &spec, &rng).unwrap();
        assert_eq!(d.objective, d.loss);
        assert!(d.reg > 0.0);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = RngState::new(5);
        let model = Model::init(Task::Spirals, 3, &mut rng);
        let mut copy = model.clone();
        copy.set_params(model.params()).unwrap();
        assert_eq!(copy, model);
        assert!(copy.set_params(vec![]).is_err());
    }

    #[test]
    fn adaptive_mode_has_no_gradient() {
        let mut rng = RngState::new(5);
        let model = Model::init(Task::ToyMap, 4, &mut rng);
        let data = Task::ToyMap.generate(&mut rng, 2).unwrap();
        let spec = ObjectiveSpec {
            mode: SolveMode::Adaptive(SolveConfig::default()),
            ..ObjectiveSpec::default()
        };
        assert!(objective_grad(&model, &data, &spec, &rng).is_err());
        assert!(objective(&model, &data, &spec, &rng).is_ok());
    }
}
