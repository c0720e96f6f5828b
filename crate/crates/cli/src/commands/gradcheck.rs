use anyhow::Result;

use jetode_core::node::{
    fd_gradient, objective_grad_with_fault, relative_error, Model, ObjectiveSpec, RegKind, Task,
};
use jetode_core::ode::{uniform_grid, SolveMode, TableauId};
use jetode_core::rng::RngState;
use jetode_core::Primitive;

use super::{Done, Outputs};
use crate::args::GradcheckArgs;
use crate::table::Table;
use crate::usage;

/// Scale applied to the corrupted primitive's partials.
const FAULT_SCALE: f64 = 1.5;
const BATCH: usize = 3;
const GRID_STEPS: usize = 8;
const LAMBDA: f64 = 0.1;

/// `(operation, regularizer, lambda)`; `loss` keeps the regularizer on the
/// tape with zero weight.
const OPERATIONS: [(&str, RegKind, f64); 4] = [
    ("loss", RegKind::Taylor, 0.0),
    ("taylor_rk", RegKind::Taylor, LAMBDA),
    ("finlay_kinetic", RegKind::Kinetic, LAMBDA),
    ("finlay_jacobian", RegKind::Jacobian, LAMBDA),
];

/// Model families checked: `(task, hidden units)`.
const CASES: [(Task, usize); 2] = [(Task::ToyMap, 8), (Task::Spirals, 4)];

fn relative_gap(
    task: Task,
    hidden: usize,
    seed: u64,
    spec: &ObjectiveSpec,
    step: f64,
    fault: Option<(Primitive, f64)>,
) -> Result<f64> {
    let root = RngState::new(seed);
    let model = Model::init(task, hidden, &mut root.fork(0));
    let data = task.generate(&mut root.fork(1), BATCH)?;
    let eps = root.fork(2);
    let (_, grad) = objective_grad_with_fault(&model, &data, spec, &eps, fault)?;
    let fd = fd_gradient(&model, &data, spec, &eps, step)?;
    Ok(relative_error(&grad, &fd)?)
}

pub(super) fn run(a: &GradcheckArgs, out: &mut Outputs) -> Result<Done> {
    if a.orders.is_empty() || a.orders.contains(&0) {
        return Err(usage("--orders must list orders of at least 1"));
    }
    if !(a.step > 0.0 && a.tolerance > 0.0) {
        return Err(usage("--step and --tolerance must be positive"));
    }
    let fault = match &a.corrupt {
        Some(name) => Some((Primitive::from_name(name).map_err(usage)?, FAULT_SCALE)),
        None => None,
    };
    let seeds = [a.common.seed, a.common.seed + 1];
    let mut report = Table::new(&[
        "operation",
        "order",
        "lambda",
        "cases",
        "max_rel_error",
        "worst_case",
        "tolerance",
        "pass",
    ])?;
    let mut worst: Option<(f64, String)> = None;
    let mut lines = Vec::new();
    for (name, regularizer, lambda) in OPERATIONS {
        for &order in &a.orders {
            let spec = ObjectiveSpec {
                lambda,
                order,
                regularizer,
                mode: SolveMode::Fixed {
                    grid: uniform_grid(0.0, 1.0, GRID_STEPS),
                    tableau: TableauId::Rk4,
                },
                t1: 1.0,
            };
            let mut row_worst = (f64::NEG_INFINITY, String::new());
            for (task, hidden) in CASES {
                for seed in seeds {
                    let e = relative_gap(task, hidden, seed, &spec, a.step, fault)?;
                    // NaN compares false; keep it as the worst.
                    if !(e <= row_worst.0) {
                        row_worst = (e, format!("{} h={hidden} seed={seed}", task.name()));
                    }
                }
            }
            let pass = row_worst.0 < a.tolerance;
            report.push(vec![
                name.into(),
                order.into(),
                lambda.into(),
                (CASES.len() * seeds.len()).into(),
                row_worst.0.into(),
                row_worst.1.as_str().into(),
                a.tolerance.into(),
                pass.into(),
            ])?;
            lines.push(format!(
                "{name:<16} K {order}  max relative error {:.3e}  {}",
                row_worst.0,
                if pass { "ok" } else { "FAIL" }
            ));
            let label = format!("{name} K={order} ({}): relative error {:.3e}", row_worst.1, row_worst.0);
            if worst.as_ref().is_none_or(|w| !(row_worst.0 <= w.0)) {
                worst = Some((row_worst.0, label));
            }
        }
    }
    out.table("report", &report)?;
    let failure = worst
        .filter(|w| !(w.0 < a.tolerance))
        .map(|w| format!("worst offender {}", w.1));
    Ok(Done {
        config: serde_json::json!({
            "batch": BATCH,
            "grid_steps": GRID_STEPS,
            "tableau": TableauId::Rk4,
            "seeds": seeds,
            "cases": CASES.iter().map(|(t, h)| serde_json::json!({"task": t, "hidden": h})).collect::<Vec<_>>(),
            "step": a.step,
            "tolerance": a.tolerance,
            "fault": a.corrupt.as_ref().map(|p| serde_json::json!({"primitive": p, "scale": FAULT_SCALE})),
        }),
        summary: lines,
        failure,
    })
}
