use anyhow::Result;

use jetode_core::node::{RegKind, Task};
use jetode_core::ode::adaptive_solve;

use super::{fit, solver_config, to_json, Done, Fitted, Outputs};
use crate::args::{FitToyArgs, TrainArgs};
use crate::svg::{Chart, Series};
use crate::table::Table;
use crate::usage;

/// Examples drawn in the trajectory chart.
const PLOTTED: usize = 8;

pub(super) fn run(a: &FitToyArgs, out: &mut Outputs) -> Result<Done> {
    if a.lambda < 0.0 || !a.lambda.is_finite() {
        return Err(usage("--lambda must be finite and non-negative"));
    }
    if a.regularizer == RegKind::None && a.lambda > 0.0 {
        return Err(usage("--regularizer none needs --lambda 0"));
    }
    let seed = a.common.seed;
    let train = a.train.with_default_epochs(TrainArgs::FIT_EPOCHS);
    let fit_one = |lambda: f64| {
        fit(&train, Task::ToyMap, seed, a.regularizer, a.order, lambda, &[a.solver])
    };
    let mut models: Vec<(&str, Fitted)> = vec![("baseline", fit_one(0.0)?)];
    if a.lambda > 0.0 {
        models.push(("regularized", fit_one(a.lambda)?));
    }

    let sc = solver_config(a.solver)?;
    let mut traj = Table::new(&["model", "example", "x0", "t", "z"])?;
    let mut history = Table::new(&["model", "epoch", "loss", "reg", "objective", "nfe"])?;
    let mut summary = Table::new(&[
        "model",
        "lambda",
        "order",
        "regularizer",
        "solver",
        "train_mse",
        "train_reg",
        "train_nfe",
        "test_mse",
        "test_nfe",
        "nfe_reduction",
    ])?;
    let mut series = Vec::new();
    let base_nfe = models[0].1.nfe[0].train;
    let mut lines = Vec::new();
    for (slot, (name, f)) in models.iter().enumerate() {
        let data = &f.outcome.train;
        let n = data.len();
        for i in 0..n {
            let z0 = data.x.row(i)?.as_batch()?;
            let sol = adaptive_solve(&f.outcome.state.model.mlp, &z0, 0.0, 1.0, &sc)?;
            let tr = &sol.trajectory;
            let pts: Vec<(f64, f64)> = tr
                .times
                .iter()
                .zip(&tr.states)
                .map(|(t, z)| (*t, z.data()[0]))
                .collect();
            for (t, z) in &pts {
                traj.push(vec![(*name).into(), i.into(), z0.data()[0].into(), (*t).into(), (*z).into()])?;
            }
            if i % (n / PLOTTED).max(1) == 0 {
                let first = series.iter().all(|s: &Series| s.color != Some(slot));
                series.push(Series {
                    name: if first { (*name).to_string() } else { String::new() },
                    points: pts,
                    scatter: false,
                    color: Some(slot),
                });
            }
        }
        for h in &f.outcome.state.history {
            history.push(vec![
                (*name).into(),
                h.epoch.into(),
                h.loss.into(),
                h.reg.into(),
                h.objective.into(),
                h.nfe.into(),
            ])?;
        }
        let nfe = f.nfe[0];
        let lambda = f.config.objective.lambda;
        let reduction = if slot == 0 { f64::NAN } else { 1.0 - nfe.train / base_nfe };
        summary.push(vec![
            (*name).into(),
            lambda.into(),
            a.order.into(),
            a.regularizer.name().into(),
            a.solver.into(),
            f.loss.into(),
            f.reg.into(),
            nfe.train.into(),
            f.test_loss.into(),
            nfe.test.into(),
            reduction.into(),
        ])?;
        lines.push(format!(
            "{name:<11} lambda {lambda:<8} mse {:.3e}  R {:.3e}  NFE train {:.1} test {:.1}",
            f.loss, f.reg, nfe.train, nfe.test
        ));
    }
    if let Some((_, r)) = models.get(1) {
        lines.push(format!(
            "NFE reduction {:.1}%",
            100.0 * (1.0 - r.nfe[0].train / base_nfe)
        ));
    }
    out.table("trajectories", &traj)?;
    out.table("nfe_history", &history)?;
    out.table("summary", &summary)?;
    out.chart(
        "trajectories.svg",
        &Chart {
            title: "Learned trajectories at the adaptive solver's steps".into(),
            x_label: "t".into(),
            y_label: "z(t)".into(),
            log_x: false,
            series,
        },
    )?;
    let configs: serde_json::Map<String, serde_json::Value> =
        models.iter().map(|(n, f)| (n.to_string(), to_json(&f.config))).collect();
    Ok(Done {
        config: serde_json::json!({
            "models": configs,
            "nfe_solver": to_json(&sc),
        }),
        summary: lines,
        failure: None,
    })
}
