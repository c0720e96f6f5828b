//! λ sweeps: one (K, solver) frontier, or a study across orders.

use anyhow::Result;

use jetode_core::node::{lambda_grid, RegKind, Task};

use super::{fit, to_json, Done, Fitted, Outputs};
use crate::args::{LambdaRange, OrderStudyArgs, SweepArgs, TrainArgs};
use crate::stats::{covers, frontier_holds, nfe_at_budget, spearman, Point};
use crate::svg::{Chart, Series};
use crate::table::Table;
use crate::usage;

/// The λ values of a range: a single point when the bounds coincide
/// (which admits λ = 0), otherwise a logarithmic grid.
pub fn sweep_grid(r: &LambdaRange) -> Result<Vec<f64>> {
    if r.lambda_min == r.lambda_max && r.lambda_min >= 0.0 && r.lambda_min.is_finite() {
        return Ok(vec![r.lambda_min]);
    }
    lambda_grid(r.lambda_min, r.lambda_max, r.per_decade).map_err(usage)
}

/// Final metrics at one λ; `status` is `ok` or the training error.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub lambda: f64,
    pub status: String,
    pub loss: f64,
    pub reg: f64,
    /// `(solver order, train NFE, test NFE)`.
    pub nfe: Vec<(usize, f64, f64)>,
}

impl SweepRow {
    fn from_fit(lambda: f64, solvers: &[usize], fitted: Result<Fitted>) -> Self {
        match fitted {
            Ok(f) => SweepRow {
                lambda,
                status: "ok".into(),
                loss: f.loss,
                reg: f.reg,
                nfe: f.nfe.iter().map(|n| (n.solver, n.train, n.test)).collect(),
            },
            Err(e) => SweepRow {
                lambda,
                status: format!("failed: {e:#}"),
                loss: f64::NAN,
                reg: f64::NAN,
                nfe: solvers.iter().map(|&m| (m, f64::NAN, f64::NAN)).collect(),
            },
        }
    }

    fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn nfe(&self, solver: usize) -> (f64, f64) {
        self.nfe
            .iter()
            .find(|n| n.0 == solver)
            .map_or((f64::NAN, f64::NAN), |n| (n.1, n.2))
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep_rows(
    train: &TrainArgs,
    task: Task,
    seed: u64,
    reg: RegKind,
    order: usize,
    grid: &[f64],
    solvers: &[usize],
) -> Vec<SweepRow> {
    grid.iter()
        .map(|&lambda| {
            let row = SweepRow::from_fit(lambda, solvers, fit(train, task, seed, reg, order, lambda, solvers));
            let nfe: Vec<String> = row.nfe.iter().map(|n| format!("m{} {:.1}", n.0, n.1)).collect();
            eprintln!(
                "K {order} lambda {lambda:.4e}  {}  loss {:.3e}  R {:.3e}  NFE {}",
                row.status,
                row.loss,
                row.reg,
                nfe.join(" ")
            );
            row
        })
        .collect()
}

fn pareto_table(rows: &[SweepRow], solver: usize) -> Result<Table> {
    let mut t = Table::new(&["lambda", "status", "loss", "reg", "nfe", "test_nfe"])?;
    for r in rows {
        let (nfe, test) = r.nfe(solver);
        t.push(vec![
            r.lambda.into(),
            r.status.as_str().into(),
            r.loss.into(),
            r.reg.into(),
            nfe.into(),
            test.into(),
        ])?;
    }
    Ok(t)
}

fn points(rows: &[SweepRow], solver: usize) -> Vec<Point> {
    rows.iter()
        .filter(|r| r.ok())
        .map(|r| Point {
            loss: r.loss,
            nfe: r.nfe(solver).0,
        })
        .collect()
}

/// Spearman correlation of final `R_K` with final NFE over successful rows.
fn reg_nfe_spearman(rows: &[SweepRow], solver: usize) -> f64 {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    let reg: Vec<f64> = ok.iter().map(|r| r.reg).collect();
    let nfe: Vec<f64> = ok.iter().map(|r| r.nfe(solver).0).collect();
    spearman(&reg, &nfe)
}

/// Pairs `(i < j)` of successful rows whose NFE rises with λ.
fn nfe_inversions(rows: &[SweepRow], solver: usize) -> usize {
    let nfe: Vec<f64> = rows.iter().filter(|r| r.ok()).map(|r| r.nfe(solver).0).collect();
    (0..nfe.len())
        .flat_map(|i| (i + 1..nfe.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| nfe[j] > nfe[i])
        .count()
}

fn resolve_train(train: &TrainArgs) -> Result<TrainArgs> {
    let t = train.with_default_epochs(TrainArgs::SWEEP_EPOCHS);
    if t.epochs == Some(0) || !(t.lr > 0.0) {
        return Err(usage("--epochs and --lr must be positive"));
    }
    Ok(t)
}

pub(super) fn run_sweep(a: &SweepArgs, out: &mut Outputs) -> Result<Done> {
    let train = resolve_train(&a.train)?;
    let grid = sweep_grid(&a.range)?;
    // Surface configuration errors before training anything.
    train
        .config(a.task, a.common.seed, a.regularizer, a.order, grid[0], a.solver)
        .map_err(usage)?;
    let mut lines = Vec::new();
    let rows = sweep_rows(
        &train,
        a.task,
        a.common.seed,
        a.regularizer,
        a.order,
        &grid,
        &[a.solver],
    );
    let rho = reg_nfe_spearman(&rows, a.solver);
    let inversions = nfe_inversions(&rows, a.solver);
    let failed = rows.iter().filter(|r| !r.ok()).count();
    let mut summary = Table::new(&[
        "task",
        "solver_order",
        "order",
        "regularizer",
        "points",
        "failed",
        "spearman_reg_nfe",
        "nfe_inversions",
    ])?;
    summary.push(vec![
        a.task.name().into(),
        a.solver.into(),
        a.order.into(),
        a.regularizer.name().into(),
        rows.len().into(),
        failed.into(),
        rho.into(),
        inversions.into(),
    ])?;
    lines.push(format!("Spearman(R, NFE) {rho:.4}  NFE inversions {inversions}"));
    out.table("pareto", &pareto_table(&rows, a.solver)?)?;
    out.table("summary", &summary)?;
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    out.chart(
        "tradeoff.svg",
        &Chart {
            title: format!("Final NFE and loss across lambda (K = {})", a.order),
            x_label: "lambda".into(),
            y_label: "NFE (scaled loss: NFE of the first point)".into(),
            log_x: true,
            series: vec![
                Series {
                    name: "NFE".into(),
                    points: ok.iter().map(|r| (r.lambda, r.nfe(a.solver).0)).collect(),
                    scatter: false,
                    color: None,
                },
                Series {
                    name: "loss (scaled)".into(),
                    points: scaled_loss(&ok, a.solver),
                    scatter: false,
                    color: None,
                },
            ],
        },
    )?;
    let cfg = train.config(a.task, a.common.seed, a.regularizer, a.order, 0.0, a.solver)?;
    Ok(Done {
        config: serde_json::json!({ "lambdas": grid, "train": to_json(&cfg) }),
        summary: lines,
        failure: None,
    })
}

/// Loss rescaled so that the first point shares the first point's NFE.
fn scaled_loss(rows: &[&SweepRow], solver: usize) -> Vec<(f64, f64)> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let s = first.nfe(solver).0 / first.loss;
    rows.iter().map(|r| (r.lambda, r.loss * s)).collect()
}

pub(super) fn run_order_study(a: &OrderStudyArgs, out: &mut Outputs) -> Result<Done> {
    let train = resolve_train(&a.train)?;
    if a.orders.is_empty() || a.solvers.is_empty() {
        return Err(usage("--orders and --solvers must be nonempty"));
    }
    if a.orders.contains(&0) {
        return Err(usage("regularizer orders start at 1"));
    }
    let grid = sweep_grid(&a.range)?;
    let seed = a.common.seed;
    train
        .config(a.task, seed, RegKind::Taylor, a.orders[0], grid[0], a.solvers[0])
        .map_err(usage)?;
    let mut lines = Vec::new();
    let study: Vec<(usize, Vec<SweepRow>)> = a
        .orders
        .iter()
        .map(|&k| {
            let rows = sweep_rows(&train, a.task, seed, RegKind::Taylor, k, &grid, &a.solvers);
            (k, rows)
        })
        .collect();

    let mut spear = Table::new(&["solver_order", "order", "points", "spearman_reg_nfe", "nfe_inversions"])?;
    let mut dominance = Table::new(&["solver_order", "base_order", "other_order", "frontier_holds", "covers"])?;
    let mut knee = Table::new(&["solver_order", "order", "loss_budget", "nfe_at_budget", "best"])?;
    for &m in &a.solvers {
        let mut series = Vec::new();
        for (k, rows) in &study {
            out.table(&format!("pareto_m{m}_k{k}"), &pareto_table(rows, m)?)?;
            let rho = reg_nfe_spearman(rows, m);
            spear.push(vec![
                m.into(),
                (*k).into(),
                rows.iter().filter(|r| r.ok()).count().into(),
                rho.into(),
                nfe_inversions(rows, m).into(),
            ])?;
            lines.push(format!("solver order {m} K {k}: Spearman(R, NFE) {rho:.4}"));
            series.push(Series {
                name: format!("K = {k}"),
                points: points(rows, m).iter().map(|p| (p.loss, p.nfe)).collect(),
                scatter: true,
                color: None,
            });
        }
        for (kb, base) in &study {
            for (ko, other) in &study {
                if kb == ko {
                    continue;
                }
                let (pb, po) = (points(base, m), points(other, m));
                dominance.push(vec![
                    m.into(),
                    (*kb).into(),
                    (*ko).into(),
                    frontier_holds(&pb, &po).into(),
                    covers(&pb, &po).into(),
                ])?;
            }
        }
        let at_budget: Vec<(usize, Option<f64>)> = study
            .iter()
            .map(|(k, rows)| (*k, nfe_at_budget(&points(rows, m), a.loss_budget)))
            .collect();
        let best = at_budget
            .iter()
            .filter_map(|(k, n)| n.map(|n| (*k, n)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(k, _)| k);
        for (k, n) in &at_budget {
            knee.push(vec![
                m.into(),
                (*k).into(),
                a.loss_budget.into(),
                n.unwrap_or(f64::NAN).into(),
                (Some(*k) == best).into(),
            ])?;
        }
        match best {
            Some(k) => lines.push(format!("solver order {m}: lowest NFE within the loss budget at K = {k}")),
            None => lines.push(format!("solver order {m}: no point within the loss budget")),
        }
        out.chart(
            &format!("frontier_m{m}.svg"),
            &Chart {
                title: format!("Loss against NFE, solver order {m}"),
                x_label: "final training loss".into(),
                y_label: "final adaptive NFE".into(),
                log_x: true,
                series,
            },
        )?;
    }
    out.table("spearman", &spear)?;
    out.table("dominance", &dominance)?;
    out.table("knee", &knee)?;
    let cfg = train.config(a.task, seed, RegKind::Taylor, a.orders[0], 0.0, a.solvers[0])?;
    Ok(Done {
        config: serde_json::json!({ "lambdas": grid, "orders": a.orders, "solvers": a.solvers, "train": to_json(&cfg) }),
        summary: lines,
        failure: None,
    })
}
