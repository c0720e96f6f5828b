use anyhow::Result;

use jetode_core::expr::Expr;
use jetode_core::ode::{adaptive_solve, SolveConfig, TableauId};
use jetode_core::Tensor;

use super::{to_json, Done, Outputs};
use crate::args::NfeGridArgs;
use crate::svg::{Chart, Series};
use crate::table::Table;
use crate::usage;

/// `p'(t)` for `p(t) = 1 + t + ... + t^degree`, by Horner's rule.
pub fn polynomial_rate(degree: usize) -> Expr {
    (1..=degree).rev().fold(Expr::Const(0.0), |acc, i| {
        Expr::binary("add", Expr::binary("mul", acc, Expr::Time), Expr::Const(i as f64))
    })
}

/// Degree whose step count grew most, relative to the previous degree.
/// Ties go to the lowest degree.
pub fn largest_jump(accepted: &[usize]) -> Option<usize> {
    (1..accepted.len())
        .map(|k| (k, accepted[k] as f64 / accepted[k - 1] as f64))
        .fold(None, |best: Option<(usize, f64)>, (k, r)| match best {
            Some((_, b)) if b >= r => best,
            _ => Some((k, r)),
        })
        .map(|(k, _)| k)
}

pub(super) fn run(a: &NfeGridArgs, out: &mut Outputs) -> Result<Done> {
    if a.max_degree == 0 {
        return Err(usage("--max-degree must be at least 1"));
    }
    if a.solvers.is_empty() {
        return Err(usage("--solvers must name at least one solver"));
    }
    let initial_step = if a.auto_initial_step {
        None
    } else {
        Some(a.initial_step.unwrap_or(1.0))
    };
    let mut grid = Table::new(&[
        "solver_order",
        "solver",
        "degree",
        "accepted",
        "rejected",
        "nfe",
        "jump",
    ])?;
    let mut pattern = Table::new(&["solver_order", "solver", "largest_jump_degree", "matches_order"])?;
    let z0 = Tensor::matrix(1, 1, vec![1.0])?;
    let mut configs = Vec::new();
    let mut series = Vec::new();
    let mut lines = Vec::new();
    for &m in &a.solvers {
        let id = TableauId::adaptive_of_order(m)?;
        let cfg = SolveConfig {
            rtol: a.rtol,
            atol: a.atol,
            initial_step,
            ..SolveConfig::with_tableau(id)
        };
        cfg.validate().map_err(usage)?;
        let mut accepted = Vec::new();
        for degree in 0..=a.max_degree {
            let sol = adaptive_solve(&polynomial_rate(degree), &z0, 0.0, 1.0, &cfg)?;
            let s = sol.stats;
            let jump = accepted
                .last()
                .map_or(f64::NAN, |&prev| s.accepted as f64 / prev as f64);
            accepted.push(s.accepted);
            grid.push(vec![
                m.into(),
                id.name().into(),
                degree.into(),
                s.accepted.into(),
                s.rejected.into(),
                s.nfe.into(),
                jump.into(),
            ])?;
        }
        let k = largest_jump(&accepted).expect("at least two degrees");
        pattern.push(vec![m.into(), id.name().into(), k.into(), (k == m).into()])?;
        lines.push(format!("{:<19} accepted {accepted:?}  largest jump at degree {k}", id.name()));
        series.push(Series {
            name: id.name().into(),
            points: accepted.iter().enumerate().map(|(k, &n)| (k as f64, n as f64)).collect(),
            scatter: false,
            color: None,
        });
        configs.push(cfg);
    }
    out.table("grid", &grid)?;
    out.table("pattern", &pattern)?;
    out.chart(
        "grid.svg",
        &Chart {
            title: "Accepted steps by trajectory degree".into(),
            x_label: "degree of the polynomial trajectory".into(),
            y_label: "accepted steps".into(),
            log_x: false,
            series,
        },
    )?;
    Ok(Done {
        config: serde_json::json!({ "solvers": to_json(&configs), "t0": 0.0, "t1": 1.0, "z0": 1.0 }),
        summary: lines,
        failure: None,
    })
}
