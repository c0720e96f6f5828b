//! Solves with a running regularizer integral appended to the state.
//!
//! The state `[z ; r]` evolves as `dz/dt = f(z, t)`, `dr/dt = |v|^2 / d`
//! with `r(t0) = 0`, where `v` is one of
//!
//! * `d^K z / dt^K` along the solution (Taylor),
//! * `f(z, t)` itself (kinetic),
//! * `eps^T (df/dz)` for a fixed probe `eps` (Jacobian).
//!
//! so `r(t1)` is the dimension-normalized integral, computed by the same
//! solver steps as `z`.

use serde::{Deserialize, Serialize};

use super::solve::{adaptive_solve_rhs, fixed_solve_rhs, SolveConfig, SolveStats};
use super::tableau::TableauId;
use crate::array::{eval_at, Dynamics, Reduce};
use crate::error::{invalid, Result};
use crate::taylor::ode_taylor_coefficients;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Integrand {
    Taylor { order: usize },
    Kinetic,
    /// `eps` has the shape of the state batch.
    Jacobian { eps: Tensor },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Adaptive(SolveConfig),
    Fixed { grid: Vec<f64>, tableau: TableauId },
}

#[derive(Clone, Debug)]
pub struct RegularizedSolution<A = Tensor> {
    pub z: A,
    /// Per-example integral, `[B, 1]`.
    pub reg: A,
    pub stats: SolveStats,
}

impl RegularizedSolution {
    /// Batch mean of the regularizer.
    pub fn mean_reg(&self) -> f64 {
        self.reg.data().iter().sum::<f64>() / self.reg.len().max(1) as f64
    }
}

/// Right-hand side of the augmented system at `x = [z ; r]`.
pub fn augmented_rhs<A, D>(f: &D, integrand: &Integrand, x: &A, t: f64, dim: usize) -> Result<A>
where
    A: Reduce,
    D: Dynamics<A>,
{
    let z = x.take_cols(0, dim)?;
    let (fz, v) = match integrand {
        Integrand::Taylor { order } => {
            let xs = ode_taylor_coefficients(f, &z, t, *order)?;
            (xs[1].clone(), xs[*order].clone())
        }
        Integrand::Kinetic => {
            let fz = eval_at(f, &z, t)?;
            (fz.clone(), fz)
        }
        Integrand::Jacobian { eps } => {
            let rows = z.shape()[0];
            let tcol = z.constant(&Tensor::full(&[rows, 1], t));
            let fz = f.eval(&z, &tcol)?;
            let v = f.vjp_z(&z, &tcol, &z.constant(eps))?;
            (fz, v)
        }
    };
    let r = v.mul(&v)?.row_sum()?.scale(1.0 / dim as f64);
    fz.concat_cols(&r)
}

fn validate(integrand: &Integrand) -> Result<()> {
    match integrand {
        Integrand::Taylor { order: 0 } => Err(invalid("regularizer order must be at least 1")),
        _ => Ok(()),
    }
}

/// Fixed-grid regularized solve, generic over the carrier so it can be
/// recorded for reverse mode.
pub fn regularized_fixed<A, D>(
    f: &D,
    z0: &A,
    grid: &[f64],
    tableau: TableauId,
    integrand: &Integrand,
) -> Result<RegularizedSolution<A>>
where
    A: Reduce,
    D: Dynamics<A>,
{
    validate(integrand)?;
    let shape = z0.shape();
    let (rows, dim) = (shape[0], shape[1]);
    let x0 = z0.concat_cols(&z0.constant(&Tensor::zeros(&[rows, 1])))?;
    let tab = tableau.tableau();
    let sol = fixed_solve_rhs(
        |x: &A, t| augmented_rhs(f, integrand, x, t, dim),
        &x0,
        grid,
        &tab,
    )?;
    Ok(RegularizedSolution {
        z: sol.z.take_cols(0, dim)?,
        reg: sol.z.take_cols(dim, 1)?,
        stats: sol.stats,
    })
}

/// Regularized solve on `[t0, t1]` in either mode. For fixed mode the grid
/// must run from `t0` to `t1`.
pub fn solve_with_regularizer<D: Dynamics<Tensor>>(
    f: &D,
    z0: &Tensor,
    t0: f64,
    t1: f64,
    integrand: &Integrand,
    mode: &SolveMode,
) -> Result<RegularizedSolution> {
    validate(integrand)?;
    match mode {
        SolveMode::Fixed { grid, tableau } => {
            if grid.first() != Some(&t0) || grid.last() != Some(&t1) {
                return Err(invalid("grid must start at t0 and end at t1"));
            }
            regularized_fixed(f, z0, grid, *tableau, integrand)
        }
        SolveMode::Adaptive(cfg) => {
            let (rows, dim) = z0.dims2("solve_with_regularizer")?;
            let x0 = z0.concat_cols(&Tensor::zeros(&[rows, 1]))?;
            let sol = adaptive_solve_rhs(
                |x: &Tensor, t| augmented_rhs(f, integrand, x, t, dim),
                &x0,
                t0,
                t1,
                cfg,
            )?;
            Ok(RegularizedSolution {
                z: sol.z.take_cols(0, dim)?,
                reg: sol.z.take_cols(dim, 1)?,
                stats: sol.stats,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::ode::uniform_grid;

    fn one() -> Tensor {
        Tensor::matrix(1, 1, vec![1.0]).unwrap()
    }

    fn r1_exact() -> f64 {
        (std::f64::consts::E.powi(2) - 1.0) / 2.0
    }

    #[test]
    fn taylor_orders_on_exponential() {
        let mode = SolveMode::Adaptive(SolveConfig::default());
        for k in [1, 2, 3] {
            let sol = solve_with_regularizer(
                &Expr::Input,
                &one(),
                0.0,
                1.0,
                &Integrand::Taylor { order: k },
                &mode,
            )
            .unwrap();
            assert!((sol.mean_reg() - r1_exact()).abs() < 1e-6, "K = {k}");
        }
    }

    #[test]
    fn kinetic_matches_first_order() {
        let mode = SolveMode::Adaptive(SolveConfig::default());
        let sol =
            solve_with_regularizer(&Expr::Input, &one(), 0.0, 1.0, &Integrand::Kinetic, &mode)
                .unwrap();
        assert!((sol.mean_reg() - r1_exact()).abs() < 1e-6);
    }

    #[test]
    fn straight_lines_cost_nothing() {
        let mode = SolveMode::Fixed {
            grid: uniform_grid(0.0, 1.0, 8),
            tableau: TableauId::Rk4,
        };
        let z0 = Tensor::matrix(2, 2, vec![1.0, -1.0, 0.5, 3.0]).unwrap();
        let sol = solve_with_regularizer(
            &Expr::Const(0.7),
            &z0,
            0.0,
            1.0,
            &Integrand::Taylor { order: 2 },
            &mode,
        )
        .unwrap();
        assert_eq!(sol.reg, Tensor::zeros(&[2, 1]));
    }

    #[test]
    fn order_zero_is_rejected() {
        let mode = SolveMode::Adaptive(SolveConfig::default());
        assert!(solve_with_regularizer(
            &Expr::Input,
            &one(),
            0.0,
            1.0,
            &Integrand::Taylor { order: 0 },
            &mode
        )
        .is_err());
    }
}
