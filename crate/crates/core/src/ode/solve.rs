//! Fixed-grid and adaptive explicit Runge-Kutta integration.

use serde::{Deserialize, Serialize};

use super::tableau::{ButcherTableau, TableauId};
use crate::array::{eval_at, Array, Dynamics};
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Default absolute and relative tolerance.
pub const DEFAULT_TOL: f64 = 1.4e-8;

/// Step-size control parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tableau: TableauId,
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    pub max_steps: usize,
    /// First step size; `None` selects it automatically at a cost of two
    /// evaluations.
    pub initial_step: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tableau: TableauId::DormandPrince54,
            rtol: DEFAULT_TOL,
            atol: DEFAULT_TOL,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 10.0,
            max_steps: 100_000,
            initial_step: None,
        }
    }
}

impl SolveConfig {
    pub fn with_tableau(tableau: TableauId) -> Self {
        SolveConfig {
            tableau,
            ..SolveConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if !(0.0 < self.min_factor && self.min_factor < 1.0 && 1.0 < self.max_factor) {
            return Err(invalid("step factors must satisfy 0 < min < 1 < max"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(invalid("safety factor must lie in (0, 1]"));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(invalid("initial step must be positive"));
            }
        }
        Ok(())
    }
}

/// Evaluation accounting. `nfe = stages * (accepted + rejected) + initial_evals`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nfe: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Evaluations spent choosing the first step (0 or 2).
    pub initial_evals: usize,
    pub final_step: f64,
}

/// Accepted time stamps and states, starting at `t0` and ending at `t1`.
#[derive(Clone, Debug)]
pub struct Trajectory<A = Tensor> {
    pub times: Vec<f64>,
    pub states: Vec<A>,
}

impl<A> Trajectory<A> {
    fn start(t0: f64, z0: A) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![z0],
        }
    }

    fn push(&mut self, t: f64, z: A) {
        self.times.push(t);
        self.states.push(z);
    }
}

#[derive(Clone, Debug)]
pub struct Solution<A = Tensor> {
    pub z: A,
    pub trajectory: Trajectory<A>,
    pub stats: SolveStats,
}

/// Output of a single step.
#[derive(Clone, Debug)]
pub struct Step<A> {
    pub z_next: A,
    /// `h sum_i (b_i - b_err_i) k_i`; `None` without embedded weights.
    pub error: Option<A>,
    pub stages: Vec<A>,
}

/// One explicit Runge-Kutta step of size `h` from `(z, t)` for the field
/// `rhs(z, t)`. Adds the stage count to `stats.nfe`.
pub fn rk_step<A, F>(
    tab: &ButcherTableau,
    rhs: &mut F,
    z: &A,
    t: f64,
    h: f64,
    stats: &mut SolveStats,
) -> Result<Step<A>>
where
    A: Array,
    F: FnMut(&A, f64) -> Result<A>,
{
    let s = tab.stages();
    let mut stages: Vec<A> = Vec::with_capacity(s);
    for i in 0..s {
        let zi = combine(z, &tab.a[i], &stages, h)?;
        let k = rhs(&zi, t + tab.c[i] * h)?;
        stats.nfe += 1;
        if !k.primal().is_finite() {
            return Err(Error::NonFinite { t: t + tab.c[i] * h });
        }
        stages.push(k);
    }
    let z_next = combine(z, &tab.b, &stages, h)?;
    let error = match &tab.b_err {
        Some(be) => {
            let diff: Vec<f64> = tab.b.iter().zip(be).map(|(b, e)| b - e).collect();
            let zero = z.constant(&Tensor::zeros(&z.shape()));
            Some(combine(&zero, &diff, &stages, h)?)
        }
        None => None,
    };
    Ok(Step {
        z_next,
        error,
        stages,
    })
}

/// `z + h sum_j w_j k_j`, skipping zero weights.
fn combine<A: Array>(z: &A, w: &[f64], ks: &[A], h: f64) -> Result<A> {
    let mut acc: Option<A> = None;
    for (wj, k) in w.iter().zip(ks) {
        if *wj == 0.0 {
            continue;
        }
        let term = k.scale(h * wj);
        acc = Some(match acc {
            Some(a) => a.add(&term)?,
            None => term,
        });
    }
    match acc {
        Some(a) => z.add(&a),
        None => Ok(z.clone()),
    }
}

/// RMS over components of `err_i / (atol + rtol max(|z_i|, |z_next_i|))`.
pub fn error_norm(z: &Tensor, z_next: &Tensor, err: &Tensor, atol: f64, rtol: f64) -> f64 {
    let n = err.len().max(1);
    let sum: f64 = z
        .data()
        .iter()
        .zip(z_next.data())
        .zip(err.data())
        .map(|((a, b), e)| {
            let scale = atol + rtol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn rms_scaled(v: &Tensor, scale: &[f64]) -> f64 {
    let n = v.len().max(1);
    let s: f64 = v
        .data()
        .iter()
        .zip(scale)
        .map(|(x, s)| (x / s).powi(2))
        .sum();
    (s / n as f64).sqrt()
}

/// Automatic first step (Hairer, Norsett & Wanner), two evaluations.
///
/// When the trial Euler step shows no change in the field (`d2 ~ 0`), the
/// solution is locally linear and the whole interval is proposed.
fn initial_step<F>(
    rhs: &mut F,
    z0: &Tensor,
    f0: &Tensor,
    t0: f64,
    span: f64,
    error_order: usize,
    cfg: &SolveConfig,
) -> Result<f64>
where
    F: FnMut(&Tensor, f64) -> Result<Tensor>,
{
    let scale: Vec<f64> = z0
        .data()
        .iter()
        .map(|z| cfg.atol + cfg.rtol * z.abs())
        .collect();
    let d0 = rms_scaled(z0, &scale);
    let d1 = rms_scaled(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let z1 = z0.axpy(h0, f0)?;
    let f1 = rhs(&z1, t0 + h0)?;
    if !f1.is_finite() {
        return Err(Error::NonFinite { t: t0 + h0 });
    }
    let d2 = rms_scaled(&f1.sub(f0)?, &scale) / h0;
    if d2 <= 1e-15 {
        return Ok(span);
    }
    let h1 = (0.01 / d1.max(d2)).powf(1.0 / (error_order as f64 + 1.0));
    Ok((100.0 * h0).min(h1).min(span))
}

/// Adaptive solve of `dz/dt = rhs(z, t)` on `[t0, t1]`.
pub fn adaptive_solve_rhs<F>(
    mut rhs: F,
    z0: &Tensor,
    t0: f64,
    t1: f64,
    cfg: &SolveConfig,
) -> Result<Solution>
where
    F: FnMut(&Tensor, f64) -> Result<Tensor>,
{
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(invalid("adaptive solve needs t1 > t0"));
    }
    let tab = cfg.tableau.tableau();
    let err_order = tab
        .embedded_order
        .ok_or_else(|| invalid(format!("{} has no error estimate", tab.name)))?;
    let exponent = -1.0 / (err_order as f64 + 1.0);
    let span = t1 - t0;
    let mut stats = SolveStats::default();
    let mut h = match cfg.initial_step {
        Some(h) => h.min(span),
        None => {
            let f0 = rhs(z0, t0)?;
            if !f0.is_finite() {
                return Err(Error::NonFinite { t: t0 });
            }
            stats.initial_evals = 2;
            stats.nfe = 1;
            let h = initial_step(&mut rhs, z0, &f0, t0, span, err_order, cfg)?;
            stats.nfe = 2;
            h
        }
    };
    let mut t = t0;
    let mut z = z0.clone();
    let mut traj = Trajectory::start(t0, z0.clone());
    let eps = 4.0 * f64::EPSILON * t1.abs().max(t0.abs()).max(1.0);
    while t1 - t > eps {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                t,
                max_steps: cfg.max_steps,
                stats,
            });
        }
        let last = h >= t1 - t;
        if last {
            h = t1 - t;
        }
        let step = rk_step(&tab, &mut rhs, &z, t, h, &mut stats)?;
        let err = step.error.expect("adaptive tableau");
        let norm = error_norm(&z, &step.z_next, &err, cfg.atol, cfg.rtol);
        stats.final_step = h;
        if norm <= 1.0 {
            stats.accepted += 1;
            t = if last { t1 } else { t + h };
            z = step.z_next;
            if !z.is_finite() {
                return Err(Error::NonFinite { t });
            }
            traj.push(t, z.clone());
            let factor = if norm == 0.0 {
                cfg.max_factor
            } else {
                (cfg.safety * norm.powf(exponent)).clamp(cfg.min_factor, cfg.max_factor)
            };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (cfg.safety * norm.powf(exponent)).clamp(cfg.min_factor, 1.0);
        }
    }
    Ok(Solution {
        z,
        trajectory: traj,
        stats,
    })
}

/// Adaptive solve of `dz/dt = f(z, t)`.
pub fn adaptive_solve<D: Dynamics<Tensor>>(
    f: &D,
    z0: &Tensor,
    t0: f64,
    t1: f64,
    cfg: &SolveConfig,
) -> Result<Solution> {
    adaptive_solve_rhs(|z, t| eval_at(f, z, t), z0, t0, t1, cfg)
}

/// `n` equal steps from `t0` to `t1` (`n + 1` points, endpoints exact).
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| {
            if i == n {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / n as f64
            }
        })
        .collect()
}

/// One step per grid interval, generic over the carrier.
pub fn fixed_solve_rhs<A, F>(
    mut rhs: F,
    z0: &A,
    grid: &[f64],
    tab: &ButcherTableau,
) -> Result<Solution<A>>
where
    A: Array,
    F: FnMut(&A, f64) -> Result<A>,
{
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("grid must be non-empty and strictly increasing"));
    }
    let mut stats = SolveStats::default();
    let mut z = z0.clone();
    let mut traj = Trajectory::start(grid[0], z0.clone());
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        z = rk_step(tab, &mut rhs, &z, w[0], h, &mut stats)?.z_next;
        if !z.primal().is_finite() {
            return Err(Error::NonFinite { t: w[1] });
        }
        stats.accepted += 1;
        stats.final_step = h;
        traj.push(w[1], z.clone());
    }
    Ok(Solution {
        z,
        trajectory: traj,
        stats,
    })
}

/// Fixed-grid solve of `dz/dt = f(z, t)`.
pub fn fixed_solve<P, D, A>(f: &D, z0: &A, grid: &[f64], tab: &ButcherTableau) -> Result<Solution<A>>
where
    D: Dynamics<P>,
    A: Array<Param = P>,
{
    fixed_solve_rhs(|z: &A, t| eval_at(f, z, t), z0, grid, tab)
}
