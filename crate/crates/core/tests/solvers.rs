use std::cell::Cell;

use jetode_core::expr::Expr;
use jetode_core::ode::{
    adaptive_solve, error_norm, fixed_solve, rk_step, solve_with_regularizer, uniform_grid,
    ButcherTableau, Integrand, SolveConfig, SolveMode, SolveStats, TableauId,
};
use jetode_core::rng::RngState;
use jetode_core::{eval_at, Array, Dynamics, Result, Tensor};

fn scalar(v: f64) -> Tensor {
    Tensor::matrix(1, 1, vec![v]).unwrap()
}

fn oscillator() -> Expr {
    Expr::Linear {
        w: Tensor::matrix(2, 2, vec![0.0, 1.0, -1.0, 0.0]).unwrap(),
        b: None,
        arg: Box::new(Expr::Input),
    }
}

/// `p'(t)` by Horner's rule for `p(t) = sum c_i t^i`.
fn poly_rate(c: &[f64]) -> Expr {
    (1..c.len()).rev().fold(Expr::Const(0.0), |acc, i| {
        Expr::binary(
            "add",
            Expr::binary("mul", acc, Expr::Time),
            Expr::Const(i as f64 * c[i]),
        )
    })
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * t + ci)
}

fn global_error(f: &Expr, z0: &Tensor, exact: &Tensor, tab: &ButcherTableau, n: usize) -> f64 {
    let sol = fixed_solve(f, z0, &uniform_grid(0.0, 1.0, n), tab).unwrap();
    sol.z.sub(exact).unwrap().max_abs()
}

#[test]
fn empirical_orders_match_nominal() {
    let e = (Expr::Input, scalar(1.0), scalar(1f64.exp()));
    let osc = (
        oscillator(),
        Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap(),
        Tensor::matrix(1, 2, vec![1f64.cos(), -1f64.sin()]).unwrap(),
    );
    for id in TableauId::ALL {
        let tab = id.tableau();
        let n = if tab.order >= 5 { 10 } else { 16 };
        for (f, z0, exact) in [&e, &osc] {
            let coarse = global_error(f, z0, exact, &tab, n);
            let fine = global_error(f, z0, exact, &tab, 2 * n);
            let order = (coarse / fine).log2();
            assert!(
                (order - tab.order as f64).abs() <= 0.3,
                "{}: empirical order {order}",
                tab.name
            );
        }
    }
}

#[test]
fn polynomial_solutions_are_exact_per_step() {
    let mut rng = RngState::new(17);
    for id in TableauId::ALL {
        let tab = id.tableau();
        for degree in 0..=tab.order {
            for _ in 0..5 {
                let c: Vec<f64> = (0..=degree).map(|_| rng.normal_f64()).collect();
                let (t0, h) = (rng.normal_f64(), 0.5 + rng.next_f64());
                let f = poly_rate(&c);
                let mut rhs = |z: &Tensor, t: f64| eval_at(&f, z, t);
                let z0 = scalar(poly(&c, t0));
                let mut stats = SolveStats::default();
                let step = rk_step(&tab, &mut rhs, &z0, t0, h, &mut stats).unwrap();
                let exact = poly(&c, t0 + h);
                let err = (step.z_next.data()[0] - exact).abs();
                assert!(err <= 1e-12 * exact.abs().max(1.0), "{} degree {degree}: {err:e}", tab.name);
                assert_eq!(stats.nfe, tab.stages());
            }
        }
    }
}

#[test]
fn step_examples() {
    let mut stats = SolveStats::default();
    let dp = TableauId::DormandPrince54.tableau();
    let mut lin = |z: &Tensor, t: f64| eval_at(&Expr::Input, z, t);
    let s = rk_step(&dp, &mut lin, &scalar(1.0), 0.0, 0.1, &mut stats).unwrap();
    assert!((s.z_next.data()[0] - 0.1f64.exp()).abs() < 1e-9);

    let rk4 = TableauId::Rk4.tableau();
    let mut quad = |z: &Tensor, t: f64| eval_at(&poly_rate(&[0.0, 0.0, 0.0, 1.0]), z, t);
    let s = rk_step(&rk4, &mut quad, &scalar(0.0), 0.0, 1.0, &mut stats).unwrap();
    assert_eq!(s.z_next.data()[0], 1.0);
    assert!(s.error.is_none());

    let n = error_norm(&scalar(0.0), &scalar(0.0), &scalar(1e-8), 1.4e-8, 1.4e-8);
    assert!((n - 1.0 / 1.4).abs() < 1e-12);
}

/// Counts every evaluation of the wrapped dynamics.
struct Counting<'a> {
    inner: &'a Expr,
    calls: Cell<usize>,
}

impl<P> Dynamics<P> for Counting<'_> {
    fn eval<A: Array<Param = P>>(&self, z: &A, t: &A) -> Result<A> {
        self.calls.set(self.calls.get() + 1);
        Dynamics::<P>::eval(self.inner, z, t)
    }
}

#[test]
fn nfe_accounting_is_exact() {
    let systems = [
        (Expr::Input, scalar(1.0)),
        (oscillator(), Tensor::matrix(1, 2, vec![0.3, -1.0]).unwrap()),
        (Expr::unary("sin", Expr::binary("mul", Expr::Input, Expr::Time)), scalar(2.0)),
    ];
    for id in [TableauId::Heun21, TableauId::BogackiShampine32, TableauId::DormandPrince54] {
        for (f, z0) in &systems {
            let counting = Counting {
                inner: f,
                calls: Cell::new(0),
            };
            let cfg = SolveConfig {
                rtol: 1e-6,
                atol: 1e-6,
                ..SolveConfig::with_tableau(id)
            };
            let s = adaptive_solve(&counting, z0, 0.0, 3.0, &cfg).unwrap().stats;
            let stages = id.tableau().stages();
            assert_eq!(s.nfe, counting.calls.get());
            assert_eq!(s.nfe, stages * (s.accepted + s.rejected) + s.initial_evals);
            assert_eq!(s.initial_evals, 2);
        }
    }
}

#[test]
fn trivial_and_straight_dynamics_take_one_step() {
    for id in [TableauId::Heun21, TableauId::BogackiShampine32, TableauId::DormandPrince54] {
        let cfg = SolveConfig::with_tableau(id);
        for f in [Expr::Const(0.0), Expr::Const(-1.5)] {
            let sol = adaptive_solve(&f, &scalar(0.7), 0.0, 1.0, &cfg).unwrap();
            assert_eq!((sol.stats.accepted, sol.stats.rejected), (1, 0));
        }
    }
}

#[test]
fn adaptive_accuracy_and_tolerance_monotonicity() {
    let cfg = SolveConfig::default();
    let sol = adaptive_solve(&Expr::Input, &scalar(1.0), 0.0, 1.0, &cfg).unwrap();
    let e = 1f64.exp();
    assert!((sol.z.data()[0] - e).abs() / e < 1e-7);
    assert_eq!(sol.trajectory.times.first(), Some(&0.0));
    assert_eq!(sol.trajectory.times.last(), Some(&1.0));
    assert!(sol.trajectory.times.windows(2).all(|w| w[0] < w[1]));

    let osc_z0 = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
    for id in [TableauId::Heun21, TableauId::BogackiShampine32, TableauId::DormandPrince54] {
        let loose = SolveConfig {
            rtol: 1e-5,
            atol: 1e-5,
            ..SolveConfig::with_tableau(id)
        };
        let tight = SolveConfig {
            rtol: 1e-7,
            atol: 1e-7,
            ..loose.clone()
        };
        for (f, z0) in [(Expr::Input, scalar(1.0)), (oscillator(), osc_z0.clone())] {
            let a = adaptive_solve(&f, &z0, 0.0, 2.0, &loose).unwrap().stats.nfe;
            let b = adaptive_solve(&f, &z0, 0.0, 2.0, &tight).unwrap().stats.nfe;
            assert!(b >= a, "{id:?}: {b} < {a}");
        }
    }
}

#[test]
fn global_error_stays_within_hundredfold_tolerance() {
    let tol = 1.4e-8;
    let osc_z0 = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
    let t1: f64 = 2.0;
    let osc_exact = [t1.cos(), -t1.sin()];
    for id in [TableauId::BogackiShampine32, TableauId::DormandPrince54] {
        let cfg = SolveConfig::with_tableau(id);
        let e = adaptive_solve(&Expr::Input, &scalar(1.0), 0.0, t1, &cfg).unwrap();
        let exact = t1.exp();
        assert!((e.z.data()[0] - exact).abs() <= 100.0 * tol * exact);
        let o = adaptive_solve(&oscillator(), &osc_z0, 0.0, t1, &cfg).unwrap();
        for (got, want) in o.z.data().iter().zip(osc_exact) {
            assert!((got - want).abs() <= 100.0 * tol, "{id:?}");
        }
    }
}

#[test]
fn regularizer_integrals() {
    let want = (1f64.exp().powi(2) - 1.0) / 2.0;
    let z0 = scalar(1.0);
    let modes = [
        SolveMode::Adaptive(SolveConfig::default()),
        SolveMode::Fixed {
            grid: uniform_grid(0.0, 1.0, 200),
            tableau: TableauId::Rk4,
        },
    ];
    for mode in &modes {
        for integ in [
            Integrand::Taylor { order: 1 },
            Integrand::Taylor { order: 2 },
            Integrand::Kinetic,
        ] {
            let r = solve_with_regularizer(&Expr::Input, &z0, 0.0, 1.0, &integ, mode).unwrap();
            assert!((r.mean_reg() - want).abs() < 1e-6, "{integ:?}");
        }
        let flat =
            solve_with_regularizer(&Expr::Const(2.0), &z0, 0.0, 1.0, &Integrand::Taylor { order: 2 }, mode)
                .unwrap();
        assert_eq!(flat.mean_reg(), 0.0);
    }
}
