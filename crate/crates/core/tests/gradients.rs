use jetode_core::node::{
    fd_gradient, objective, objective_grad, relative_error, train, Mlp, Model, ObjectiveSpec,
    RegKind, Task, TrainConfig,
};
use jetode_core::ode::{uniform_grid, SolveMode, TableauId};
use jetode_core::rng::{self, RngState};
use jetode_core::tape::{record, vjp, Tape};
use jetode_core::{eval_at, Array, Autonomous, Dynamics, Reduce, Tensor};

const FD_STEP: f64 = 1e-5;

fn spec(regularizer: RegKind, order: usize, lambda: f64) -> ObjectiveSpec {
    ObjectiveSpec {
        lambda,
        order,
        regularizer,
        mode: SolveMode::Fixed {
            grid: uniform_grid(0.0, 1.0, 8),
            tableau: TableauId::Rk4,
        },
        t1: 1.0,
    }
}

fn check(task: Task, hidden: usize, seed: u64, spec: &ObjectiveSpec) -> f64 {
    let root = RngState::new(seed);
    let model = Model::init(task, hidden, &mut root.fork(0));
    let data = task.generate(&mut root.fork(1), 3).unwrap();
    let eps = root.fork(2);
    let (diag, grad) = objective_grad(&model, &data, spec, &eps).unwrap();
    let plain = objective(&model, &data, spec, &eps).unwrap();
    assert!((diag.objective - plain.objective).abs() <= 1e-12 * plain.objective.abs().max(1.0));
    let fd = fd_gradient(&model, &data, spec, &eps, FD_STEP).unwrap();
    relative_error(&grad, &fd).unwrap()
}

#[test]
fn loss_and_taylor_objective_match_finite_differences() {
    for seed in [1, 2] {
        for (task, hidden) in [(Task::ToyMap, 8), (Task::Spirals, 4)] {
            for lambda in [0.0, 0.1] {
                for order in [2, 3] {
                    let e = check(task, hidden, seed, &spec(RegKind::Taylor, order, lambda));
                    assert!(e < 1e-5, "{task:?} seed {seed} lambda {lambda} K {order}: {e:e}");
                }
            }
        }
    }
}

#[test]
fn every_regularizer_matches_finite_differences() {
    for seed in [1, 2] {
        for order in 1..=4 {
            let e = check(Task::Spirals, 3, seed, &spec(RegKind::Taylor, order, 1.0));
            assert!(e < 1e-5, "R_{order} seed {seed}: {e:e}");
        }
        for kind in [RegKind::Kinetic, RegKind::Jacobian] {
            let e = check(Task::Spirals, 3, seed, &spec(kind, 2, 0.5));
            assert!(e < 1e-5, "{kind:?} seed {seed}: {e:e}");
        }
    }
}

#[test]
fn tanh_layer_gradient_matches_finite_differences() {
    let mut rng = RngState::new(4);
    let x = rng::normal(&mut rng, &[3, 4]);
    let w = rng::normal(&mut rng, &[5, 4]);
    let b = rng::normal(&mut rng, &[5]);
    let value = |w: &Tensor| x.linear(w, Some(&b)).unwrap().tanh().sum().item().unwrap();
    let rec = record(std::slice::from_ref(&w), |vs| {
        let x = vs[0].constant(&x);
        let b = vs[0].constant(&b);
        Ok(x.linear(&vs[0], Some(&b))?.tanh().sum())
    })
    .unwrap();
    let g = rec.gradients().unwrap().remove(0);
    let mut fd = Tensor::zeros(&[5, 4]);
    for j in 0..w.len() {
        let (mut up, mut down) = (w.clone(), w.clone());
        up.data_mut()[j] += FD_STEP;
        down.data_mut()[j] -= FD_STEP;
        fd.data_mut()[j] = (value(&up) - value(&down)) / (2.0 * FD_STEP);
    }
    assert!(relative_error(&[g], &[fd]).unwrap() < 1e-6);
}

#[test]
fn mlp_vjp_matches_directional_differences() {
    let mut rng = RngState::new(8);
    let mlp = Mlp::init(&mut rng, 3, 6);
    let z = rng::normal(&mut rng, &[2, 3]);
    let v = rng::normal(&mut rng, &[2, 3]);
    let u = rng::normal(&mut rng, &[2, 3]);
    let t = 0.4;
    let h = 1e-5;
    let f = |z: &Tensor| eval_at(&mlp, z, t).unwrap();
    let df = f(&z.axpy(h, &u).unwrap())
        .sub(&f(&z.axpy(-h, &u).unwrap()))
        .unwrap()
        .scale(0.5 / h);
    let want = v.mul(&df).unwrap().sum().item().unwrap();

    let tcol = Tensor::full(&[2, 1], t);
    let explicit = mlp.vjp_z(&z, &tcol, &v).unwrap();
    let got = explicit.mul(&u).unwrap().sum().item().unwrap();
    assert!((got - want).abs() < 1e-6);

    let aug = Autonomous::new(&mlp, 3);
    let x = z.concat_cols(&tcol).unwrap();
    let v_aug = v.concat_cols(&Tensor::zeros(&[2, 1])).unwrap();
    let taped = vjp(&aug, &x, &v_aug).unwrap().take_cols(0, 3).unwrap();
    assert!(taped.sub(&explicit).unwrap().max_abs() < 1e-13);
}

#[test]
fn least_squares_gradient_is_closed_form() {
    let mut rng = RngState::new(6);
    let x = rng::normal(&mut rng, &[5, 3]);
    let y = rng::normal(&mut rng, &[5, 2]);
    let w = rng::normal(&mut rng, &[2, 3]);
    let b = rng::normal(&mut rng, &[2]);
    let rec = record(&[w.clone(), b.clone()], |vs| {
        let pred = vs[0].constant(&x).linear(&vs[0], Some(&vs[1]))?;
        jetode_core::node::mse(&pred, &y)
    })
    .unwrap();
    let g = rec.gradients().unwrap();
    // d/dW mean((XW^T + b - Y)^2) = 2/n R^T X, d/db = 2/n colsum(R)
    let r = x.linear(&w, Some(&b)).unwrap().sub(&y).unwrap();
    let n = r.len() as f64;
    let gw = r.t_matmul(&x).unwrap().scale(2.0 / n);
    let gb = r.col_sum().unwrap().scale(2.0 / n);
    assert!(g[0].sub(&gw).unwrap().max_abs() < 1e-14);
    assert!(g[1].sub(&gb).unwrap().max_abs() < 1e-14);
}

#[test]
fn backward_is_linear_and_unreached_leaves_are_zero() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(vec![0.3, -0.8, 1.1]));
    let unused = tape.leaf(Tensor::from_vec(vec![2.0]));
    let l1 = x.tanh().mul(&x.sin()).unwrap().sum();
    let l2 = x.exp().sum();
    let combo = l1.scale(2.0).add(&l2.scale(-0.5)).unwrap();
    let g1 = tape.backward(&l1).unwrap().wrt(&x);
    let g2 = tape.backward(&l2).unwrap().wrt(&x);
    let gc = tape.backward(&combo).unwrap();
    // Leaf accumulation order differs between the two sides, so equality
    // holds up to summation rounding.
    let want = g1.scale(2.0).axpy(-0.5, &g2).unwrap();
    assert!(gc.wrt(&x).sub(&want).unwrap().max_abs() <= 4.0 * f64::EPSILON * want.max_abs());
    assert_eq!(gc.wrt(&unused), Tensor::zeros(&[1]));
}

#[test]
fn objective_decomposes_and_gradient_is_linear_in_lambda() {
    let root = RngState::new(3);
    let model = Model::init(Task::ToyMap, 6, &mut root.fork(0));
    let data = Task::ToyMap.generate(&mut root.fork(1), 4).unwrap();
    let eps = root.fork(2);
    let at = |lambda: f64| objective_grad(&model, &data, &spec(RegKind::Taylor, 2, lambda), &eps).unwrap();
    let (d0, g0) = at(0.0);
    let (d1, g1) = at(0.25);
    let (d2, g2) = at(0.5);
    assert_eq!(d0.objective, d0.loss);
    for (lambda, d) in [(0.25, d1), (0.5, d2)] {
        assert_eq!(d.loss, d0.loss);
        assert!((d.objective - d0.objective - lambda * d.reg).abs() <= 1e-12 * d.objective);
    }
    for ((a, b), c) in g0.iter().zip(&g1).zip(&g2) {
        let once = b.sub(a).unwrap();
        let twice = c.sub(a).unwrap();
        let gap = twice.sub(&once.scale(2.0)).unwrap().max_abs();
        assert!(gap <= 1e-12 * twice.max_abs().max(1e-300), "{gap:e}");
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig {
        hidden: 4,
        epochs: 6,
        n_train: 5,
        n_test: 3,
        eval_every: 2,
        seed: 9,
        objective: spec(RegKind::Taylor, 2, 0.1),
        ..TrainConfig::default()
    };
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a.state.history.len(), 3);
    assert_eq!(a.state.history, b.state.history);
    assert_eq!(a.state.model, b.state.model);
}
