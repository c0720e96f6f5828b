use jetode_core::expr::Expr;
use jetode_core::node::Mlp;
use jetode_core::rng::{self, RngState};
use jetode_core::taylor::{
    factorial, jet, jet_opcount, nested_jet, nested_opcount, ode_taylor_coefficients,
    plain_opcount, TaylorBundle,
};
use jetode_core::{Array, Autonomous, Tensor};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    let scale = b.max_abs().max(a.max_abs()).max(1.0);
    a.sub(b).unwrap().max_abs() / scale
}

fn random_case(seed: u64, order: usize) -> (Expr, Tensor, Vec<Tensor>) {
    let mut rng = RngState::new(seed);
    let dim = 1 + rng.below(3);
    let rows = 1 + rng.below(2);
    let depth = 1 + rng.below(3);
    let f = Expr::random(&mut rng, depth, dim);
    let x0 = rng::normal(&mut rng, &[rows, dim]).scale(0.5);
    let series = (0..order)
        .map(|_| rng::normal(&mut rng, &[rows, dim]).scale(0.5))
        .collect();
    (f, x0, series)
}

fn oracle_agrees(seed: u64, order: usize) -> Result<(), TestCaseError> {
    let (f, x0, series) = random_case(seed, order);
    let (y0, ys) = jet(&f, &x0, &series).unwrap();
    let (n0, ns) = nested_jet(&f, &x0, &series).unwrap();
    prop_assert!(rel_err(&y0, &n0) <= 1e-9);
    for (k, (y, n)) in ys.iter().zip(&ns).enumerate() {
        let e = rel_err(y, n);
        prop_assert!(e <= 1e-9, "order {} coefficient {}: {:e} for {:?}", order, k + 1, e, f);
    }
    Ok(())
}

macro_rules! oracle_suite {
    ($($name:ident: $k:expr),*) => {$(
        proptest! {
            #![proptest_config(cases(200))]
            #[test]
            fn $name(seed in any::<u64>()) {
                oracle_agrees(seed, $k)?;
            }
        }
    )*};
}

oracle_suite!(
    jet_matches_nested_k1: 1,
    jet_matches_nested_k2: 2,
    jet_matches_nested_k3: 3,
    jet_matches_nested_k4: 4,
    jet_matches_nested_k5: 5,
    jet_matches_nested_k6: 6
);

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn output_coefficient_ignores_later_inputs(seed in any::<u64>(), j in 1usize..5) {
        let (f, x0, series) = random_case(seed, 5);
        let (_, base) = jet(&f, &x0, &series).unwrap();
        let mut bumped = series.clone();
        bumped[j - 1] = bumped[j - 1].add_scalar(0.75);
        let (_, moved) = jet(&f, &x0, &bumped).unwrap();
        for k in 1..j {
            prop_assert_eq!(&base[k - 1], &moved[k - 1]);
        }
    }

    #[test]
    fn derivative_round_trip_is_within_two_ulps(v in -1e6f64..1e6, k in 0usize..=12) {
        let coeffs: Vec<Tensor> = (0..=12)
            .map(|i| Tensor::from_vec(vec![if i == k { v } else { 0.0 }]))
            .collect();
        let b = TaylorBundle::from_derivatives(coeffs[0].clone(), &coeffs[1..]).unwrap();
        let back = b.derivatives()[k].data()[0];
        prop_assert!((back - v).abs() <= 2.0 * v.abs() * f64::EPSILON);
    }

    #[test]
    fn polynomial_solutions_are_reproduced(
        seed in any::<u64>(),
        degree in 1usize..=5,
        h in -1.5f64..1.5,
    ) {
        // z(t) = p(t) solves dz/dt = p'(t); its Taylor polynomial at t0 is p itself.
        let mut rng = RngState::new(seed);
        let c: Vec<f64> = (0..=degree).map(|_| rng.normal_f64()).collect();
        let dp = (1..=degree).rev().fold(Expr::Const(0.0), |acc, i| {
            Expr::binary(
                "add",
                Expr::binary("mul", acc, Expr::Time),
                Expr::Const(i as f64 * c[i]),
            )
        });
        let p = |t: f64| c.iter().rev().fold(0.0, |acc, ci| acc * t + ci);
        let t0 = 0.3;
        let z0 = Tensor::matrix(1, 1, vec![p(t0)]).unwrap();
        let order = degree + 1;
        let xs = ode_taylor_coefficients(&dp, &z0, t0, order).unwrap();
        let approx: f64 = xs
            .iter()
            .enumerate()
            .map(|(k, x)| x.data()[0] * h.powi(k as i32) / factorial(k))
            .sum();
        let exact = p(t0 + h);
        prop_assert!((approx - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        prop_assert_eq!(xs[order].data()[0], 0.0);
    }
}

fn scalar(v: f64) -> Tensor {
    Tensor::matrix(1, 1, vec![v]).unwrap()
}

fn derivs(xs: &[Tensor]) -> Vec<f64> {
    xs.iter().map(|x| x.data()[0]).collect()
}

#[test]
fn recursive_jet_on_linear_square_and_zero() {
    let one = scalar(1.0);
    let lin = ode_taylor_coefficients(&Expr::Input, &one, 0.0, 8).unwrap();
    assert_eq!(derivs(&lin), vec![1.0; 9]);

    let sq = Expr::binary("mul", Expr::Input, Expr::Input);
    let xs = ode_taylor_coefficients(&sq, &one, 0.0, 8).unwrap();
    let fact: Vec<f64> = (0..=8).map(factorial).collect();
    assert_eq!(derivs(&xs), fact);

    let zero = ode_taylor_coefficients(&Expr::Const(0.0), &scalar(-2.5), 0.0, 6).unwrap();
    assert_eq!(derivs(&zero)[1..], [0.0; 6]);
}

#[test]
fn mlp_jet_matches_nested_oracle() {
    let mut rng = RngState::new(11);
    let mlp = Mlp::init(&mut rng, 3, 6);
    let f = Autonomous::new(&mlp, 3);
    let x0 = rng::normal(&mut rng, &[2, 4]);
    let series: Vec<Tensor> = (0..5).map(|_| rng::normal(&mut rng, &[2, 4])).collect();
    let (_, ys) = jet(&f, &x0, &series).unwrap();
    let (_, ns) = nested_jet(&f, &x0, &series).unwrap();
    for (y, n) in ys.iter().zip(&ns) {
        assert!(rel_err(y, n) < 1e-10);
    }
}

#[test]
fn jet_cost_grows_polynomially_and_nested_geometrically() {
    let mut rng = RngState::new(2);
    let mlp = Mlp::init(&mut rng, 2, 16);
    let f = Autonomous::new(&mlp, 2);
    let x0 = rng::normal(&mut rng, &[1, 3]);
    let plain = plain_opcount(&f, &x0).unwrap();
    assert_eq!(jet_opcount(&f, &x0, 0).unwrap(), plain);
    let jets: Vec<u64> = (1..=8).map(|k| jet_opcount(&f, &x0, k).unwrap()).collect();
    let nested: Vec<u64> = (1..=8).map(|k| nested_opcount(&f, &x0, k).unwrap()).collect();
    let (j1, n1) = (jets[0] as f64, nested[0] as f64);
    assert!(j1 / n1 <= 2.0 && n1 / j1 <= 2.0);
    for k in 1..8 {
        assert!(jets[k] as f64 / jets[k - 1] as f64 <= 3.0, "{jets:?}");
        assert!(nested[k] as f64 / nested[k - 1] as f64 >= 1.8, "{nested:?}");
    }
}

#[test]
fn analytic_series() {
    let t = |order: usize| {
        let mut c = vec![scalar(0.0), scalar(1.0)];
        c.resize(order + 1, scalar(0.0));
        TaylorBundle::new(c).unwrap()
    };
    let coeffs = |b: &TaylorBundle<Tensor>| derivs(b.coeffs());
    let check = |got: Vec<f64>, want: &[f64]| {
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
    };
    check(coeffs(&t(4).exp()), &[1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]);
    check(coeffs(&t(3).sin()), &[0.0, 1.0, 0.0, -1.0 / 6.0]);
    check(coeffs(&t(3).cos()), &[1.0, 0.0, -0.5, 0.0]);
    check(coeffs(&t(3).tanh()), &[0.0, 1.0, 0.0, -1.0 / 3.0]);
    let one = TaylorBundle::constant_series(scalar(1.0), 3);
    let den = TaylorBundle::new(vec![scalar(1.0), scalar(-1.0), scalar(0.0), scalar(0.0)]).unwrap();
    check(coeffs(&one.div(&den).unwrap()), &[1.0; 4]);
}
