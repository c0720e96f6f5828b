//! Taylor-mode automatic differentiation.
//!
//! A [`TaylorBundle`] holds a truncated power series
//! `x(t) = x[0] + x[1] t + ... + x[K] t^K` whose coefficients are
//! *normalized* (`x[k] = x_k / k!` where `x_k` is the k-th derivative).
//! In this convention every propagation rule is a plain convolution:
//!
//! | op            | rule for k >= 1                                       |
//! |---------------|-------------------------------------------------------|
//! | `z + c w`     | `y[k] = z[k] + c w[k]`                                |
//! | `z * w`       | `y[k] = sum_{j=0..k} z[j] w[k-j]`                     |
//! | `z / w`       | `y[k] = (z[k] - sum_{j=0..k-1} y[j] w[k-j]) / w[0]`   |
//! | `exp z`       | `k y[k] = sum_{j=1..k} j z[j] y[k-j]`                 |
//! | `sin z, cos z`| `k s[k] = sum j z[j] c[k-j]`, `k c[k] = -sum j z[j] s[k-j]` |
//! | `tanh z`      | `k y[k] = sum_{j=1..k} j z[j] u[k-j]`, `u = 1 - y^2`  |
//!
//! Each output coefficient `k` reads only input coefficients `<= k`.
//! The public [`jet`] speaks *derivative* coefficients and converts by
//! `k!` at the boundary.

mod count;
mod nested;

pub use count::{jet_opcount, nested_opcount, plain_opcount, Counted};
pub use nested::{nested_jet, NestedDual};

use crate::array::{Array, Autonomous, Dynamics, Function};
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// `k!` as a float; exact for `k <= 22`.
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Primal value plus `K` normalized Taylor coefficients of equal shape.
#[derive(Clone, Debug)]
pub struct TaylorBundle<V> {
    coeffs: Vec<V>,
}

impl<V: Array<Param = V>> TaylorBundle<V> {
    /// From normalized coefficients, primal first.
    pub fn new(coeffs: Vec<V>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| invalid("a Taylor bundle needs a primal value"))?
            .shape();
        for c in &coeffs[1..] {
            if c.shape() != first {
                return Err(Error::ShapeMismatch {
                    op: "taylor bundle",
                    left: first,
                    right: c.shape(),
                });
            }
        }
        Ok(TaylorBundle { coeffs })
    }

    /// A series with all higher coefficients zero.
    pub fn constant_series(value: V, order: usize) -> Self {
        let zero = value.constant(&Tensor::zeros(&value.shape()));
        let mut coeffs = vec![value];
        coeffs.extend(std::iter::repeat_n(zero, order));
        TaylorBundle { coeffs }
    }

    /// From derivative coefficients `x_1..x_K`.
    pub fn from_derivatives(primal: V, derivs: &[V]) -> Result<Self> {
        let mut coeffs = vec![primal];
        for (i, d) in derivs.iter().enumerate() {
            let k = i + 1;
            coeffs.push(if k == 1 {
                d.clone()
            } else {
                d.scale(1.0 / factorial(k))
            });
        }
        Self::new(coeffs)
    }

    /// Derivative coefficients `y_0..y_K`.
    pub fn derivatives(&self) -> Vec<V> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| if k < 2 { c.clone() } else { c.scale(factorial(k)) })
            .collect()
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn primal_value(&self) -> &V {
        &self.coeffs[0]
    }

    pub fn coeff(&self, k: usize) -> &V {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[V] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<V> {
        self.coeffs
    }

    fn check(&self, rhs: &Self) -> Result<()> {
        if self.order() != rhs.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: rhs.order(),
            });
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(&V) -> V) -> Self {
        TaylorBundle {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    fn try_map(&self, f: impl Fn(&V) -> Result<V>) -> Result<Self> {
        Ok(TaylorBundle {
            coeffs: self.coeffs.iter().map(f).collect::<Result<_>>()?,
        })
    }

    fn zip(&self, rhs: &Self, f: impl Fn(&V, &V) -> Result<V>) -> Result<Self> {
        self.check(rhs)?;
        Ok(TaylorBundle {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| f(a, b))
                .collect::<Result<_>>()?,
        })
    }

    /// `y = z + c w`
    pub fn taylor_add(&self, w: &Self, c: f64) -> Result<Self> {
        if c == 0.0 {
            self.check(w)?;
            return Ok(self.clone());
        }
        self.zip(w, |a, b| a.add(&b.scale(c)))
    }

    /// `j * z[j]` for `j = 1..=K`, index 0 unused.
    fn weighted(&self) -> Vec<V> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| if j <= 1 { c.clone() } else { c.scale(j as f64) })
            .collect()
    }

    /// `(1/k) sum_{j=1..k} zw[j] * other[k-j]`
    fn recurrence_term(zw: &[V], other: &[V], k: usize) -> Result<V> {
        let mut acc = zw[1].mul(&other[k - 1])?;
        for j in 2..=k {
            acc = acc.add(&zw[j].mul(&other[k - j])?)?;
        }
        Ok(if k == 1 { acc } else { acc.scale(1.0 / k as f64) })
    }
}

/// `sum_{j=lo..=hi} a[j] * b[k-j]`
fn convolve<V: Array>(a: &[V], b: &[V], k: usize, lo: usize, hi: usize) -> Result<V> {
    let mut acc = a[lo].mul(&b[k - lo])?;
    for j in lo + 1..=hi {
        acc = acc.add(&a[j].mul(&b[k - j])?)?;
    }
    Ok(acc)
}

impl<V: Array<Param = V>> Array for TaylorBundle<V> {
    type Param = V;

    fn shape(&self) -> Vec<usize> {
        self.coeffs[0].shape()
    }

    fn primal(&self) -> Tensor {
        self.coeffs[0].primal()
    }

    fn constant(&self, value: &Tensor) -> Self {
        TaylorBundle::constant_series(self.coeffs[0].constant(value), self.order())
    }

    fn param(&self, value: &Tensor) -> V {
        self.coeffs[0].param(value)
    }

    fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip(rhs, |a, b| a.add(b))
    }

    fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip(rhs, |a, b| a.sub(b))
    }

    fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let coeffs = (0..=self.order())
            .map(|k| convolve(&self.coeffs, &rhs.coeffs, k, 0, k))
            .collect::<Result<_>>()?;
        Ok(TaylorBundle { coeffs })
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let w = &rhs.coeffs;
        let mut y: Vec<V> = vec![self.coeffs[0].div(&w[0])?];
        for k in 1..=self.order() {
            // sum_{j=0..k-1} y[j] w[k-j]
            let mut acc = y[0].mul(&w[k])?;
            for j in 1..k {
                acc = acc.add(&y[j].mul(&w[k - j])?)?;
            }
            y.push(self.coeffs[k].sub(&acc)?.div(&w[0])?);
        }
        Ok(TaylorBundle { coeffs: y })
    }

    fn scale(&self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    fn add_scalar(&self, c: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = coeffs[0].add_scalar(c);
        TaylorBundle { coeffs }
    }

    fn exp(&self) -> Self {
        let mut y = vec![self.coeffs[0].exp()];
        if self.order() > 0 {
            let zw = self.weighted();
            for k in 1..=self.order() {
                let yk = Self::recurrence_term(&zw, &y, k).expect("bundle shapes agree");
                y.push(yk);
            }
        }
        TaylorBundle { coeffs: y }
    }

    fn sin(&self) -> Self {
        if self.order() == 0 {
            return self.map(|v| v.sin());
        }
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        if self.order() == 0 {
            return self.map(|v| v.cos());
        }
        self.sin_cos().1
    }

    fn sin_cos(&self) -> (Self, Self) {
        let (s0, c0) = self.coeffs[0].sin_cos();
        let mut s = vec![s0];
        let mut c = vec![c0];
        if self.order() > 0 {
            let zw = self.weighted();
            for k in 1..=self.order() {
                let sk = Self::recurrence_term(&zw, &c, k).expect("bundle shapes agree");
                let ck = Self::recurrence_term(&zw, &s, k)
                    .expect("bundle shapes agree")
                    .scale(-1.0);
                s.push(sk);
                c.push(ck);
            }
        }
        (TaylorBundle { coeffs: s }, TaylorBundle { coeffs: c })
    }

    fn tanh(&self) -> Self {
        // Direct recurrence from y' = (1 - y^2) z'.
        let mut y = vec![self.coeffs[0].tanh()];
        if self.order() > 0 {
            let zw = self.weighted();
            let mut u: Vec<V> = Vec::with_capacity(self.order());
            for k in 1..=self.order() {
                let m = k - 1;
                let um = if m == 0 {
                    y[0].mul(&y[0]).expect("same shape").scale(-1.0).add_scalar(1.0)
                } else {
                    convolve(&y, &y, m, 0, m).expect("same shape").scale(-1.0)
                };
                u.push(um);
                y.push(Self::recurrence_term(&zw, &u, k).expect("bundle shapes agree"));
            }
        }
        TaylorBundle { coeffs: y }
    }

    fn linear(&self, w: &V, b: Option<&V>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.linear(w, if k == 0 { b } else { None })?);
        }
        Ok(TaylorBundle { coeffs })
    }

    fn linear_t(&self, w: &V) -> Result<Self> {
        self.try_map(|c| c.linear_t(w))
    }

    fn concat_cols(&self, rhs: &Self) -> Result<Self> {
        self.zip(rhs, |a, b| a.concat_cols(b))
    }

    fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        self.try_map(|c| c.take_cols(start, len))
    }
}

/// Evaluates `f` along the curve with derivative coefficients
/// `x0, series[0], .., series[K-1]` and returns `(y_0, [y_1..y_K])`, the
/// total derivatives of `f(x(t))` at `t = 0`.
pub fn jet<V, F>(f: &F, x0: &V, series: &[V]) -> Result<(V, Vec<V>)>
where
    V: Array<Param = V>,
    F: Function<V>,
{
    let input = TaylorBundle::from_derivatives(x0.clone(), series)?;
    let out = f.eval(&input)?;
    if out.order() != series.len() {
        return Err(Error::OrderMismatch {
            left: out.order(),
            right: series.len(),
        });
    }
    let mut ys = out.derivatives();
    let y0 = ys.remove(0);
    Ok((y0, ys))
}

/// Derivative coefficients `x_0..x_K` of the solution of `dz/dt = f(z, t)`
/// through `(z0, t0)`, for the time-augmented state `[z ; t]`.
///
/// Recursive jet: starting from `x_1 = f(x_0)`, each call
/// `jet(f, x_0, (x_1..x_k))` yields `y_k`, and `x_{k+1} = y_k`.
pub fn ode_taylor_coefficients_augmented<V, D>(
    f: &D,
    z0: &V,
    t0: f64,
    order: usize,
) -> Result<Vec<V>>
where
    V: Array<Param = V>,
    D: Dynamics<V>,
{
    if order == 0 {
        return Err(invalid("Taylor order must be at least 1"));
    }
    let shape = z0.shape();
    let (rows, dim) = match shape[..] {
        [r, d] => (r, d),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "ode_taylor_coefficients",
                left: shape,
                right: vec![0, 0],
            })
        }
    };
    let x0 = z0.concat_cols(&z0.constant(&Tensor::full(&[rows, 1], t0)))?;
    let aug = Autonomous::new(f, dim);
    let mut xs = vec![x0.clone(), aug.eval(&x0)?];
    for k in 1..order {
        let (_, ys) = jet(&aug, &x0, &xs[1..=k])?;
        xs.push(ys[k - 1].clone());
    }
    Ok(xs)
}

/// Derivative coefficients `x_0..x_K` of the state (time column removed).
pub fn ode_taylor_coefficients<V, D>(f: &D, z0: &V, t0: f64, order: usize) -> Result<Vec<V>>
where
    V: Array<Param = V>,
    D: Dynamics<V>,
{
    let dim = z0.shape().get(1).copied().unwrap_or(0);
    ode_taylor_coefficients_augmented(f, z0, t0, order)?
        .iter()
        .map(|x| x.take_cols(0, dim))
        .collect()
}

/// `d^K z / dt^K` at `(z, t)` along the solution of `dz/dt = f(z, t)`.
pub fn total_derivative<V, D>(f: &D, z: &V, t: f64, order: usize) -> Result<V>
where
    V: Array<Param = V>,
    D: Dynamics<V>,
{
    let mut xs = ode_taylor_coefficients(f, z, t, order)?;
    Ok(xs.pop().expect("order >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn scalar_bundle(c: &[f64]) -> TaylorBundle<Tensor> {
        TaylorBundle::new(
            c.iter()
                .map(|&v| Tensor::matrix(1, 1, vec![v]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn values(b: &TaylorBundle<Tensor>) -> Vec<f64> {
        b.coeffs().iter().map(|c| c.data()[0]).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn add_examples() {
        let z = scalar_bundle(&[1.0, 1.0]);
        let w = scalar_bundle(&[2.0, 3.0]);
        assert_eq!(values(&z.taylor_add(&w, 1.0).unwrap()), vec![3.0, 4.0]);
        assert_eq!(values(&z.taylor_add(&w, 0.0).unwrap()), vec![1.0, 1.0]);
        let z = scalar_bundle(&[1.0, 1.0, 0.0]);
        let w = scalar_bundle(&[0.0, 0.0, 1.0]);
        assert_eq!(values(&z.taylor_add(&w, 2.0).unwrap()), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let z = scalar_bundle(&[1.0, 1.0]);
        let w = scalar_bundle(&[1.0, 1.0, 1.0]);
        assert_eq!(
            z.mul(&w).unwrap_err(),
            Error::OrderMismatch { left: 1, right: 2 }
        );
        assert!(z.taylor_add(&w, 0.0).is_err());
    }

    #[test]
    fn mul_examples() {
        let z = scalar_bundle(&[1.0, 1.0, 0.0]);
        let sq = z.mul(&z).unwrap();
        assert_eq!(values(&sq), vec![1.0, 2.0, 1.0]);
        let d: Vec<f64> = sq.derivatives().iter().map(|c| c.data()[0]).collect();
        assert_eq!(d, vec![1.0, 2.0, 2.0]);
        let one = scalar_bundle(&[1.0, 0.0, 0.0]);
        let z = scalar_bundle(&[0.3, -1.2, 0.7]);
        assert_eq!(values(&z.mul(&one).unwrap()), values(&z));
    }

    #[test]
    fn div_examples() {
        let z = scalar_bundle(&[0.3, -1.2, 0.7]);
        let one = scalar_bundle(&[1.0, 0.0, 0.0]);
        assert_eq!(values(&z.div(&one).unwrap()), values(&z));
        // 1 / (1 - t)
        let num = scalar_bundle(&[1.0, 0.0, 0.0, 0.0]);
        let den = scalar_bundle(&[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(values(&num.div(&den).unwrap()), vec![1.0, 1.0, 1.0, 1.0]);
        let w = scalar_bundle(&[1.5, 0.4, -0.3]);
        let back = z.div(&w).unwrap().mul(&w).unwrap();
        close(&values(&back), &values(&z), 1e-12);
        let zero = scalar_bundle(&[0.0, 1.0, 0.0]);
        assert_eq!(z.div(&zero).unwrap_err(), Error::Singular { op: "div" });
    }

    #[test]
    fn exp_sin_cos_of_identity_curve() {
        let t = scalar_bundle(&[0.0, 1.0, 0.0, 0.0, 0.0]);
        close(
            &values(&t.exp()),
            &[1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0],
            1e-15,
        );
        let t = scalar_bundle(&[0.0, 1.0, 0.0, 0.0]);
        let (s, c) = t.sin_cos();
        close(&values(&s), &[0.0, 1.0, 0.0, -1.0 / 6.0], 1e-15);
        close(&values(&c), &[1.0, 0.0, -0.5, 0.0], 1e-15);
        let k = scalar_bundle(&[0.7, 0.0, 0.0]);
        close(&values(&k.exp()), &[0.7f64.exp(), 0.0, 0.0], 0.0);
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(values(&scalar_bundle(&[0.0, 0.0, 0.0]).tanh()), vec![0.0; 3]);
        let t = scalar_bundle(&[0.0, 1.0, 0.0, 0.0]);
        close(&values(&t.tanh()), &[0.0, 1.0, 0.0, -1.0 / 3.0], 1e-15);
    }

    #[test]
    fn jet_examples() {
        let x = |v: f64| Tensor::matrix(1, 1, vec![v]).unwrap();
        let (y0, ys) = jet(&Expr::Input, &x(0.4), &[x(1.5), x(-2.0)]).unwrap();
        assert_eq!(y0, x(0.4));
        assert_eq!(ys, vec![x(1.5), x(-2.0)]);

        let sq = Expr::binary("mul", Expr::Input, Expr::Input);
        let (y0, ys) = jet(&sq, &x(1.0), &[x(1.0), x(0.0)]).unwrap();
        assert_eq!((y0, ys), (x(1.0), vec![x(2.0), x(2.0)]));

        let e = Expr::unary("exp", Expr::Input);
        let (y0, ys) = jet(&e, &x(0.0), &[x(1.0), x(0.0), x(0.0)]).unwrap();
        assert_eq!(y0, x(1.0));
        assert_eq!(ys, vec![x(1.0); 3]);
    }

    #[test]
    fn jet_rejects_unknown_primitive() {
        let x = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let f = Expr::unary("erf", Expr::Input);
        assert_eq!(
            jet(&f, &x, std::slice::from_ref(&x)).unwrap_err(),
            Error::Unsupported("erf".into())
        );
    }

    #[test]
    fn ode_coefficients_examples() {
        let z0 = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let zero = Expr::Const(0.0);
        let xs = ode_taylor_coefficients(&zero, &z0, 0.0, 3).unwrap();
        assert_eq!(xs[0], z0);
        assert!(xs[1..].iter().all(|x| x.data() == [0.0]));

        let lin = Expr::Input;
        let xs = ode_taylor_coefficients(&lin, &z0, 0.0, 4).unwrap();
        assert!(xs.iter().all(|x| x.data() == [1.0]));

        let sq = Expr::binary("mul", Expr::Input, Expr::Input);
        let xs = ode_taylor_coefficients(&sq, &z0, 0.0, 3).unwrap();
        let got: Vec<f64> = xs.iter().map(|x| x.data()[0]).collect();
        assert_eq!(got, vec![1.0, 1.0, 2.0, 6.0]);
    }

    #[test]
    fn time_component_has_unit_dynamics() {
        let z0 = Tensor::matrix(2, 1, vec![0.3, -0.2]).unwrap();
        let f = Expr::binary("mul", Expr::Input, Expr::unary("sin", Expr::Time));
        let xs = ode_taylor_coefficients_augmented(&f, &z0, 0.75, 4).unwrap();
        let tcol: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| x.take_cols(1, 1).unwrap().into_data())
            .collect();
        assert_eq!(tcol[0], vec![0.75, 0.75]);
        assert_eq!(tcol[1], vec![1.0, 1.0]);
        for c in &tcol[2..] {
            assert_eq!(c, &vec![0.0, 0.0]);
        }
    }

    #[test]
    fn total_derivative_examples() {
        let z = Tensor::matrix(1, 2, vec![0.4, -1.1]).unwrap();
        let f = Expr::unary("sin", Expr::Input);
        assert_eq!(
            total_derivative(&f, &z, 0.3, 1).unwrap(),
            Function::<Tensor>::eval(&f, &z).unwrap()
        );
        let z = Tensor::matrix(1, 1, vec![2.0]).unwrap();
        let d3 = total_derivative(&Expr::Input, &z, 0.0, 3).unwrap();
        assert_eq!(d3.data(), &[2.0]);
        let c = Expr::Const(1.7);
        assert_eq!(total_derivative(&c, &z, 0.0, 2).unwrap().data(), &[0.0]);
    }

    #[test]
    fn zero_order_is_rejected() {
        let z = Tensor::matrix(1, 1, vec![2.0]).unwrap();
        assert!(ode_taylor_coefficients(&Expr::Input, &z, 0.0, 0).is_err());
    }
}
