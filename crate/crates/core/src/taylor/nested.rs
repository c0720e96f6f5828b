//! Nested first-order forward mode, used as a reference oracle.
//!
//! A level-`L` nested dual number is `Dual<Dual<...<V>>>` with `L`
//! independent nilpotent units `e_1..e_L` (`e_i^2 = 0`). It is stored as
//! `2^L` parts indexed by the subset of units in each monomial (bit `i`
//! for `e_{i+1}`). Every operation recurses on the outermost unit, so the
//! cost grows exponentially with the level; no work is shared between
//! orders.
//!
//! Setting `t = e_1 + ... + e_K` and evaluating `f(x(t))` puts the k-th
//! total derivative in the coefficient of `e_1 e_2 ... e_k`.

use crate::array::{Array, Function};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct NestedDual<V> {
    parts: Vec<V>,
}

fn halves<V>(a: &[V]) -> (&[V], &[V]) {
    a.split_at(a.len() / 2)
}

fn join<V>(mut lo: Vec<V>, hi: Vec<V>) -> Vec<V> {
    lo.extend(hi);
    lo
}

fn add_parts<V: Array>(a: &[V], b: &[V], sign: f64) -> Result<Vec<V>> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if sign > 0.0 => x.add(y),
            (Some(x), Some(y)) => x.sub(y),
            (Some(x), None) => Ok(x.clone()),
            (None, Some(y)) => Ok(if sign > 0.0 { y.clone() } else { y.scale(-1.0) }),
            (None, None) => unreachable!(),
        })
        .collect()
}

fn mul_parts<V: Array>(a: &[V], b: &[V]) -> Result<Vec<V>> {
    if a.len() == 1 && b.len() == 1 {
        return Ok(vec![a[0].mul(&b[0])?]);
    }
    if a.len() > b.len() {
        let (a0, a1) = halves(a);
        return Ok(join(mul_parts(a0, b)?, mul_parts(a1, b)?));
    }
    if b.len() > a.len() {
        let (b0, b1) = halves(b);
        return Ok(join(mul_parts(a, b0)?, mul_parts(a, b1)?));
    }
    let (a0, a1) = halves(a);
    let (b0, b1) = halves(b);
    let lo = mul_parts(a0, b0)?;
    let hi = add_parts(&mul_parts(a0, b1)?, &mul_parts(a1, b0)?, 1.0)?;
    Ok(join(lo, hi))
}

fn div_parts<V: Array>(a: &[V], b: &[V]) -> Result<Vec<V>> {
    if a.len() > b.len() {
        let (a0, a1) = halves(a);
        return Ok(join(div_parts(a0, b)?, div_parts(a1, b)?));
    }
    if b.len() == 1 {
        return Ok(vec![a[0].div(&b[0])?]);
    }
    let (b0, b1) = halves(b);
    let (a0, a1) = if a.len() == b.len() {
        halves(a)
    } else {
        (a, &a[..0])
    };
    // (a0 + a1 e) / (b0 + b1 e) = q0 + (a1 - q0 b1) / b0 e
    let q0 = div_parts(a0, b0)?;
    let q0b1 = mul_parts(&q0, b1)?;
    let num = if a1.is_empty() {
        q0b1.iter().map(|v| v.scale(-1.0)).collect()
    } else {
        add_parts(a1, &q0b1, -1.0)?
    };
    let q1 = div_parts(&num, b0)?;
    Ok(join(pad(q0, q1.len()), q1))
}

/// Pads a lower-level value with zero parts up to `n` parts.
fn pad<V: Array>(mut v: Vec<V>, n: usize) -> Vec<V> {
    if v.len() < n {
        let zero = v[0].constant(&Tensor::zeros(&v[0].shape()));
        v.resize(n, zero);
    }
    v
}

/// `f(a0 + a1 e) = f(a0) + f'(a0) a1 e`, recursively.
fn unary_parts<V: Array>(a: &[V], op: Unary) -> Result<Vec<V>> {
    if a.len() == 1 {
        return Ok(vec![match op {
            Unary::Exp => a[0].exp(),
            Unary::Sin => a[0].sin(),
            Unary::Cos => a[0].cos(),
            Unary::Tanh => a[0].tanh(),
        }]);
    }
    let (a0, a1) = halves(a);
    let f0 = unary_parts(a0, op)?;
    let df0 = match op {
        Unary::Exp => f0.clone(),
        Unary::Sin => unary_parts(a0, Unary::Cos)?,
        Unary::Cos => unary_parts(a0, Unary::Sin)?
            .iter()
            .map(|v| v.scale(-1.0))
            .collect(),
        Unary::Tanh => {
            let sq = mul_parts(&f0, &f0)?;
            let mut d: Vec<V> = sq.iter().map(|v| v.scale(-1.0)).collect();
            d[0] = d[0].add_scalar(1.0);
            d
        }
    };
    let f1 = mul_parts(&df0, a1)?;
    Ok(join(pad(f0, f1.len()), f1))
}

#[derive(Clone, Copy)]
enum Unary {
    Exp,
    Sin,
    Cos,
    Tanh,
}

impl<V: Array<Param = V>> NestedDual<V> {
    pub fn constant_value(v: V) -> Self {
        NestedDual { parts: vec![v] }
    }

    /// The curve with derivative coefficients `x0, derivs[0], ..` seeded
    /// along `t = e_1 + ... + e_K`: the part for subset `S` is `x_|S|`.
    pub fn curve(x0: &V, derivs: &[V]) -> Self {
        let level = derivs.len();
        let parts = (0..1usize << level)
            .map(|s| match s.count_ones() as usize {
                0 => x0.clone(),
                k => derivs[k - 1].clone(),
            })
            .collect();
        NestedDual { parts }
    }

    pub fn level(&self) -> usize {
        self.parts.len().trailing_zeros() as usize
    }

    pub fn parts(&self) -> &[V] {
        &self.parts
    }

    /// Coefficient of `e_1 ... e_k`, i.e. the k-th total derivative.
    pub fn derivative(&self, k: usize) -> V {
        let idx = (1usize << k) - 1;
        match self.parts.get(idx) {
            Some(v) if idx < self.parts.len() => v.clone(),
            _ => self.parts[0].constant(&Tensor::zeros(&self.parts[0].shape())),
        }
    }

    fn lift_to(&self, n: usize) -> Vec<V> {
        pad(self.parts.clone(), n)
    }

    fn per_part(&self, f: impl Fn(&V) -> Result<V>) -> Result<Self> {
        Ok(NestedDual {
            parts: self.parts.iter().map(f).collect::<Result<_>>()?,
        })
    }
}

impl<V: Array<Param = V>> Array for NestedDual<V> {
    type Param = V;

    fn shape(&self) -> Vec<usize> {
        self.parts[0].shape()
    }

    fn primal(&self) -> Tensor {
        self.parts[0].primal()
    }

    fn constant(&self, value: &Tensor) -> Self {
        NestedDual::constant_value(self.parts[0].constant(value))
    }

    fn param(&self, value: &Tensor) -> V {
        self.parts[0].param(value)
    }

    fn add(&self, rhs: &Self) -> Result<Self> {
        Ok(NestedDual {
            parts: add_parts(&self.parts, &rhs.parts, 1.0)?,
        })
    }

    fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(NestedDual {
            parts: add_parts(&self.parts, &rhs.parts, -1.0)?,
        })
    }

    fn mul(&self, rhs: &Self) -> Result<Self> {
        Ok(NestedDual {
            parts: mul_parts(&self.parts, &rhs.parts)?,
        })
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(NestedDual {
            parts: div_parts(&self.parts, &rhs.parts)?,
        })
    }

    fn scale(&self, c: f64) -> Self {
        NestedDual {
            parts: self.parts.iter().map(|v| v.scale(c)).collect(),
        }
    }

    fn add_scalar(&self, c: f64) -> Self {
        let mut parts = self.parts.clone();
        parts[0] = parts[0].add_scalar(c);
        NestedDual { parts }
    }

    fn exp(&self) -> Self {
        NestedDual {
            parts: unary_parts(&self.parts, Unary::Exp).expect("matching shapes"),
        }
    }

    fn sin(&self) -> Self {
        NestedDual {
            parts: unary_parts(&self.parts, Unary::Sin).expect("matching shapes"),
        }
    }

    fn cos(&self) -> Self {
        NestedDual {
            parts: unary_parts(&self.parts, Unary::Cos).expect("matching shapes"),
        }
    }

    fn tanh(&self) -> Self {
        NestedDual {
            parts: unary_parts(&self.parts, Unary::Tanh).expect("matching shapes"),
        }
    }

    fn linear(&self, w: &V, b: Option<&V>) -> Result<Self> {
        let mut parts = Vec::with_capacity(self.parts.len());
        for (i, p) in self.parts.iter().enumerate() {
            parts.push(p.linear(w, if i == 0 { b } else { None })?);
        }
        Ok(NestedDual { parts })
    }

    fn linear_t(&self, w: &V) -> Result<Self> {
        self.per_part(|p| p.linear_t(w))
    }

    fn concat_cols(&self, rhs: &Self) -> Result<Self> {
        let n = self.parts.len().max(rhs.parts.len());
        let a = self.lift_to(n);
        let b = rhs.lift_to(n);
        Ok(NestedDual {
            parts: a
                .iter()
                .zip(&b)
                .map(|(x, y)| x.concat_cols(y))
                .collect::<Result<_>>()?,
        })
    }

    fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        self.per_part(|p| p.take_cols(start, len))
    }
}

/// Same contract as [`super::jet`], computed by `K`-fold nested forward mode.
pub fn nested_jet<V, F>(f: &F, x0: &V, series: &[V]) -> Result<(V, Vec<V>)>
where
    V: Array<Param = V>,
    F: Function<V>,
{
    let out = f.eval(&NestedDual::curve(x0, series))?;
    if out.level() > series.len() {
        return Err(Error::OrderMismatch {
            left: out.level(),
            right: series.len(),
        });
    }
    let ys = (1..=series.len()).map(|k| out.derivative(k)).collect();
    Ok((out.parts[0].clone(), ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn x(v: f64) -> Tensor {
        Tensor::matrix(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn square_along_unit_curve() {
        let sq = Expr::binary("mul", Expr::Input, Expr::Input);
        let (y0, ys) = nested_jet(&sq, &x(1.0), &[x(1.0), x(0.0)]).unwrap();
        assert_eq!(y0, x(1.0));
        assert_eq!(ys, vec![x(2.0), x(2.0)]);
    }

    #[test]
    fn exp_derivatives() {
        let e = Expr::unary("exp", Expr::Input);
        let (_, ys) = nested_jet(&e, &x(0.0), &[x(1.0), x(0.0), x(0.0)]).unwrap();
        for y in ys {
            assert!((y.data()[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quotient_rule() {
        // d/dt 1/(1-t) = 1, 2, 6
        let f = Expr::binary("div", Expr::Const(1.0), Expr::Input);
        let (y0, ys) = nested_jet(&f, &x(1.0), &[x(-1.0), x(0.0), x(0.0)]).unwrap();
        assert_eq!(y0, x(1.0));
        let got: Vec<f64> = ys.iter().map(|y| y.data()[0]).collect();
        assert_eq!(got, vec![1.0, 2.0, 6.0]);
    }

    #[test]
    fn constant_output_has_zero_derivatives() {
        let (_, ys) = nested_jet(&Expr::Const(3.0), &x(1.0), &[x(1.0), x(2.0)]).unwrap();
        assert_eq!(ys, vec![x(0.0), x(0.0)]);
    }
}
