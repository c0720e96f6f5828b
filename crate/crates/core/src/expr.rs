//! Small expression trees over the primitive registry.
//!
//! Used to build test dynamics (`f(z) = z`, `f(z, t) = p'(t)`, ...) and
//! random compositions for oracle checks. Primitives are referenced by
//! name and resolved at evaluation time, so an unknown name surfaces as
//! [`Error::Unsupported`].

use crate::array::{Array, Dynamics, Function, Primitive};
use crate::error::{Error, Result};
use crate::rng::{self, RngState};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// The function argument (the state `z` for dynamics).
    Input,
    /// Time column; only available when evaluated as dynamics.
    Time,
    /// Constant broadcast to the shape of the input.
    Const(f64),
    Scale(f64, Box<Expr>),
    AddScalar(f64, Box<Expr>),
    Call(String, Vec<Expr>),
    Linear {
        w: Tensor,
        b: Option<Tensor>,
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Call(name.to_string(), args)
    }

    pub fn unary(name: &str, arg: Expr) -> Expr {
        Expr::call(name, vec![arg])
    }

    pub fn binary(name: &str, a: Expr, b: Expr) -> Expr {
        Expr::call(name, vec![a, b])
    }

    pub fn scaled(c: f64, e: Expr) -> Expr {
        Expr::Scale(c, Box::new(e))
    }

    pub fn shifted(c: f64, e: Expr) -> Expr {
        Expr::AddScalar(c, Box::new(e))
    }

    /// `e^n` by repeated multiplication (`n = 0` gives the constant 1).
    pub fn pow(e: Expr, n: usize) -> Expr {
        (1..n).fold(if n == 0 { Expr::Const(1.0) } else { e.clone() }, |acc, _| {
            Expr::binary("mul", acc, e.clone())
        })
    }

    pub fn eval_with<A: Array>(&self, x: &A, t: Option<&A>) -> Result<A> {
        match self {
            Expr::Input => Ok(x.clone()),
            Expr::Time => t
                .cloned()
                .ok_or_else(|| Error::Unsupported("time in a univariate function".into())),
            Expr::Const(c) => Ok(x.constant(&Tensor::full(&x.shape(), *c))),
            Expr::Scale(c, e) => Ok(e.eval_with(x, t)?.scale(*c)),
            Expr::AddScalar(c, e) => Ok(e.eval_with(x, t)?.add_scalar(*c)),
            Expr::Call(name, args) => {
                let p = Primitive::from_name(name)?;
                if args.len() != p.arity() {
                    return Err(Error::Invalid(format!(
                        "{name} takes {} operands, got {}",
                        p.arity(),
                        args.len()
                    )));
                }
                let a = args[0].eval_with(x, t)?;
                match p.arity() {
                    1 => a.apply_unary(p),
                    _ => a.apply_binary(p, &args[1].eval_with(x, t)?),
                }
            }
            Expr::Linear { w, b, arg } => {
                let a = arg.eval_with(x, t)?;
                let w = x.param(w);
                let b = b.as_ref().map(|b| x.param(b));
                a.linear(&w, b.as_ref())
            }
        }
    }

    /// Random composition of registered primitives mapping `[B, dim]` to
    /// `[B, dim]`. Denominators are kept at least 1.5 away from zero.
    pub fn random(rng: &mut RngState, depth: usize, dim: usize) -> Expr {
        if depth == 0 {
            return match rng.below(4) {
                0 => Expr::shifted(rng.normal_f64() * 0.5, Expr::Input),
                _ => Expr::Input,
            };
        }
        let sub = |rng: &mut RngState| Expr::random(rng, depth - 1, dim);
        match rng.below(10) {
            0 => Expr::binary("add", sub(rng), sub(rng)),
            1 => Expr::binary("sub", sub(rng), sub(rng)),
            2 | 3 => Expr::binary("mul", sub(rng), sub(rng)),
            4 => Expr::binary(
                "div",
                sub(rng),
                Expr::shifted(2.5, Expr::unary("tanh", sub(rng))),
            ),
            5 => Expr::unary("exp", Expr::scaled(0.5, Expr::unary("tanh", sub(rng)))),
            6 => Expr::unary("sin", sub(rng)),
            7 => Expr::unary("cos", sub(rng)),
            8 => Expr::unary("tanh", sub(rng)),
            _ => Expr::Linear {
                w: rng::normal(rng, &[dim, dim]).scale(0.7),
                b: Some(rng::normal(rng, &[dim]).scale(0.3)),
                arg: Box::new(sub(rng)),
            },
        }
    }
}

impl<P> Function<P> for Expr {
    fn eval<A: Array<Param = P>>(&self, x: &A) -> Result<A> {
        self.eval_with(x, None)
    }
}

impl<P> Dynamics<P> for Expr {
    fn eval<A: Array<Param = P>>(&self, z: &A, t: &A) -> Result<A> {
        self.eval_with(z, Some(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_compositions() {
        // f(x) = exp(x) * x + 1
        let f = Expr::shifted(
            1.0,
            Expr::binary("mul", Expr::unary("exp", Expr::Input), Expr::Input),
        );
        let x = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        let y = Function::<Tensor>::eval(&f, &x).unwrap();
        assert!((y.data()[0] - (0.5f64.exp() * 0.5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_primitive_is_unsupported() {
        let f = Expr::unary("log", Expr::Input);
        let x = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        assert_eq!(
            Function::<Tensor>::eval(&f, &x).unwrap_err(),
            Error::Unsupported("log".into())
        );
    }

    #[test]
    fn arity_is_checked() {
        let f = Expr::call("add", vec![Expr::Input]);
        let x = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        assert!(matches!(
            Function::<Tensor>::eval(&f, &x),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn pow_builds_monomials() {
        let x = Tensor::matrix(1, 1, vec![1.5]).unwrap();
        for n in 0..5 {
            let y = Function::<Tensor>::eval(&Expr::pow(Expr::Input, n), &x).unwrap();
            assert!((y.data()[0] - 1.5f64.powi(n as i32)).abs() < 1e-14);
        }
    }
}
