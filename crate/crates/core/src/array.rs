//! The closed set of differentiable primitives.
//!
//! Everything that has to be evaluated in more than one "mode" (plain
//! values, truncated Taylor series, nested dual numbers, taped reverse-mode
//! variables, op counting) is written against [`Array`]. A carrier type
//! implements every primitive once; user functions compose them.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Registered primitives. Adding one means implementing it for every
/// [`Array`] carrier, which includes a Taylor rule and reverse partials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    AddScalar,
    Exp,
    Sin,
    Cos,
    Tanh,
    Linear,
    LinearT,
    ConcatCols,
    TakeCols,
}

impl Primitive {
    pub const ALL: [Primitive; 14] = [
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Div,
        Primitive::Scale,
        Primitive::AddScalar,
        Primitive::Exp,
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Tanh,
        Primitive::Linear,
        Primitive::LinearT,
        Primitive::ConcatCols,
        Primitive::TakeCols,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Scale => "scale",
            Primitive::AddScalar => "add_scalar",
            Primitive::Exp => "exp",
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Tanh => "tanh",
            Primitive::Linear => "matvec",
            Primitive::LinearT => "matvec_t",
            Primitive::ConcatCols => "concat",
            Primitive::TakeCols => "take",
        }
    }

    /// Number of array operands (parameters such as weights or scalars
    /// are not counted).
    pub fn arity(self) -> usize {
        match self {
            Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::Div
            | Primitive::ConcatCols => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Unsupported(name.to_string()))
    }
}

/// A value that supports the registered primitives.
///
/// `Param` is the type of quantities that are constant along a Taylor
/// expansion (layer weights). For plain carriers it is `Self`.
pub trait Array: Clone + Sized {
    type Param: Clone;

    fn shape(&self) -> Vec<usize>;
    /// The underlying value (the zeroth coefficient for series types).
    fn primal(&self) -> Tensor;
    /// A constant living in the same context as `self`.
    fn constant(&self, value: &Tensor) -> Self;
    /// A constant parameter living in the same context as `self`.
    fn param(&self, value: &Tensor) -> Self::Param;

    fn add(&self, rhs: &Self) -> Result<Self>;
    fn sub(&self, rhs: &Self) -> Result<Self>;
    fn mul(&self, rhs: &Self) -> Result<Self>;
    fn div(&self, rhs: &Self) -> Result<Self>;
    fn scale(&self, c: f64) -> Self;
    fn add_scalar(&self, c: f64) -> Self;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    /// `x W^T + b` over batch rows.
    fn linear(&self, w: &Self::Param, b: Option<&Self::Param>) -> Result<Self>;
    /// `x W` over batch rows.
    fn linear_t(&self, w: &Self::Param) -> Result<Self>;
    fn concat_cols(&self, rhs: &Self) -> Result<Self>;
    fn take_cols(&self, start: usize, len: usize) -> Result<Self>;

    fn apply_unary(&self, p: Primitive) -> Result<Self> {
        Ok(match p {
            Primitive::Exp => self.exp(),
            Primitive::Sin => self.sin(),
            Primitive::Cos => self.cos(),
            Primitive::Tanh => self.tanh(),
            other => return Err(Error::Unsupported(format!("{} as unary", other.name()))),
        })
    }

    fn apply_binary(&self, p: Primitive, rhs: &Self) -> Result<Self> {
        match p {
            Primitive::Add => self.add(rhs),
            Primitive::Sub => self.sub(rhs),
            Primitive::Mul => self.mul(rhs),
            Primitive::Div => self.div(rhs),
            Primitive::ConcatCols => self.concat_cols(rhs),
            other => Err(Error::Unsupported(format!("{} as binary", other.name()))),
        }
    }
}

/// Reductions needed by losses and regularizer integrands. Only plain
/// (non-series) carriers provide these.
pub trait Reduce: Array<Param = Self> {
    fn ln(&self) -> Self;
    fn sum(&self) -> Self;
    fn row_sum(&self) -> Result<Self>;
    fn broadcast_cols(&self, n: usize) -> Result<Self>;
}

impl Array for Tensor {
    type Param = Tensor;

    fn shape(&self) -> Vec<usize> {
        Tensor::shape(self).to_vec()
    }
    fn primal(&self) -> Tensor {
        self.clone()
    }
    fn constant(&self, value: &Tensor) -> Self {
        value.clone()
    }
    fn param(&self, value: &Tensor) -> Tensor {
        value.clone()
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        Tensor::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        Tensor::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Result<Self> {
        Tensor::mul(self, rhs)
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        Tensor::div(self, rhs)
    }
    fn scale(&self, c: f64) -> Self {
        Tensor::scale(self, c)
    }
    fn add_scalar(&self, c: f64) -> Self {
        Tensor::add_scalar(self, c)
    }
    fn exp(&self) -> Self {
        Tensor::exp(self)
    }
    fn sin(&self) -> Self {
        Tensor::sin(self)
    }
    fn cos(&self) -> Self {
        Tensor::cos(self)
    }
    fn tanh(&self) -> Self {
        Tensor::tanh(self)
    }
    fn linear(&self, w: &Tensor, b: Option<&Tensor>) -> Result<Self> {
        Tensor::linear(self, w, b)
    }
    fn linear_t(&self, w: &Tensor) -> Result<Self> {
        Tensor::linear_t(self, w)
    }
    fn concat_cols(&self, rhs: &Self) -> Result<Self> {
        Tensor::concat_cols(self, rhs)
    }
    fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        Tensor::take_cols(self, start, len)
    }
}

impl Reduce for Tensor {
    fn ln(&self) -> Self {
        Tensor::ln(self)
    }
    fn sum(&self) -> Self {
        Tensor::sum(self)
    }
    fn row_sum(&self) -> Result<Self> {
        Tensor::row_sum(self)
    }
    fn broadcast_cols(&self, n: usize) -> Result<Self> {
        Tensor::broadcast_cols(self, n)
    }
}

/// Time-dependent vector field `dz/dt = f(z, t)` over batched states
/// `z: [B, d]` and times `t: [B, 1]`.
pub trait Dynamics<P> {
    fn eval<A: Array<Param = P>>(&self, z: &A, t: &A) -> Result<A>;

    /// `v^T (df/dz)` expressed in primitives, so it can itself be
    /// differentiated. Only some dynamics provide it.
    fn vjp_z<A: Array<Param = P>>(&self, _z: &A, _t: &A, _v: &A) -> Result<A> {
        Err(Error::Unsupported("vjp_z".into()))
    }
}

/// Evaluates `f(z, t)` at a scalar time shared by every batch row.
pub fn eval_at<P, D: Dynamics<P>, A: Array<Param = P>>(f: &D, z: &A, t: f64) -> Result<A> {
    let rows = z.shape().first().copied().unwrap_or(1);
    let tcol = z.constant(&Tensor::full(&[rows, 1], t));
    f.eval(z, &tcol)
}

/// A function of a single batched array.
pub trait Function<P> {
    fn eval<A: Array<Param = P>>(&self, x: &A) -> Result<A>;
}

/// Autonomous form of a time-dependent field: the state `[z ; t]` carries
/// time as its last column, and time has unit dynamics.
pub struct Autonomous<'a, D> {
    pub dynamics: &'a D,
    pub dim: usize,
}

impl<'a, D> Autonomous<'a, D> {
    pub fn new(dynamics: &'a D, dim: usize) -> Self {
        Autonomous { dynamics, dim }
    }
}

impl<P, D: Dynamics<P>> Function<P> for Autonomous<'_, D> {
    fn eval<A: Array<Param = P>>(&self, x: &A) -> Result<A> {
        let z = x.take_cols(0, self.dim)?;
        let t = x.take_cols(self.dim, 1)?;
        let dz = self.dynamics.eval(&z, &t)?;
        let one = t.constant(&Tensor::ones(&t.shape()));
        dz.concat_cols(&one)
    }
}
