//! Taylor-mode automatic differentiation, explicit Runge-Kutta solvers and
//! neural ODEs trained with a solver-cost regularizer.
//!
//! The crate is organised around the [`Array`] trait: dynamics are written
//! once against it and then evaluated on plain tensors, truncated Taylor
//! series, nested dual numbers, reverse-mode tape variables or operation
//! counters.

// `!(x <= bound)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod error;
pub mod expr;
pub mod node;
pub mod ode;
pub mod rng;
pub mod tape;
pub mod taylor;
pub mod tensor;

pub use array::{eval_at, Array, Autonomous, Dynamics, Function, Primitive, Reduce};
pub use error::{Error, Result};
pub use tensor::Tensor;
