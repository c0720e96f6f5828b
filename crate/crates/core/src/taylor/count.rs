//! Scalar-operation counting.
//!
//! [`Counted`] wraps a tensor and charges a shared per-call counter for
//! every primitive it executes: one op per output element for elementwise
//! primitives (including `exp`, `sin`, `cos`, `tanh`), and `2 n` per output
//! element of a `linear` over `n` inputs. Column slicing and concatenation
//! move data only and are free.

use std::cell::Cell;
use std::rc::Rc;

use super::{jet, nested_jet};
use crate::array::{Array, Function};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Counted {
    value: Tensor,
    counter: Rc<Cell<u64>>,
}

impl Counted {
    pub fn new(value: Tensor, counter: Rc<Cell<u64>>) -> Self {
        Counted { value, counter }
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    fn charge(&self, ops: usize) {
        self.counter.set(self.counter.get() + ops as u64);
    }

    fn wrap(&self, value: Tensor) -> Self {
        Counted {
            value,
            counter: self.counter.clone(),
        }
    }

    fn elementwise(&self, value: Tensor) -> Self {
        self.charge(value.len());
        self.wrap(value)
    }
}

impl Array for Counted {
    type Param = Counted;

    fn shape(&self) -> Vec<usize> {
        self.value.shape().to_vec()
    }
    fn primal(&self) -> Tensor {
        self.value.clone()
    }
    fn constant(&self, value: &Tensor) -> Self {
        self.wrap(value.clone())
    }
    fn param(&self, value: &Tensor) -> Self {
        self.wrap(value.clone())
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        Ok(self.elementwise(self.value.add(&rhs.value)?))
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(self.elementwise(self.value.sub(&rhs.value)?))
    }
    fn mul(&self, rhs: &Self) -> Result<Self> {
        Ok(self.elementwise(self.value.mul(&rhs.value)?))
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.elementwise(self.value.div(&rhs.value)?))
    }
    fn scale(&self, c: f64) -> Self {
        self.elementwise(self.value.scale(c))
    }
    fn add_scalar(&self, c: f64) -> Self {
        self.elementwise(self.value.add_scalar(c))
    }
    fn exp(&self) -> Self {
        self.elementwise(self.value.exp())
    }
    fn sin(&self) -> Self {
        self.elementwise(self.value.sin())
    }
    fn cos(&self) -> Self {
        self.elementwise(self.value.cos())
    }
    fn tanh(&self) -> Self {
        self.elementwise(self.value.tanh())
    }
    fn linear(&self, w: &Self, b: Option<&Self>) -> Result<Self> {
        let out = self.value.linear(&w.value, b.map(|b| &b.value))?;
        let inputs = w.value.shape()[1];
        self.charge(out.len() * 2 * inputs);
        Ok(self.wrap(out))
    }
    fn linear_t(&self, w: &Self) -> Result<Self> {
        let out = self.value.linear_t(&w.value)?;
        let inputs = w.value.shape()[0];
        self.charge(out.len() * 2 * inputs);
        Ok(self.wrap(out))
    }
    fn concat_cols(&self, rhs: &Self) -> Result<Self> {
        Ok(self.wrap(self.value.concat_cols(&rhs.value)?))
    }
    fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        Ok(self.wrap(self.value.take_cols(start, len)?))
    }
}

fn seeded(x0: &Tensor, order: usize) -> (Rc<Cell<u64>>, Counted, Vec<Counted>) {
    let counter = Rc::new(Cell::new(0));
    let x = Counted::new(x0.clone(), counter.clone());
    let series = (0..order)
        .map(|_| x.constant(&Tensor::ones(x0.shape())))
        .collect();
    (counter, x, series)
}

/// Scalar operations in one plain evaluation of `f`.
pub fn plain_opcount<F: Function<Counted>>(f: &F, x0: &Tensor) -> Result<u64> {
    let (counter, x, _) = seeded(x0, 0);
    f.eval(&x)?;
    Ok(counter.get())
}

/// Scalar operations in one Taylor-mode `jet` call at order `order`.
pub fn jet_opcount<F: Function<Counted>>(f: &F, x0: &Tensor, order: usize) -> Result<u64> {
    let (counter, x, series) = seeded(x0, order);
    jet(f, &x, &series)?;
    Ok(counter.get())
}

/// Scalar operations in the nested forward-mode oracle at order `order`.
pub fn nested_opcount<F: Function<Counted>>(f: &F, x0: &Tensor, order: usize) -> Result<u64> {
    let (counter, x, series) = seeded(x0, order);
    nested_jet(f, &x, &series)?;
    Ok(counter.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn counts_elementwise_ops() {
        let x0 = Tensor::matrix(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let f = Expr::unary("exp", Expr::binary("mul", Expr::Input, Expr::Input));
        assert_eq!(plain_opcount(&f, &x0).unwrap(), 6);
        assert_eq!(jet_opcount(&f, &x0, 0).unwrap(), 6);
    }

    #[test]
    fn counters_are_per_call() {
        let x0 = Tensor::matrix(1, 2, vec![0.1, 0.2]).unwrap();
        let f = Expr::unary("tanh", Expr::Input);
        let a = jet_opcount(&f, &x0, 3).unwrap();
        let b = jet_opcount(&f, &x0, 3).unwrap();
        assert_eq!(a, b);
    }
}
