//! Tape-based reverse mode.
//!
//! A [`Tape`] is an append-only list of nodes; a node's inputs always have
//! smaller ids, so one reverse sweep in id order is a valid topological
//! traversal. [`Var`] is the [`Array`] carrier that records onto a tape,
//! which means anything written against `Array` (including the Taylor
//! recurrences, whose building blocks are these same primitives) can be
//! differentiated.

use std::cell::{Cell, RefCell};

use crate::array::{Array, Function, Primitive, Reduce};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Exp(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Tanh(NodeId),
    Ln(NodeId),
    Linear(NodeId, NodeId, Option<NodeId>),
    LinearT(NodeId, NodeId),
    ConcatCols(NodeId, NodeId),
    TakeCols(NodeId, usize, usize),
    RowSum(NodeId),
    Sum(NodeId),
    BroadcastCols(NodeId, usize),
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match *self {
            Op::Leaf | Op::Const => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::LinearT(a, b)
            | Op::ConcatCols(a, b) => vec![a, b],
            Op::Linear(x, w, b) => {
                let mut v = vec![x, w];
                v.extend(b);
                v
            }
            Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::Exp(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Tanh(a)
            | Op::Ln(a)
            | Op::TakeCols(a, _, _)
            | Op::RowSum(a)
            | Op::Sum(a)
            | Op::BroadcastCols(a, _) => vec![a],
        }
    }

    fn primitive(&self) -> Option<Primitive> {
        Some(match self {
            Op::Add(..) => Primitive::Add,
            Op::Sub(..) => Primitive::Sub,
            Op::Mul(..) => Primitive::Mul,
            Op::Div(..) => Primitive::Div,
            Op::Scale(..) => Primitive::Scale,
            Op::AddScalar(..) => Primitive::AddScalar,
            Op::Exp(..) => Primitive::Exp,
            Op::Sin(..) => Primitive::Sin,
            Op::Cos(..) => Primitive::Cos,
            Op::Tanh(..) => Primitive::Tanh,
            Op::Linear(..) => Primitive::Linear,
            Op::LinearT(..) => Primitive::LinearT,
            Op::ConcatCols(..) => Primitive::ConcatCols,
            Op::TakeCols(..) => Primitive::TakeCols,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation. Interior mutability lets many [`Var`]s append to
/// one tape through shared references.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<(Primitive, f64)>>,
}

/// Gradients of a scalar output, indexed by node id. Nodes that do not
/// reach the output have exactly zero gradient.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Tensor {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[id]),
        }
    }

    pub fn wrt(&self, v: &Var<'_>) -> Tensor {
        self.get(v.id)
    }

    /// Whether any gradient flowed into `id`.
    pub fn reached(&self, id: NodeId) -> bool {
        self.grads[id].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// A constant input; it never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Const)
    }

    pub fn value(&self, id: NodeId) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    /// Scales the reverse partial of every `primitive` node by `factor`.
    /// Negative-control hook for gradient checks; `None` restores exact rules.
    pub fn inject_fault(&self, fault: Option<(Primitive, f64)>) {
        self.fault.set(fault);
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn apply(&self, op: Op) -> Result<Var<'_>> {
        let value = {
            let nodes = self.nodes.borrow();
            forward(&op, |i| &nodes[i].value)?
        };
        Ok(self.push(value, op))
    }

    /// Re-evaluates every node from the recorded leaves and constants.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let nodes = self.nodes.borrow();
        let mut values: Vec<Tensor> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = match node.op {
                Op::Leaf | Op::Const => node.value.clone(),
                ref op => forward(op, |i| &values[i])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Whether [`Tape::replay`] reproduces every stored value bit for bit.
    pub fn replays_exactly(&self) -> Result<bool> {
        let replayed = self.replay()?;
        let nodes = self.nodes.borrow();
        Ok(nodes.iter().zip(&replayed).all(|(n, r)| {
            n.value.shape() == r.shape()
                && n
                    .value
                    .data()
                    .iter()
                    .zip(r.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits())
        }))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: &Var<'_>) -> Result<Gradients> {
        let shape = self.nodes.borrow()[output.id].value.shape().to_vec();
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalar(shape));
        }
        self.backward_with_seed(output, &Tensor::ones(&shape))
    }

    /// Reverse sweep seeded with `seed` (same shape as `output`), i.e. a
    /// vector-Jacobian product.
    pub fn backward_with_seed(&self, output: &Var<'_>, seed: &Tensor) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let out_shape = nodes[output.id].value.shape();
        if seed.shape() != out_shape {
            return Err(Error::ShapeMismatch {
                op: "backward seed",
                left: out_shape.to_vec(),
                right: seed.shape().to_vec(),
            });
        }
        let n = output.id + 1;
        // Only nodes that depend on a leaf carry gradients.
        let mut live = vec![false; n];
        for i in 0..n {
            live[i] = match nodes[i].op {
                Op::Leaf => true,
                Op::Const => false,
                ref op => op.inputs().iter().any(|&j| live[j]),
            };
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[output.id] = Some(seed.clone());
        let fault = self.fault.get();
        for i in (0..n).rev() {
            if !live[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let factor = match (fault, node.op.primitive()) {
                (Some((p, f)), Some(q)) if p == q => f,
                _ => 1.0,
            };
            for (j, gj) in partials(node, &g, |k| &nodes[k].value)? {
                if !live[j] {
                    continue;
                }
                let gj = if factor != 1.0 { gj.scale(factor) } else { gj };
                grads[j] = Some(match grads[j].take() {
                    Some(acc) => acc.add(&gj)?,
                    None => gj,
                });
            }
            grads[i] = Some(g);
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn forward<'a>(op: &Op, v: impl Fn(NodeId) -> &'a Tensor) -> Result<Tensor> {
    Ok(match *op {
        Op::Leaf | Op::Const => unreachable!("inputs carry their own values"),
        Op::Add(a, b) => v(a).add(v(b))?,
        Op::Sub(a, b) => v(a).sub(v(b))?,
        Op::Mul(a, b) => v(a).mul(v(b))?,
        Op::Div(a, b) => v(a).div(v(b))?,
        Op::Scale(a, c) => v(a).scale(c),
        Op::AddScalar(a, c) => v(a).add_scalar(c),
        Op::Exp(a) => v(a).exp(),
        Op::Sin(a) => v(a).sin(),
        Op::Cos(a) => v(a).cos(),
        Op::Tanh(a) => v(a).tanh(),
        Op::Ln(a) => v(a).ln(),
        Op::Linear(x, w, b) => v(x).linear(v(w), b.map(&v))?,
        Op::LinearT(x, w) => v(x).linear_t(v(w))?,
        Op::ConcatCols(a, b) => v(a).concat_cols(v(b))?,
        Op::TakeCols(a, s, l) => v(a).take_cols(s, l)?,
        Op::RowSum(a) => v(a).row_sum()?,
        Op::Sum(a) => v(a).sum(),
        Op::BroadcastCols(a, n) => v(a).broadcast_cols(n)?,
    })
}

/// `(input id, g * d node / d input)` for each input of `node`.
fn partials<'a>(
    node: &Node,
    g: &Tensor,
    v: impl Fn(NodeId) -> &'a Tensor,
) -> Result<Vec<(NodeId, Tensor)>> {
    let y = &node.value;
    Ok(match node.op {
        Op::Leaf | Op::Const => vec![],
        Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
        Op::Sub(a, b) => vec![(a, g.clone()), (b, g.neg())],
        Op::Mul(a, b) => vec![(a, g.mul(v(b))?), (b, g.mul(v(a))?)],
        Op::Div(a, b) => {
            let ga = g.div(v(b))?;
            let gb = ga.mul(y)?.neg();
            vec![(a, ga), (b, gb)]
        }
        Op::Scale(a, c) => vec![(a, g.scale(c))],
        Op::AddScalar(a, _) => vec![(a, g.clone())],
        Op::Exp(a) => vec![(a, g.mul(y)?)],
        Op::Sin(a) => vec![(a, g.mul(&v(a).cos())?)],
        Op::Cos(a) => vec![(a, g.mul(&v(a).sin())?.neg())],
        Op::Tanh(a) => vec![(a, g.mul(&y.map(|t| 1.0 - t * t))?)],
        Op::Ln(a) => vec![(a, g.div(v(a))?)],
        Op::Linear(x, w, b) => {
            let mut out = vec![(x, g.linear_t(v(w))?), (w, g.t_matmul(v(x))?)];
            if let Some(b) = b {
                out.push((b, g.col_sum()?));
            }
            out
        }
        Op::LinearT(x, w) => vec![(x, g.linear(v(w), None)?), (w, v(x).t_matmul(g)?)],
        Op::ConcatCols(a, b) => {
            let na = v(a).shape()[1];
            let nb = v(b).shape()[1];
            vec![(a, g.take_cols(0, na)?), (b, g.take_cols(na, nb)?)]
        }
        Op::TakeCols(a, s, _) => vec![(a, g.pad_cols(s, v(a).shape()[1])?)],
        Op::RowSum(a) => vec![(a, g.broadcast_cols(v(a).shape()[1])?)],
        Op::Sum(a) => vec![(a, Tensor::full(v(a).shape(), g.data()[0]))],
        Op::BroadcastCols(a, _) => vec![(a, g.row_sum()?)],
    })
}

/// A tensor-valued node on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(self.id)
    }

    fn op(&self, op: Op) -> Result<Self> {
        self.tape.apply(op)
    }

    fn infallible(&self, op: Op) -> Self {
        self.tape.apply(op).expect("elementwise op cannot fail")
    }
}

impl<'t> Array for Var<'t> {
    type Param = Var<'t>;

    fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }
    fn primal(&self) -> Tensor {
        self.value()
    }
    fn constant(&self, value: &Tensor) -> Self {
        self.tape.constant(value.clone())
    }
    fn param(&self, value: &Tensor) -> Self {
        self.tape.constant(value.clone())
    }
    fn add(&self, rhs: &Self) -> Result<Self> {
        self.op(Op::Add(self.id, rhs.id))
    }
    fn sub(&self, rhs: &Self) -> Result<Self> {
        self.op(Op::Sub(self.id, rhs.id))
    }
    fn mul(&self, rhs: &Self) -> Result<Self> {
        self.op(Op::Mul(self.id, rhs.id))
    }
    fn div(&self, rhs: &Self) -> Result<Self> {
        self.op(Op::Div(self.id, rhs.id))
    }
    fn scale(&self, c: f64) -> Self {
        self.infallible(Op::Scale(self.id, c))
    }
    fn add_scalar(&self, c: f64) -> Self {
        self.infallible(Op::AddScalar(self.id, c))
    }
    fn exp(&self) -> Self {
        self.infallible(Op::Exp(self.id))
    }
    fn sin(&self) -> Self {
        self.infallible(Op::Sin(self.id))
    }
    fn cos(&self) -> Self {
        self.infallible(Op::Cos(self.id))
    }
    fn tanh(&self) -> Self {
        self.infallible(Op::Tanh(self.id))
    }
    fn linear(&self, w: &Self, b: Option<&Self>) -> Result<Self> {
        self.op(Op::Linear(self.id, w.id, b.map(|b| b.id)))
    }
    fn linear_t(&self, w: &Self) -> Result<Self> {
        self.op(Op::LinearT(self.id, w.id))
    }
    fn concat_cols(&self, rhs: &Self) -> Result<Self> {
        self.op(Op::ConcatCols(self.id, rhs.id))
    }
    fn take_cols(&self, start: usize, len: usize) -> Result<Self> {
        self.op(Op::TakeCols(self.id, start, len))
    }
}

impl Reduce for Var<'_> {
    fn ln(&self) -> Self {
        self.infallible(Op::Ln(self.id))
    }
    fn sum(&self) -> Self {
        self.infallible(Op::Sum(self.id))
    }
    fn row_sum(&self) -> Result<Self> {
        self.op(Op::RowSum(self.id))
    }
    fn broadcast_cols(&self, n: usize) -> Result<Self> {
        self.op(Op::BroadcastCols(self.id, n))
    }
}

/// A finished recording: the tape, its input leaves and its output node.
#[derive(Debug)]
pub struct Recording {
    pub tape: Tape,
    pub inputs: Vec<NodeId>,
    pub output: NodeId,
}

impl Recording {
    pub fn output_value(&self) -> Tensor {
        self.tape.value(self.output)
    }

    /// Gradients of the (scalar) output with respect to each input.
    pub fn gradients(&self) -> Result<Vec<Tensor>> {
        let out = Var {
            tape: &self.tape,
            id: self.output,
        };
        let g = self.tape.backward(&out)?;
        Ok(self.inputs.iter().map(|&i| g.get(i)).collect())
    }
}

/// Records `f` applied to fresh leaves holding `inputs`.
pub fn record<F>(inputs: &[Tensor], f: F) -> Result<Recording>
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let (inputs, output) = {
        let leaves: Vec<Var<'_>> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&leaves)?;
        (leaves.iter().map(Var::id).collect(), out.id)
    };
    Ok(Recording {
        tape,
        inputs,
        output,
    })
}

/// `v^T (df/dx)` at `x`, without forming the Jacobian.
pub fn vjp<F>(f: &F, x: &Tensor, v: &Tensor) -> Result<Tensor>
where
    F: for<'t> Function<Var<'t>>,
{
    let tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let y = f.eval(&xv)?;
    Ok(tape.backward_with_seed(&y, v)?.wrt(&xv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn identity_records_one_node() {
        let rec = record(&[Tensor::scalar(3.0)], |xs| Ok(xs[0])).unwrap();
        assert_eq!(rec.tape.len(), 1);
        assert_eq!(rec.output_value(), Tensor::scalar(3.0));
    }

    #[test]
    fn square_gradient() {
        let rec = record(&[Tensor::scalar(3.0)], |xs| xs[0].mul(&xs[0])).unwrap();
        assert_eq!(rec.output_value(), Tensor::scalar(9.0));
        assert_eq!(rec.gradients().unwrap(), vec![Tensor::scalar(6.0)]);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let rec = record(&[Tensor::from_vec(vec![1.0, 2.0])], |xs| Ok(xs[0].exp())).unwrap();
        assert_eq!(rec.gradients().unwrap_err(), Error::NonScalar(vec![2]));
    }

    #[test]
    fn unreachable_leaf_gets_exact_zero() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(2.0));
        let b = tape.leaf(Tensor::from_vec(vec![1.0, 1.0]));
        let y = a.exp();
        let g = tape.backward(&y).unwrap();
        assert!(!g.reached(b.id()));
        assert_eq!(g.wrt(&b), Tensor::zeros(&[2]));
    }

    #[test]
    fn vjp_of_linear_is_transpose() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let f = Expr::Linear {
            w: w.clone(),
            b: None,
            arg: Box::new(Expr::Input),
        };
        let x = Tensor::matrix(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let v = Tensor::matrix(1, 2, vec![1.0, -1.0]).unwrap();
        assert_eq!(vjp(&f, &x, &v).unwrap(), v.linear_t(&w).unwrap());
        assert_eq!(vjp(&Expr::Input, &x, &x).unwrap(), x);
    }

    #[test]
    fn replay_is_bit_exact() {
        let rec = record(&[Tensor::from_vec(vec![0.3, -1.2])], |xs| {
            Ok(xs[0].tanh().mul(&xs[0].sin())?.exp().sum())
        })
        .unwrap();
        assert!(rec.tape.replays_exactly().unwrap());
    }

    #[test]
    fn fault_injection_changes_gradient() {
        let rec = record(&[Tensor::scalar(0.5)], |xs| Ok(xs[0].tanh())).unwrap();
        let clean = rec.gradients().unwrap()[0].item().unwrap();
        rec.tape.inject_fault(Some((Primitive::Tanh, 1.5)));
        let bad = rec.gradients().unwrap()[0].item().unwrap();
        assert!((bad - 1.5 * clean).abs() < 1e-15);
    }
}
