//! Two-layer time-conditioned MLP dynamics
//! `f(z, t) = W2 [tanh(W1 [tanh z ; t] + b1) ; t] + b2`.

use serde::{Deserialize, Serialize};

use crate::array::{Array, Dynamics};
use crate::error::{invalid, Result};
use crate::rng::{self, RngState};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Weights `W1: [h, d+1]`, `b1: [h]`, `W2: [d, h+1]`, `b2: [d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp<P = Tensor> {
    pub w1: P,
    pub b1: P,
    pub w2: P,
    pub b2: P,
}

pub type MlpParams = Mlp<Tensor>;

/// Affine readout `x W^T + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout<P = Tensor> {
    pub w: P,
    pub b: P,
}

fn uniform_layer(rng: &mut RngState, out: usize, fan_in: usize) -> (Tensor, Tensor) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (
        rng::uniform(rng, &[out, fan_in], -bound, bound),
        rng::uniform(rng, &[out], -bound, bound),
    )
}

impl Mlp<Tensor> {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
    pub fn init(rng: &mut RngState, dim: usize, hidden: usize) -> Self {
        let (w1, b1) = uniform_layer(rng, hidden, dim + 1);
        let (w2, b2) = uniform_layer(rng, dim, hidden + 1);
        Mlp { w1, b1, w2, b2 }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Mlp {
            w1: Tensor::zeros(&[hidden, dim + 1]),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::zeros(&[dim, hidden + 1]),
            b2: Tensor::zeros(&[dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.b2.len()
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.dim(), self.hidden());
        let ok = self.w1.shape() == [h, d + 1]
            && self.w2.shape() == [d, h + 1]
            && self.b1.shape() == [h]
            && self.b2.shape() == [d];
        if !ok {
            return Err(invalid("inconsistent MLP parameter shapes"));
        }
        if ![&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|t| t.is_finite())
        {
            return Err(invalid("non-finite MLP parameters"));
        }
        Ok(())
    }
}

impl<P> Mlp<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> Mlp<Q> {
        Mlp {
            w1: f(&self.w1),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
        }
    }

    pub fn into_vec(self) -> Vec<P> {
        vec![self.w1, self.b1, self.w2, self.b2]
    }
}

impl<'t> Mlp<Var<'t>> {
    /// Places the weights on `tape` as differentiable leaves.
    pub fn leaves(params: &MlpParams, tape: &'t Tape) -> Self {
        params.map(|p| tape.leaf(p.clone()))
    }
}

impl Readout<Tensor> {
    pub fn init(rng: &mut RngState, inputs: usize, outputs: usize) -> Self {
        let (w, b) = uniform_layer(rng, outputs, inputs);
        Readout { w, b }
    }
}

impl<P> Readout<P> {
    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> Readout<Q> {
        Readout {
            w: f(&self.w),
            b: f(&self.b),
        }
    }

    pub fn apply<A: Array<Param = P>>(&self, x: &A) -> Result<A> {
        x.linear(&self.w, Some(&self.b))
    }
}

fn forward<A: Array>(z: &A, t: &A, m: &Mlp<A::Param>) -> Result<A> {
    let h1 = z.tanh().concat_cols(t)?.linear(&m.w1, Some(&m.b1))?;
    h1.tanh().concat_cols(t)?.linear(&m.w2, Some(&m.b2))
}

/// `v^T df/dz` by the chain rule written out in primitives.
fn vjp<A: Array>(z: &A, t: &A, v: &A, m: &Mlp<A::Param>) -> Result<A> {
    let a = z.tanh();
    let s = a.concat_cols(t)?.linear(&m.w1, Some(&m.b1))?.tanh();
    let (dim, hidden) = (z.shape()[1], s.shape()[1]);
    let gs = v.linear_t(&m.w2)?.take_cols(0, hidden)?;
    let gh = gs.mul(&one_minus_square(&s)?)?;
    let ga = gh.linear_t(&m.w1)?.take_cols(0, dim)?;
    ga.mul(&one_minus_square(&a)?)
}

fn one_minus_square<A: Array>(x: &A) -> Result<A> {
    Ok(x.mul(x)?.scale(-1.0).add_scalar(1.0))
}

/// Tensor weights act as constants in any carrier.
impl<P> Dynamics<P> for Mlp<Tensor> {
    fn eval<A: Array<Param = P>>(&self, z: &A, t: &A) -> Result<A> {
        forward(z, t, &self.map(|w| z.param(w)))
    }

    fn vjp_z<A: Array<Param = P>>(&self, z: &A, t: &A, v: &A) -> Result<A> {
        vjp(z, t, v, &self.map(|w| z.param(w)))
    }
}

/// Taped weights, for gradients with respect to the parameters.
impl<'t> Dynamics<Var<'t>> for Mlp<Var<'t>> {
    fn eval<A: Array<Param = Var<'t>>>(&self, z: &A, t: &A) -> Result<A> {
        forward(z, t, self)
    }

    fn vjp_z<A: Array<Param = Var<'t>>>(&self, z: &A, t: &A, v: &A) -> Result<A> {
        vjp(z, t, v, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::eval_at;

    #[test]
    fn zero_weights_give_bias() {
        let mut m = Mlp::zeros(2, 3);
        m.b2 = Tensor::from_vec(vec![0.5, -1.0]);
        let z = Tensor::matrix(1, 2, vec![0.3, 0.7]).unwrap();
        assert_eq!(
            eval_at(&m, &z, 0.4).unwrap(),
            Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap()
        );
    }

    #[test]
    fn scalar_mlp_matches_hand_formula() {
        let mut rng = RngState::new(3);
        let m = Mlp::init(&mut rng, 1, 4);
        let (z, t): (f64, f64) = (0.37, 0.81);
        let w1 = m.w1.data();
        let w2 = m.w2.data();
        let mut out = m.b2.data()[0];
        for i in 0..4 {
            let h = (w1[2 * i] * z.tanh() + w1[2 * i + 1] * t + m.b1.data()[i]).tanh();
            out += w2[i] * h;
        }
        out += w2[4] * t;
        let got = eval_at(&m, &Tensor::matrix(1, 1, vec![z]).unwrap(), t).unwrap();
        assert!((got.data()[0] - out).abs() < 1e-14);
    }

    #[test]
    fn init_is_bounded() {
        let mut rng = RngState::new(0);
        let m = Mlp::init(&mut rng, 2, 8);
        m.validate().unwrap();
        let b = 1.0 / 3f64.sqrt();
        assert!(m.w1.data().iter().all(|w| w.abs() <= b));
    }
}
