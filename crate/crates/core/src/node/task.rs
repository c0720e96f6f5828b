//! Synthetic supervised tasks.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::RngState;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Scalar regression `x -> x + x^3`. Inputs are stratified on
    /// `[-1, 1]`: one uniform draw in each of `n` equal cells.
    ToyMap,
    /// Two interleaved planar spirals, lifted to a 4-dimensional state by
    /// zero padding and classified by an affine readout.
    Spirals,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Regression(Tensor),
    Classes(Vec<usize>),
}

/// Initial states `x: [B, d]` (already lifted) and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub target: Target,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const SPIRAL_STATE_DIM: usize = 4;

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::ToyMap => "toy_map",
            Task::Spirals => "spirals",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "toy_map" => Ok(Task::ToyMap),
            "spirals" => Ok(Task::Spirals),
            other => Err(crate::error::invalid(format!("unknown task `{other}`"))),
        }
    }

    /// Dimension of the ODE state.
    pub fn state_dim(self) -> usize {
        match self {
            Task::ToyMap => 1,
            Task::Spirals => SPIRAL_STATE_DIM,
        }
    }

    /// Number of classes, or `None` for regression.
    pub fn classes(self) -> Option<usize> {
        match self {
            Task::ToyMap => None,
            Task::Spirals => Some(2),
        }
    }

    pub fn generate(self, rng: &mut RngState, n: usize) -> Result<Dataset> {
        match self {
            Task::ToyMap => {
                let x: Vec<f64> = (0..n)
                    .map(|i| -1.0 + 2.0 * (i as f64 + rng.next_f64()) / n as f64)
                    .collect();
                let y: Vec<f64> = x.iter().map(|v| v + v * v * v).collect();
                Ok(Dataset {
                    x: Tensor::matrix(n, 1, x)?,
                    target: Target::Regression(Tensor::matrix(n, 1, y)?),
                })
            }
            Task::Spirals => {
                let mut pts = Vec::with_capacity(2 * n);
                let mut labels = Vec::with_capacity(n);
                for i in 0..n {
                    let class = i % 2;
                    let s = rng.next_f64();
                    let theta = 0.5 + 2.5 * std::f64::consts::PI * s;
                    let r = 0.25 + 0.75 * s;
                    let phase = std::f64::consts::PI * class as f64;
                    pts.push(r * (theta + phase).cos() + 0.03 * rng.normal_f64());
                    pts.push(r * (theta + phase).sin() + 0.03 * rng.normal_f64());
                    labels.push(class);
                }
                let x = Tensor::matrix(n, 2, pts)?.pad_cols(0, SPIRAL_STATE_DIM)?;
                Ok(Dataset {
                    x,
                    target: Target::Classes(labels),
                })
            }
        }
    }
}
