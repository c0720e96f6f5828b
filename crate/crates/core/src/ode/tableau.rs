//! Explicit Butcher tableaus and their order conditions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// An explicit Runge-Kutta method. `a` is stored as full rows, strictly
/// lower triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Weights of the embedded lower-order solution, if any.
    pub b_err: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Checks the structural invariants: square strictly lower `a`,
    /// `c_i = sum_j a_ij`, `sum b = 1`.
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if self.a.len() != s || self.c.len() != s {
            return Err(invalid(format!("{}: inconsistent stage count", self.name)));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != s || row[i..].iter().any(|&v| v != 0.0) {
                return Err(invalid(format!("{}: a is not strictly lower", self.name)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - self.c[i]).abs() > 1e-14 {
                return Err(invalid(format!("{}: row {i} does not sum to c", self.name)));
            }
        }
        let weights = std::iter::once(&self.b).chain(self.b_err.as_ref());
        for w in weights {
            if w.len() != s || (w.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
                return Err(invalid(format!("{}: weights do not sum to 1", self.name)));
            }
        }
        Ok(())
    }

    /// Largest `p` such that `weights` satisfy every order condition up to
    /// `p` (checked up to order 5) within `tol`.
    pub fn satisfied_order(&self, weights: &[f64], tol: f64) -> usize {
        let forest = rooted_trees(5);
        let mut order = 0;
        for (n, trees) in forest.iter().enumerate().skip(1) {
            let ok = trees.iter().all(|t| {
                let phi: f64 = weights
                    .iter()
                    .zip(self.stage_weights(t))
                    .map(|(b, p)| b * p)
                    .sum();
                (phi - 1.0 / t.gamma()).abs() <= tol
            });
            if !ok {
                break;
            }
            order = n;
        }
        order
    }

    /// `Phi_i(t)` for each stage `i`.
    fn stage_weights(&self, t: &Tree) -> Vec<f64> {
        let s = self.stages();
        let mut out = vec![1.0; s];
        for child in &t.0 {
            let inner = self.stage_weights(child);
            for (i, o) in out.iter_mut().enumerate() {
                *o *= (0..s).map(|j| self.a[i][j] * inner[j]).sum::<f64>();
            }
        }
        out
    }

    pub fn heun21() -> Self {
        ButcherTableau {
            name: "heun21",
            a: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            b: vec![0.5, 0.5],
            b_err: Some(vec![1.0, 0.0]),
            c: vec![0.0, 1.0],
            order: 2,
            embedded_order: Some(1),
        }
    }

    pub fn bogacki_shampine32() -> Self {
        ButcherTableau {
            name: "bogacki_shampine32",
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.75, 0.0, 0.0],
                vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            ],
            b: vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            b_err: Some(vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125]),
            c: vec![0.0, 0.5, 0.75, 1.0],
            order: 3,
            embedded_order: Some(2),
        }
    }

    pub fn dormand_prince54() -> Self {
        let b = vec![
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        ButcherTableau {
            name: "dormand_prince54",
            a: vec![
                vec![0.0; 7],
                vec![1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0, 0.0],
                vec![
                    19372.0 / 6561.0,
                    -25360.0 / 2187.0,
                    64448.0 / 6561.0,
                    -212.0 / 729.0,
                    0.0,
                    0.0,
                    0.0,
                ],
                vec![
                    9017.0 / 3168.0,
                    -355.0 / 33.0,
                    46732.0 / 5247.0,
                    49.0 / 176.0,
                    -5103.0 / 18656.0,
                    0.0,
                    0.0,
                ],
                {
                    let mut row = b.clone();
                    row[6] = 0.0;
                    row
                },
            ],
            b,
            b_err: Some(vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ]),
            c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
            order: 5,
            embedded_order: Some(4),
        }
    }

    pub fn rk4() -> Self {
        ButcherTableau {
            name: "rk4_fixed",
            a: vec![
                vec![0.0; 4],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            b_err: None,
            c: vec![0.0, 0.5, 0.5, 1.0],
            order: 4,
            embedded_order: None,
        }
    }
}

/// Names of the built-in methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableauId {
    Heun21,
    BogackiShampine32,
    DormandPrince54,
    #[serde(rename = "rk4_fixed")]
    Rk4,
}

impl TableauId {
    pub const ALL: [TableauId; 4] = [
        TableauId::Heun21,
        TableauId::BogackiShampine32,
        TableauId::DormandPrince54,
        TableauId::Rk4,
    ];

    pub fn tableau(self) -> ButcherTableau {
        match self {
            TableauId::Heun21 => ButcherTableau::heun21(),
            TableauId::BogackiShampine32 => ButcherTableau::bogacki_shampine32(),
            TableauId::DormandPrince54 => ButcherTableau::dormand_prince54(),
            TableauId::Rk4 => ButcherTableau::rk4(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableauId::Heun21 => "heun21",
            TableauId::BogackiShampine32 => "bogacki_shampine32",
            TableauId::DormandPrince54 => "dormand_prince54",
            TableauId::Rk4 => "rk4_fixed",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        TableauId::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| invalid(format!("unknown tableau `{name}`")))
    }

    /// The adaptive method of the given order (2, 3 or 5).
    pub fn adaptive_of_order(order: usize) -> Result<Self> {
        match order {
            2 => Ok(TableauId::Heun21),
            3 => Ok(TableauId::BogackiShampine32),
            5 => Ok(TableauId::DormandPrince54),
            _ => Err(invalid(format!("no adaptive solver of order {order}"))),
        }
    }

    pub fn order(self) -> usize {
        self.tableau().order
    }
}

/// All built-in tableaus.
pub fn builtin_tableaus() -> Vec<ButcherTableau> {
    TableauId::ALL.iter().map(|t| t.tableau()).collect()
}

/// A rooted tree, as the list of subtrees hanging off its root.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree(pub Vec<Tree>);

impl Tree {
    pub fn order(&self) -> usize {
        1 + self.0.iter().map(Tree::order).sum::<usize>()
    }

    /// Density `gamma(t) = |t| * prod gamma(children)`.
    pub fn gamma(&self) -> f64 {
        self.order() as f64 * self.0.iter().map(Tree::gamma).product::<f64>()
    }
}

/// Rooted trees grouped by order, `result[n]` holding all trees with `n`
/// vertices (1, 1, 2, 4, 9 for n = 1..5).
pub fn rooted_trees(max_order: usize) -> Vec<Vec<Tree>> {
    let mut by_order: Vec<Vec<Tree>> = vec![vec![]; max_order + 1];
    if max_order >= 1 {
        by_order[1].push(Tree(vec![]));
    }
    for n in 2..=max_order {
        // Children form a multiset of smaller trees; enumerate it as a
        // non-increasing sequence of indices into the flattened list.
        let pool: Vec<&Tree> = by_order[1..n].iter().flatten().collect();
        let mut out = Vec::new();
        let mut current = Vec::new();
        multisets(&pool, n - 1, pool.len(), &mut current, &mut out);
        by_order[n] = out;
    }
    by_order
}

fn multisets(
    pool: &[&Tree],
    remaining: usize,
    bound: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Tree>,
) {
    if remaining == 0 {
        out.push(Tree(current.iter().map(|&i| pool[i].clone()).collect()));
        return;
    }
    for i in (0..bound).rev() {
        let size = pool[i].order();
        if size <= remaining {
            current.push(i);
            multisets(pool, remaining - size, i + 1, current, out);
            current.pop();
        }
    }
}
