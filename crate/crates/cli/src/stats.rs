//! Rank correlation and loss/NFE frontiers.

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman correlation (Pearson on average ranks). `NaN` for fewer than
/// two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return f64::NAN;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// A (loss, NFE) outcome; smaller is better in both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub loss: f64,
    pub nfe: f64,
}

impl Point {
    pub fn strictly_dominates(&self, other: &Point) -> bool {
        self.loss < other.loss && self.nfe < other.nfe
    }

    pub fn weakly_dominates(&self, other: &Point) -> bool {
        self.loss <= other.loss && self.nfe <= other.nfe
    }
}

/// Indices of the points not strictly dominated by any other point.
pub fn frontier(points: &[Point]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| q.strictly_dominates(&points[i])))
        .collect()
}

/// True when no point of `other` strictly dominates a frontier point of
/// `base`.
pub fn frontier_holds(base: &[Point], other: &[Point]) -> bool {
    frontier(base)
        .iter()
        .all(|&i| !other.iter().any(|q| q.strictly_dominates(&base[i])))
}

/// True when every point of `other` is weakly dominated by some point of
/// `base`.
pub fn covers(base: &[Point], other: &[Point]) -> bool {
    other
        .iter()
        .all(|q| base.iter().any(|p| p.weakly_dominates(q)))
}

/// Smallest NFE among points with loss at most `budget`.
pub fn nfe_at_budget(points: &[Point], budget: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.loss <= budget)
        .map(|p| p.nfe)
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 25.0, 100.0]), 1.0);
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), -1.0);
        // Classical formula 1 - 6 sum d^2 / (n (n^2 - 1)) without ties.
        let y = [2.0, 1.0, 4.0, 3.0];
        assert!((spearman(&x, &y) - (1.0 - 6.0 * 4.0 / 60.0)).abs() < 1e-15);
        assert!(spearman(&x, &[1.0; 4]).is_nan());
        assert!(spearman(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn frontier_examples() {
        let p = |loss, nfe| Point { loss, nfe };
        let a = [p(1.0, 10.0), p(2.0, 5.0), p(3.0, 6.0)];
        assert_eq!(frontier(&a), vec![0, 1]);
        assert!(frontier_holds(&a, &[p(1.5, 11.0)]));
        assert!(!frontier_holds(&a, &[p(0.5, 9.0)]));
        assert!(covers(&a, &[p(3.0, 6.0), p(2.0, 5.0)]));
        assert!(!covers(&a, &[p(0.5, 20.0)]));
        assert_eq!(nfe_at_budget(&a, 2.5), Some(5.0));
        assert_eq!(nfe_at_budget(&a, 0.5), None);
    }
}
