//! Task losses over any reducible carrier.

use crate::array::Reduce;
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Mean squared error over all entries.
pub fn mse<A: Reduce>(pred: &A, target: &Tensor) -> Result<A> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse",
            left: pred.shape(),
            right: target.shape().to_vec(),
        });
    }
    let d = pred.sub(&pred.constant(target))?;
    Ok(d.mul(&d)?.sum().scale(1.0 / target.len().max(1) as f64))
}

/// Mean softmax cross-entropy of `logits: [B, C]` against class labels.
///
/// The per-row max shift is taken as a constant; the loss value and its
/// gradient do not depend on it.
pub fn cross_entropy<A: Reduce>(logits: &A, labels: &[usize]) -> Result<A> {
    let shape = logits.shape();
    let (rows, classes) = match shape[..] {
        [r, c] => (r, c),
        _ => return Err(invalid("logits must be [batch, classes]")),
    };
    if labels.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            left: shape,
            right: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let primal = logits.primal();
    let max: Vec<f64> = (0..rows)
        .map(|r| {
            primal.data()[r * classes..(r + 1) * classes]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let shift = logits.constant(&Tensor::matrix(rows, 1, max)?);
    let mut onehot = vec![0.0; rows * classes];
    for (r, &l) in labels.iter().enumerate() {
        onehot[r * classes + l] = 1.0;
    }
    let onehot = logits.constant(&Tensor::matrix(rows, classes, onehot)?);
    let shifted = logits.sub(&shift.broadcast_cols(classes)?)?;
    let lse = shifted.exp().row_sum()?.ln();
    let picked = shifted.mul(&onehot)?.row_sum()?;
    Ok(lse.sub(&picked)?.sum().scale(1.0 / rows as f64))
}

/// Predicted class per row.
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    let (rows, cols) = logits.dims2("argmax_rows")?;
    Ok((0..rows)
        .map(|r| {
            let row = &logits.data()[r * cols..(r + 1) * cols];
            (0..cols)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .unwrap_or(0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let p = Tensor::from_vec(vec![0.0, 2.0]);
        let t = Tensor::from_vec(vec![1.0, 0.0]);
        assert_eq!(mse(&p, &t).unwrap().item().unwrap(), 2.5);
        assert_eq!(mse(&p, &p).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Tensor::matrix(2, 3, vec![0.4; 6]).unwrap();
        let l = cross_entropy(&logits, &[0, 2]).unwrap().item().unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bad_labels_are_rejected() {
        let logits = Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(cross_entropy(&logits, &[2]).is_err());
        assert!(cross_entropy(&logits, &[0, 1]).is_err());
    }
}
