//! Central finite differences of the objective, as an oracle for
//! [`objective_grad`](super::objective_grad).

use super::objective::{objective, Model, ObjectiveSpec};
use super::task::Dataset;
use crate::error::{invalid, Result};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Central-difference gradient of [`objective`] in the order of
/// [`Model::params`]. Uses only the forward tensor path.
pub fn fd_gradient(
    model: &Model,
    data: &Dataset,
    spec: &ObjectiveSpec,
    eps_rng: &RngState,
    step: f64,
) -> Result<Vec<Tensor>> {
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let params = model.params();
    let mut probe = model.clone();
    let mut eval = |p: &[Tensor]| -> Result<f64> {
        probe.set_params(p.to_vec())?;
        Ok(objective(&probe, data, spec, eps_rng)?.objective)
    };
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut g = Tensor::zeros(params[i].shape());
        for j in 0..params[i].len() {
            let mut p = params.clone();
            let x = p[i].data()[j];
            p[i].data_mut()[j] = x + step;
            let up = eval(&p)?;
            p[i].data_mut()[j] = x - step;
            let down = eval(&p)?;
            g.data_mut()[j] = (up - down) / (2.0 * step);
        }
        out.push(g);
    }
    Ok(out)
}

/// `|a - b| / max(|a|, |b|)` over the concatenated entries (0 when both
/// vanish).
pub fn relative_error(a: &[Tensor], b: &[Tensor]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.shape() != y.shape()) {
        return Err(invalid("gradient lists differ in structure"));
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(
        &mut a
            .iter()
            .zip(b)
            .flat_map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| p - q)),
    );
    let scale = norm(&mut a.iter().flat_map(|x| x.data().iter().copied()))
        .max(norm(&mut b.iter().flat_map(|x| x.data().iter().copied())));
    Ok(if scale == 0.0 { diff } else { diff / scale })
}
