use super::Tensor;
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

fn check(probabilities: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let shape = probabilities.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::shape(
            format!("[{}, K]", labels.len()),
            format!("{shape:?}"),
        ));
    }
    let classes = shape[1];
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok((shape[0], classes))
}

/// Mean of `-ln p[label]` over the batch, with `p` clamped at [`PROB_FLOOR`].
pub fn sparse_crossentropy(probabilities: &Tensor, labels: &[usize]) -> Result<f64> {
    let (batch, _) = check(probabilities, labels)?;
    if batch == 0 {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -probabilities.row(r)[l].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / batch as f64)
}

/// Gradient of [`sparse_crossentropy`] w.r.t. the probabilities. Entries
/// below the clamp get zero gradient.
pub fn sparse_crossentropy_grad(probabilities: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (batch, classes) = check(probabilities, labels)?;
    let mut grad = Tensor::zeros(&[batch, classes]);
    for (r, &l) in labels.iter().enumerate() {
        let p = probabilities.row(r)[l];
        if p > PROB_FLOOR {
            grad.row_mut(r)[l] = -1.0 / (p * batch as f64);
        }
    }
    Ok(grad)
}
