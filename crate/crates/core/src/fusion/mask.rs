//! Magnitude masks: oracle ratio masks, mask application and a linear
//! ReLU mask head.

use ndarray::{Array2, ArrayView2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Keeps the ratio mask finite where every source is silent.
pub const IRM_EPS: f64 = 1e-8;

/// `|S_t| / (|S_t| + sum |S_o| + eps)`; all inputs are `[T x F]`.
pub fn oracle_irm(target: ArrayView2<Complex64>, others: &[ArrayView2<Complex64>]) -> Result<Array2<f64>> {
    if let Some(o) = others.iter().find(|o| o.dim() != target.dim()) {
        return Err(Error::validation(format!(
            "interferer shape {:?} does not match target {:?}",
            o.dim(),
            target.dim()
        )));
    }
    let mut denom = target.mapv(|c| c.norm());
    for o in others {
        Zip::from(&mut denom).and(o).for_each(|d, c| *d += c.norm());
    }
    let mut mask = target.mapv(|c| c.norm());
    Zip::from(&mut mask).and(&denom).for_each(|m, d| *m /= d + IRM_EPS);
    Ok(mask)
}

/// Elementwise real gain on the complex reference spectrogram; phase is kept.
pub fn apply_mask(mixture: ArrayView2<Complex64>, mask: ArrayView2<f64>) -> Result<Array2<Complex64>> {
    if mixture.dim() != mask.dim() {
        return Err(Error::validation(format!(
            "mask shape {:?} does not match spectrogram {:?}",
            mask.dim(),
            mixture.dim()
        )));
    }
    if let Some(v) = mask.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::validation(format!("mask values must be finite and non-negative, found {v}")));
    }
    let mut out = mixture.to_owned();
    Zip::from(&mut out).and(&mask).for_each(|c, m| *c *= *m);
    Ok(out)
}

/// `max(0, fused . head)`: a 1x1 convolution followed by ReLU.
pub fn mask_head(fused: ArrayView2<f64>, head: ArrayView2<f64>) -> Result<Array2<f64>> {
    if fused.ncols() != head.nrows() {
        return Err(Error::validation(format!(
            "head expects width {}, got {}",
            head.nrows(),
            fused.ncols()
        )));
    }
    if fused.iter().chain(head.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation("mask head inputs must be finite"));
    }
    Ok(fused.dot(&head).mapv(|v| v.max(0.0)))
}
