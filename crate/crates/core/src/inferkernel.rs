//! Allocation-free inference kernels, one per artifact scheme.
//!
//! These are the loops a microcontroller port would carry verbatim: no
//! heap, no recursion, stack-only errors. `infer_f32` restates
//! [`LinearModel::predict`] operation for operation so the two agree to
//! the bit; `infer_q8` is the int8 path with an i32 multiply-accumulate.

use thiserror::Error;

use crate::modelpack::{PackedModel, QuantizedModel, CLIP_SIGMA, INPUT_SCALE};
use crate::regress::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NonFiniteInput: feature {index}")]
    NonFiniteInput { index: usize },
}

/// Float-path inference: `b + sum_j w_j * (x_j - mu_j) / sigma_j`.
pub fn infer_f32(model: &LinearModel, x: &[f64]) -> Result<f64, KernelError> {
    let weights = model.weights();
    if x.len() != weights.len() {
        return Err(KernelError::DimensionMismatch {
            expected: weights.len(),
            got: x.len(),
        });
    }
    let means = model.scaler().means();
    let stds = model.scaler().stds();
    let mut acc = model.bias();
    for j in 0..weights.len() {
        if !x[j].is_finite() {
            return Err(KernelError::NonFiniteInput { index: j });
        }
        acc += weights[j] * (x[j] - means[j]) / stds[j];
    }
    Ok(acc)
}

/// Int8-path inference.
///
/// Standardizes each input with the f32 scaler, clips to
/// [`CLIP_SIGMA`] standard deviations, quantizes with the fixed scale
/// [`INPUT_SCALE`], accumulates `q_w * q_x` in i32, then dequantizes once
/// and adds the float bias.
pub fn infer_q8(model: &QuantizedModel, x: &[f64]) -> Result<f64, KernelError> {
    let q_weights = model.q_weights();
    if x.len() != q_weights.len() {
        return Err(KernelError::DimensionMismatch {
            expected: q_weights.len(),
            got: x.len(),
        });
    }
    let s_in = INPUT_SCALE as f64;
    let mut acc: i32 = 0;
    for j in 0..q_weights.len() {
        if !x[j].is_finite() {
            return Err(KernelError::NonFiniteInput { index: j });
        }
        let z = (x[j] - model.means()[j] as f64) / model.stds()[j] as f64;
        let z = z.clamp(-CLIP_SIGMA, CLIP_SIGMA);
        let q_x = (z / s_in).round_ties_even().clamp(-127.0, 127.0) as i32;
        acc += q_weights[j] as i32 * q_x;
    }
    let scale = model.weight_scale() as f64 * s_in;
    Ok(acc as f64 * scale + model.bias() as f64)
}

/// Dispatches to the kernel matching the artifact scheme.
pub fn infer_packed(model: &PackedModel, x: &[f64]) -> Result<f64, KernelError> {
    match model {
        PackedModel::Float(m) => infer_f32(m, x),
        PackedModel::Quantized(q) => infer_q8(q, x),
    }
}
