//! Hessian-vector products by central finite differences of analytic
//! gradients.
//!
//! The step size follows a fixed rule so results are reproducible:
//! `h = EPS * (1 + |theta|) / max(|v|, EPS)` with `EPS = 1e-4`, where the
//! norms are Euclidean. Central differencing is exact for quadratics up to
//! rounding and O(h^2) accurate otherwise.

use super::data::Dataset;
use super::mlp::MlpWeights;
use ndarray::Array1;
use thiserror::Error;

pub const FD_EPSILON: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum HvpError {
    #[error("direction has {got} entries, model has {expected} parameters")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Hessian-vector product for any loss given its gradient function.
/// A zero direction returns the zero vector.
pub fn hvp_with(
    grad: impl Fn(&Array1<f64>) -> Array1<f64>,
    theta: &Array1<f64>,
    v: &Array1<f64>,
) -> Array1<f64> {
    let theta_norm = theta.dot(theta).sqrt();
    let v_norm = v.dot(v).sqrt();
    let h = FD_EPSILON * (1.0 + theta_norm) / v_norm.max(FD_EPSILON);
    let plus = grad(&(theta + &(v * h)));
    let minus = grad(&(theta - &(v * h)));
    (plus - minus) / (2.0 * h)
}

/// Hessian-vector product of the mean training loss of an MLP.
pub fn mlp_hvp(
    weights: &MlpWeights,
    data: &Dataset,
    v: &Array1<f64>,
) -> Result<Array1<f64>, HvpError> {
    let expected = weights.param_count();
    if v.len() != expected {
        return Err(HvpError::DimensionMismatch { expected, got: v.len() });
    }
    let shape = weights.shape();
    let theta = weights.to_flat();
    let grad = |flat: &Array1<f64>| {
        MlpWeights::from_flat(shape, flat)
            .grad(data.inputs.view(), &data.labels)
            .to_flat()
    };
    Ok(hvp_with(grad, &theta, v))
}
