//! Loss-landscape metrics on trained weights: Hessian trace (Hutchinson),
//! top Hessian eigenvalue (power iteration), mode connectivity along a
//! trained Bezier curve, and CKA similarity of network outputs.
//!
//! The trace and eigenvalue routines are generic over the matrix-vector
//! product so they can be checked against explicit matrices; the MLP entry
//! points plug in the finite-difference HVP from [`crate::nnkit`].

use crate::nnkit::{mlp_hvp, Dataset, HvpError, MlpWeights};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probe counts stop early once the running mean has moved less than
/// `convergence_tol` relatively for this many consecutive probes.
const CONVERGENCE_WINDOW: usize = 10;
/// Power iteration stops when the Rayleigh quotient changes less than this
/// relative amount between iterations.
const POWER_REL_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric unavailable: {0}")]
    Degenerate(String),
    #[error("metric unavailable: non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid metric spec: {0}")]
    BadSpec(String),
    #[error("metric unavailable: {0}")]
    Hvp(#[from] HvpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDistribution {
    Rademacher,
}

/// Budget for the stochastic Hessian probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub max_probes: usize,
    pub probe_distribution: ProbeDistribution,
    pub convergence_tol: f64,
    pub power_iters: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            max_probes: 100,
            probe_distribution: ProbeDistribution::Rademacher,
            convergence_tol: 0.01,
            power_iters: 50,
        }
    }
}

impl ProbeSpec {
    fn validate(&self) -> Result<(), MetricError> {
        if self.max_probes < 1 {
            return Err(MetricError::BadSpec("max_probes must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(MetricError::BadSpec("convergence_tol must be positive".into()));
        }
        if self.power_iters < 1 {
            return Err(MetricError::BadSpec("power_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Shape and budget of the connectivity curve. A Bezier curve with
/// `bends_k = 2` has three control points; only interior points train.
/// `sgd_batch` and `sgd_lr` drive the curve's SGD; the batch stays fixed
/// across configurations so every curve gets comparable optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSpec {
    pub bends_k: usize,
    pub curve_epochs: usize,
    pub eval_points: Vec<f64>,
    pub sgd_batch: usize,
    pub sgd_lr: f64,
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec {
            bends_k: 2,
            curve_epochs: 50,
            eval_points: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sgd_batch: 32,
            sgd_lr: 0.1,
        }
    }
}

impl CurveSpec {
    fn validate(&self) -> Result<(), MetricError> {
        if self.bends_k < 1 {
            return Err(MetricError::BadSpec("bends_k must be at least 1".into()));
        }
        let pts = &self.eval_points;
        if pts.len() < 2 || pts.first() != Some(&0.0) || pts.last() != Some(&1.0) {
            return Err(MetricError::BadSpec(
                "eval_points must start at 0 and end at 1".into(),
            ));
        }
        if !pts.windows(2).all(|w| w[0] < w[1]) {
            return Err(MetricError::BadSpec("eval_points must be strictly increasing".into()));
        }
        if self.sgd_batch == 0 {
            return Err(MetricError::BadSpec("sgd_batch must be positive".into()));
        }
        Ok(())
    }
}

/// A Hutchinson estimate together with the number of probes actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    pub probes: usize,
}

/// Hutchinson trace estimator over any symmetric operator.
pub fn hutchinson_with(
    mut matvec: impl FnMut(&Array1<f64>) -> Result<Array1<f64>, MetricError>,
    dim: usize,
    spec: &ProbeSpec,
    seed: u64,
) -> Result<TraceEstimate, MetricError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut consecutive = 0;
    let mut probes = 0;
    for k in 1..=spec.max_probes {
        let v = Array1::from_shape_fn(dim, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let hv = matvec(&v)?;
        let estimate = v.dot(&hv);
        if !estimate.is_finite() {
            return Err(MetricError::NonFinite("trace probe"));
        }
        let prev = mean;
        mean += (estimate - mean) / k as f64;
        probes = k;
        if k >= 2 {
            let rel = (mean - prev).abs() / mean.abs().max(1e-12);
            if rel < spec.convergence_tol {
                consecutive += 1;
            } else {
                consecutive = 0;
            }
            if consecutive >= CONVERGENCE_WINDOW {
                break;
            }
        }
    }
    Ok(TraceEstimate { value: mean, probes })
}

/// Hessian trace of the mean training loss (H_t).
pub fn hutchinson_trace(
    weights: &MlpWeights,
    data: &Dataset,
    spec: &ProbeSpec,
    seed: u64,
) -> Result<f64, MetricError> {
    let dim = weights.param_count();
    let est = hutchinson_with(|v| Ok(mlp_hvp(weights, data, v)?), dim, spec, seed)?;
    Ok(est.value)
}

/// Power iteration for the dominant eigenvalue of any symmetric operator.
/// Returns the Rayleigh quotient at convergence or at the iteration cap.
pub fn power_iteration_with(
    mut matvec: impl FnMut(&Array1<f64>) -> Result<Array1<f64>, MetricError>,
    dim: usize,
    spec: &ProbeSpec,
    seed: u64,
) -> Result<f64, MetricError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Array1<f64> {
        Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal))
    };
    let mut v = draw(&mut rng);
    let mut norm = v.dot(&v).sqrt();
    if norm < 1e-12 {
        v = draw(&mut rng);
        norm = v.dot(&v).sqrt();
        if norm < 1e-12 {
            return Err(MetricError::Degenerate("zero initial vector".into()));
        }
    }
    v.mapv_inplace(|x| x / norm);

    let mut lambda_prev: Option<f64> = None;
    let mut lambda = 0.0;
    for _ in 0..spec.power_iters {
        let w = matvec(&v)?;
        lambda = v.dot(&w);
        if !lambda.is_finite() {
            return Err(MetricError::NonFinite("eigenvalue estimate"));
        }
        let w_norm = w.dot(&w).sqrt();
        if w_norm < 1e-300 {
            // Operator annihilates the iterate: dominant eigenvalue is 0.
            return Ok(0.0);
        }
        v = w.mapv(|x| x / w_norm);
        if let Some(prev) = lambda_prev {
            if (lambda - prev).abs() <= POWER_REL_TOL * lambda.abs().max(1e-12) {
                return Ok(lambda);
            }
        }
        lambda_prev = Some(lambda);
    }
    Ok(lambda)
}

/// Top eigenvalue of the training-loss Hessian (H_e).
pub fn top_eigenvalue(
    weights: &MlpWeights,
    data: &Dataset,
    spec: &ProbeSpec,
    seed: u64,
) -> Result<f64, MetricError> {
    let dim = weights.param_count();
    power_iteration_with(|v| Ok(mlp_hvp(weights, data, v)?), dim, spec, seed)
}

fn bernstein(k: usize, j: usize, t: f64) -> f64 {
    let mut binom = 1.0;
    for i in 0..j {
        binom *= (k - i) as f64 / (i + 1) as f64;
    }
    binom * (1.0 - t).powi((k - j) as i32) * t.powi(j as i32)
}

fn bezier_point(control: &[Array1<f64>], t: f64) -> Array1<f64> {
    let k = control.len() - 1;
    let mut out = Array1::zeros(control[0].len());
    for (j, theta) in control.iter().enumerate() {
        out.scaled_add(bernstein(k, j, t), theta);
    }
    out
}

/// Mode connectivity C between two trained models, in percent units.
///
/// Trains the interior control points of a Bezier curve between the two
/// weight vectors by SGD on the training loss at a fresh uniform `t` per
/// minibatch, then evaluates the training error at `eval_points` and scores
/// the largest deviation from the endpoint mean:
/// `C = -100 * E_tr(curve(t*))` where `t*` maximizes
/// `|(E_tr(a) + E_tr(b)) / 2 - E_tr(curve(t))|`, ties toward smaller `t`.
pub fn mode_connectivity(
    weights_a: &MlpWeights,
    weights_b: &MlpWeights,
    data: &Dataset,
    spec: &CurveSpec,
    seed: u64,
) -> Result<f64, MetricError> {
    spec.validate()?;
    if weights_a.shape() != weights_b.shape() {
        return Err(MetricError::BadSpec("endpoint shapes differ".into()));
    }
    let shape = weights_a.shape();
    let k = spec.bends_k;
    let start = weights_a.to_flat();
    let end = weights_b.to_flat();
    let mut control: Vec<Array1<f64>> = (0..=k)
        .map(|j| {
            let frac = j as f64 / k as f64;
            &start * (1.0 - frac) + &end * frac
        })
        .collect();

    let n = data.len();
    let batch = spec.sgd_batch.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..spec.curve_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let t: f64 = rng.random_range(0.0..1.0);
            let point = bezier_point(&control, t);
            let model = MlpWeights::from_flat(shape, &point);
            if !model.all_finite() {
                return Err(MetricError::NonFinite("curve weights"));
            }
            let (inputs, labels) = data.gather(chunk);
            let grad = model.grad(inputs.view(), &labels).to_flat();
            for j in 1..k {
                control[j].scaled_add(-spec.sgd_lr * bernstein(k, j, t), &grad);
            }
        }
    }

    let mut errors = Vec::with_capacity(spec.eval_points.len());
    for &t in &spec.eval_points {
        let model = MlpWeights::from_flat(shape, &bezier_point(&control, t));
        if !model.all_finite() {
            return Err(MetricError::NonFinite("curve weights"));
        }
        let (loss, err) = model.loss_and_error(data.inputs.view(), &data.labels);
        if !loss.is_finite() && !err.is_finite() {
            return Err(MetricError::NonFinite("curve training error"));
        }
        errors.push(err);
    }
    let endpoint_mean = 0.5 * (errors[0] + errors[errors.len() - 1]);
    let mut best_idx = 0;
    let mut best_dev = f64::NEG_INFINITY;
    for (i, &e) in errors.iter().enumerate() {
        let dev = (endpoint_mean - e).abs();
        if dev > best_dev {
            best_dev = dev;
            best_idx = i;
        }
    }
    // + 0.0 folds the negative zero of a perfectly connected pair into
    // plain zero so serialized records read C = 0.
    Ok(-100.0 * errors[best_idx] + 0.0)
}

/// CKA similarity of two output matrices (rows are samples).
pub fn cka_from_outputs(fa: ArrayView2<f64>, fb: ArrayView2<f64>) -> Result<f64, MetricError> {
    let s = fa.nrows();
    if fb.nrows() != s {
        return Err(MetricError::BadSpec("output matrices have different sample counts".into()));
    }
    if s < 2 {
        return Err(MetricError::BadSpec("need at least 2 samples".into()));
    }
    let center = |m: ArrayView2<f64>| -> Array2<f64> {
        let mut out = m.to_owned();
        let means = out.mean_axis(ndarray::Axis(0)).expect("non-empty");
        out -= &means;
        out
    };
    let fa_c = center(fa);
    let fb_c = center(fb);
    let denom = ((s - 1) * (s - 1)) as f64;
    let cov = |x: &Array2<f64>, y: &Array2<f64>| -> f64 {
        let cross = x.t().dot(y);
        cross.iter().map(|v| v * v).sum::<f64>() / denom
    };
    let cov_xy = cov(&fa_c, &fb_c);
    let cov_xx = cov(&fa_c, &fa_c);
    let cov_yy = cov(&fb_c, &fb_c);
    if !(cov_xy.is_finite() && cov_xx.is_finite() && cov_yy.is_finite()) {
        return Err(MetricError::NonFinite("output covariance"));
    }
    if cov_xx == 0.0 || cov_yy == 0.0 {
        return Err(MetricError::Degenerate("constant outputs have zero self-covariance".into()));
    }
    Ok((cov_xy / (cov_xx * cov_yy).sqrt()).min(1.0))
}

/// CKA similarity S of two models' pre-softmax outputs on `sample_count_s`
/// points drawn (without replacement, capped at the dataset size) by `seed`.
pub fn cka_similarity(
    weights_a: &MlpWeights,
    weights_b: &MlpWeights,
    data: &Dataset,
    sample_count_s: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if sample_count_s < 2 {
        return Err(MetricError::BadSpec("sample_count_s must be at least 2".into()));
    }
    let s_eff = sample_count_s.min(data.len());
    if s_eff < 2 {
        return Err(MetricError::BadSpec("dataset has fewer than 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, data.len(), s_eff).into_vec();
    let (inputs, _) = data.gather(&indices);
    let fa = weights_a.logits(inputs.view());
    let fb = weights_b.logits(inputs.view());
    cka_from_outputs(fa.view(), fb.view())
}
