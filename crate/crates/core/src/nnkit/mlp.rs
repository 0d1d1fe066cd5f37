//! One-hidden-layer tanh MLP with softmax cross-entropy, plus analytic
//! gradients. Small enough that everything is dense f64.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hidden-layer activation. Only tanh is supported; the enum records the
/// choice explicitly in model metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub width: usize,
    pub classes: usize,
    pub activation: Activation,
}

impl ModelShape {
    pub fn new(input_dim: usize, width: usize, classes: usize) -> Self {
        ModelShape { input_dim, width, classes, activation: Activation::Tanh }
    }

    pub fn param_count(&self) -> usize {
        self.input_dim * self.width + self.width + self.width * self.classes + self.classes
    }
}

/// Dense parameters: `layer1` is input x width, `layer2` width x classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layer1: Array2<f64>,
    pub bias1: Array1<f64>,
    pub layer2: Array2<f64>,
    pub bias2: Array1<f64>,
}

impl MlpWeights {
    /// Fan-in scaled uniform initialization: every parameter of a layer is
    /// drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
        };
        let layer1 = uniform(shape.input_dim, shape.width, shape.input_dim);
        let bias1 = uniform(1, shape.width, shape.input_dim).row(0).to_owned();
        let layer2 = uniform(shape.width, shape.classes, shape.width);
        let bias2 = uniform(1, shape.classes, shape.width).row(0).to_owned();
        MlpWeights { layer1, bias1, layer2, bias2 }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape::new(self.layer1.nrows(), self.layer1.ncols(), self.layer2.ncols())
    }

    pub fn param_count(&self) -> usize {
        self.shape().param_count()
    }

    /// Flattens in the fixed order layer1, bias1, layer2, bias2 (row-major).
    pub fn to_flat(&self) -> Array1<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.layer1.iter());
        out.extend(self.bias1.iter());
        out.extend(self.layer2.iter());
        out.extend(self.bias2.iter());
        Array1::from_vec(out)
    }

    pub fn from_flat(shape: ModelShape, flat: &Array1<f64>) -> Self {
        assert_eq!(flat.len(), shape.param_count(), "flat vector length mismatch");
        let mut at = 0;
        let mut take = |count: usize| {
            let slice = flat.slice(ndarray::s![at..at + count]).to_owned();
            at += count;
            slice
        };
        let layer1 = take(shape.input_dim * shape.width)
            .into_shape_with_order((shape.input_dim, shape.width))
            .expect("layer1 shape");
        let bias1 = take(shape.width);
        let layer2 = take(shape.width * shape.classes)
            .into_shape_with_order((shape.width, shape.classes))
            .expect("layer2 shape");
        let bias2 = take(shape.classes);
        MlpWeights { layer1, bias1, layer2, bias2 }
    }

    /// Pre-softmax outputs, samples x classes.
    pub fn logits(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let mut hidden = inputs.dot(&self.layer1);
        hidden += &self.bias1;
        hidden.mapv_inplace(f64::tanh);
        let mut out = hidden.dot(&self.layer2);
        out += &self.bias2;
        out
    }

    /// Mean cross-entropy loss and classification error on a batch.
    /// Prediction ties resolve to the smallest class index.
    pub fn loss_and_error(&self, inputs: ArrayView2<f64>, labels: &[usize]) -> (f64, f64) {
        let logits = self.logits(inputs);
        let n = labels.len();
        assert_eq!(logits.nrows(), n, "labels must match inputs");
        let mut loss = 0.0;
        let mut wrong = 0usize;
        for (row, &y) in logits.rows().into_iter().zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            let pred = argmax(row.as_slice().expect("contiguous row"));
            if pred != y {
                wrong += 1;
            }
        }
        (loss / n as f64, wrong as f64 / n as f64)
    }

    /// Analytic gradient of the mean cross-entropy loss.
    pub fn grad(&self, inputs: ArrayView2<f64>, labels: &[usize]) -> MlpWeights {
        let n = labels.len();
        assert_eq!(inputs.nrows(), n, "labels must match inputs");
        let mut hidden = inputs.dot(&self.layer1);
        hidden += &self.bias1;
        hidden.mapv_inplace(f64::tanh);
        let mut logits = hidden.dot(&self.layer2);
        logits += &self.bias2;

        // dlogits = (softmax(logits) - onehot(labels)) / n
        let mut dlogits = logits;
        for (mut row, &y) in dlogits.rows_mut().into_iter().zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|l| (l - max).exp());
            let sum: f64 = row.iter().sum();
            row.mapv_inplace(|e| e / sum);
            row[y] -= 1.0;
        }
        dlogits.mapv_inplace(|v| v / n as f64);

        let grad_layer2 = hidden.t().dot(&dlogits);
        let grad_bias2 = dlogits.sum_axis(Axis(0));
        let mut dhidden = dlogits.dot(&self.layer2.t());
        // tanh' = 1 - tanh^2
        dhidden.zip_mut_with(&hidden, |d, &h| *d *= 1.0 - h * h);
        let grad_layer1 = inputs.t().dot(&dhidden);
        let grad_bias1 = dhidden.sum_axis(Axis(0));

        MlpWeights {
            layer1: grad_layer1,
            bias1: grad_bias1,
            layer2: grad_layer2,
            bias2: grad_bias2,
        }
    }

    /// `self += alpha * other`, used for SGD steps.
    pub fn scaled_add(&mut self, alpha: f64, other: &MlpWeights) {
        self.layer1.scaled_add(alpha, &other.layer1);
        self.bias1.scaled_add(alpha, &other.bias1);
        self.layer2.scaled_add(alpha, &other.layer2);
        self.bias2.scaled_add(alpha, &other.bias2);
    }

    pub fn all_finite(&self) -> bool {
        self.layer1.iter().all(|v| v.is_finite())
            && self.bias1.iter().all(|v| v.is_finite())
            && self.layer2.iter().all(|v| v.is_finite())
            && self.bias2.iter().all(|v| v.is_finite())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
