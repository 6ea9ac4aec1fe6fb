//! Relative-amount prediction heads over opaque feature vectors.
//!
//! Both heads are a single linear layer `W x + b`. The dense head applies a
//! softmax and trains with cross-entropy against amount vectors normalized to
//! sum 1; the sparse head applies a ReLU and trains with L1 distance.

mod adam;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{train, Sample, TrainConfig, TrainOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operation needs a {expected} head, got {found}")]
    WrongHead { expected: HeadKind, found: HeadKind },
    #[error("prediction {value} at index {index} is not positive where the target is")]
    NonPositivePrediction { index: usize, value: f64 },
    #[error("optimizer state does not match parameter shape")]
    ShapeMismatch,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("sample `{id}` has {found} features, expected {expected}")]
    MixedDimensions { id: String, expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Dense,
    Sparse,
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadKind::Dense => "dense",
            HeadKind::Sparse => "sparse",
        })
    }
}

impl std::str::FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(HeadKind::Dense),
            "sparse" => Ok(HeadKind::Sparse),
            other => Err(format!("unknown head `{other}` (expected dense or sparse)")),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Weights (`outputs × inputs`, row-major) and bias of one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    #[serde(rename = "head_kind")]
    pub kind: HeadKind,
    #[serde(rename = "i")]
    pub outputs: usize,
    #[serde(rename = "d")]
    pub inputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    params: HeadParams,
}

impl HeadParams {
    pub fn zeros(kind: HeadKind, outputs: usize, inputs: usize) -> Self {
        Self {
            kind,
            outputs,
            inputs,
            weights: vec![0.0; outputs * inputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weights uniform in `[-1/sqrt(d), 1/sqrt(d)]`, zero bias.
    pub fn init<R: Rng>(kind: HeadKind, outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut p = Self::zeros(kind, outputs, inputs);
        for w in &mut p.weights {
            *w = rng.random_range(-bound..=bound);
        }
        p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            params: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Box::new(ModelError::UnsupportedVersion(file.format_version)));
        }
        let p = file.params;
        if p.weights.len() != p.outputs * p.inputs {
            return Err(Box::new(ModelError::DimensionMismatch {
                expected: p.outputs * p.inputs,
                found: p.weights.len(),
            }));
        }
        if p.bias.len() != p.outputs {
            return Err(Box::new(ModelError::DimensionMismatch {
                expected: p.outputs,
                found: p.bias.len(),
            }));
        }
        Ok(p)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.inputs..(i + 1) * self.inputs]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.inputs {
            return Err(ModelError::DimensionMismatch {
                expected: self.inputs,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_kind(&self, expected: HeadKind) -> Result<(), ModelError> {
        if self.kind != expected {
            return Err(ModelError::WrongHead {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }

    /// `W x + b`.
    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        Ok((0..self.outputs)
            .map(|i| self.bias[i] + self.row(i).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect())
    }
}

/// Gradient with the shape of [`HeadParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadGrad {
    pub fn zeros_like(p: &HeadParams) -> Self {
        Self {
            weights: vec![0.0; p.weights.len()],
            bias: vec![0.0; p.bias.len()],
        }
    }

    fn add_scaled(&mut self, other: &HeadGrad, s: f64) {
        self.weights
            .iter_mut()
            .zip(&other.weights)
            .for_each(|(a, b)| *a += s * b);
        self.bias.iter_mut().zip(&other.bias).for_each(|(a, b)| *a += s * b);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn forward_dense(params: &HeadParams, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    params.check_kind(HeadKind::Dense)?;
    Ok(softmax(&params.pre_activation(x)?))
}

pub fn forward_sparse(params: &HeadParams, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    params.check_kind(HeadKind::Sparse)?;
    Ok(params.pre_activation(x)?.into_iter().map(|z| z.max(0.0)).collect())
}

pub fn forward(params: &HeadParams, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    match params.kind {
        HeadKind::Dense => forward_dense(params, x),
        HeadKind::Sparse => forward_sparse(params, x),
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::DimensionMismatch {
            expected: b.len(),
            found: a.len(),
        });
    }
    Ok(())
}

/// `-Σ v_y[i] log v_x[i]`; entries with zero target contribute nothing.
pub fn ce_loss(v_x: &[f64], v_y: &[f64]) -> Result<f64, ModelError> {
    same_len(v_x, v_y)?;
    let mut loss = 0.0;
    for (i, (&p, &t)) in v_x.iter().zip(v_y).enumerate() {
        if t == 0.0 {
            continue;
        }
        if !(p > 0.0) {
            return Err(ModelError::NonPositivePrediction { index: i, value: p });
        }
        loss -= t * p.ln();
    }
    Ok(loss)
}

pub fn l1_loss(v_x: &[f64], v_y: &[f64]) -> Result<f64, ModelError> {
    same_len(v_x, v_y)?;
    Ok(v_x.iter().zip(v_y).map(|(a, b)| (a - b).abs()).sum())
}

/// Loss of one sample under the head's own loss (cross-entropy or L1).
pub fn sample_loss(params: &HeadParams, x: &[f64], v_y: &[f64]) -> Result<f64, ModelError> {
    let v_x = forward(params, x)?;
    match params.kind {
        HeadKind::Dense => ce_loss(&v_x, v_y),
        HeadKind::Sparse => l1_loss(&v_x, v_y),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Analytic gradient of [`sample_loss`] with respect to weights and bias.
///
/// Dense: `dL/dz = (Σ v_y) v_x - v_y`. Sparse: `dL/dz_i = sign(z_i - v_y[i])`
/// where `z_i > 0`, else 0.
pub fn backward(params: &HeadParams, x: &[f64], v_y: &[f64]) -> Result<HeadGrad, ModelError> {
    if v_y.len() != params.outputs {
        return Err(ModelError::DimensionMismatch {
            expected: params.outputs,
            found: v_y.len(),
        });
    }
    let z = params.pre_activation(x)?;
    let dz: Vec<f64> = match params.kind {
        HeadKind::Dense => {
            let p = softmax(&z);
            let mass: f64 = v_y.iter().sum();
            p.iter().zip(v_y).map(|(p, y)| mass * p - y).collect()
        }
        HeadKind::Sparse => z
            .iter()
            .zip(v_y)
            .map(|(&z, &y)| if z > 0.0 { sign(z - y) } else { 0.0 })
            .collect(),
    };
    let mut grad = HeadGrad::zeros_like(params);
    for (i, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut grad.weights[i * params.inputs..(i + 1) * params.inputs];
        row.iter_mut().zip(x).for_each(|(w, v)| *w = g * v);
        grad.bias[i] = g;
    }
    Ok(grad)
}

/// Result of top-k thresholding.
#[derive(Debug, Clone, PartialEq)]
pub enum TopK {
    /// The k largest positive entries rescaled to the requested sum.
    Normalized(Vec<f64>),
    /// Nothing positive to keep; all zeros.
    Degenerate(Vec<f64>),
}

impl TopK {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            TopK::Normalized(v) | TopK::Degenerate(v) => v,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, TopK::Degenerate(_))
    }
}

/// Keeps the `k` largest positive entries (ties to the lower index), zeroes
/// the rest and rescales the kept entries to sum `c`.
pub fn predict_topk(v_x: &[f64], k: usize, c: f64) -> TopK {
    let mut order: Vec<usize> = (0..v_x.len()).filter(|&i| v_x[i] > 0.0).collect();
    order.sort_by(|&a, &b| v_x[b].total_cmp(&v_x[a]).then(a.cmp(&b)));
    order.truncate(k);
    let total: f64 = order.iter().map(|&i| v_x[i]).sum();
    let mut out = vec![0.0; v_x.len()];
    if !(total > 0.0) {
        return TopK::Degenerate(out);
    }
    for i in order {
        out[i] = v_x[i] * c / total;
    }
    TopK::Normalized(out)
}

/// Prediction normalized to sum `c`: top-k for the dense head, all positive
/// outputs for the sparse head unless `top_k` is given.
pub fn predict(params: &HeadParams, x: &[f64], top_k: Option<usize>, c: f64) -> Result<TopK, ModelError> {
    let v_x = forward(params, x)?;
    let k = match (params.kind, top_k) {
        (_, Some(k)) => k,
        (HeadKind::Dense, None) => 10,
        (HeadKind::Sparse, None) => v_x.len(),
    };
    Ok(predict_topk(&v_x, k, c))
}
