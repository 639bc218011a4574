// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{NUM_CATEGORICAL, NUM_NUMERIC};
use crate::math;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMethod {
    UnimodalConcat,
    AttentionSum,
    GatingSum,
}

impl CombineMethod {
    pub const ALL: [CombineMethod; 3] = [
        CombineMethod::UnimodalConcat,
        CombineMethod::AttentionSum,
        CombineMethod::GatingSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CombineMethod::UnimodalConcat => "unimodal_concat",
            CombineMethod::AttentionSum => "attention_sum",
            CombineMethod::GatingSum => "gating_sum",
        }
    }
}

/// Which inputs the model sees; the others are replaced by zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modalities {
    #[default]
    All,
    TextOnly,
    TabularOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Common projection width of the attention and gating modules.
    pub d: usize,
    /// Widths of the hidden ReLU layers of the prediction head.
    pub hidden: Vec<usize>,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub threshold: f64,
    #[serde(default)]
    pub modalities: Modalities,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            d: 64,
            hidden: vec![32],
            beta: 1.0,
            lr: 1e-3,
            epochs: 50,
            batch: 32,
            seed: 0,
            threshold: 0.5,
            modalities: Modalities::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub text: usize,
    pub categorical: usize,
    pub numerical: usize,
}

impl Dims {
    pub fn new(text: usize) -> Self {
        Dims {
            text,
            categorical: NUM_CATEGORICAL,
            numerical: NUM_NUMERIC,
        }
    }
}

/// A named row-major matrix; biases are `rows × 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Tensor {
    fn zeros(name: &str, rows: usize, cols: usize) -> Self {
        Tensor {
            name: name.into(),
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("parameter layout does not match the model configuration: {0}")]
    BadLayout(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training and validation sets must be nonempty")]
    EmptySplit,
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub method: CombineMethod,
    pub dims: Dims,
    pub hyper: Hyperparameters,
    /// Combine-module tensors first (in [`FusionModel::layout`] order), then
    /// the head.
    pub params: Vec<Tensor>,
}

impl FusionModel {
    /// Expected `(name, rows, cols)` of every parameter tensor.
    pub fn layout(
        method: CombineMethod,
        dims: Dims,
        hyper: &Hyperparameters,
    ) -> Vec<(String, usize, usize)> {
        let (t, c, n, d) = (dims.text, dims.categorical, dims.numerical, hyper.d);
        let mut out: Vec<(String, usize, usize)> = match method {
            CombineMethod::UnimodalConcat => Vec::new(),
            CombineMethod::AttentionSum => vec![
                ("w_t".into(), d, t),
                ("w_c".into(), d, c),
                ("w_n".into(), d, n),
                ("w_q".into(), d, t),
            ],
            CombineMethod::GatingSum => vec![
                ("w_t".into(), d, t),
                ("w_c".into(), d, c),
                ("w_n".into(), d, n),
                ("w_gc".into(), d, t + c),
                ("b_gc".into(), d, 1),
                ("w_gn".into(), d, t + n),
                ("b_gn".into(), d, 1),
            ],
        };
        let mut width = Self::fused_dim_for(method, dims, hyper.d);
        for (i, &h) in hyper.hidden.iter().enumerate() {
            out.push((format!("w{}", i + 1), h, width));
            out.push((format!("b{}", i + 1), h, 1));
            width = h;
        }
        let last = hyper.hidden.len() + 1;
        out.push((format!("w{last}"), 1, width));
        out.push((format!("b{last}"), 1, 1));
        out
    }

    pub(crate) fn fused_dim_for(method: CombineMethod, dims: Dims, d: usize) -> usize {
        match method {
            CombineMethod::UnimodalConcat => dims.text + dims.categorical + dims.numerical,
            CombineMethod::AttentionSum | CombineMethod::GatingSum => d,
        }
    }

    pub fn fused_dim(&self) -> usize {
        Self::fused_dim_for(self.method, self.dims, self.hyper.d)
    }

    pub(crate) fn combine_tensor_count(method: CombineMethod) -> usize {
        match method {
            CombineMethod::UnimodalConcat => 0,
            CombineMethod::AttentionSum => 4,
            CombineMethod::GatingSum => 7,
        }
    }

    fn validate_hyper(hyper: &Hyperparameters) -> Result<(), FusionError> {
        if hyper.d == 0 {
            return Err(FusionError::BadHyperparameter("d must be positive"));
        }
        if hyper.hidden.contains(&0) {
            return Err(FusionError::BadHyperparameter("hidden widths must be positive"));
        }
        if hyper.batch == 0 {
            return Err(FusionError::BadHyperparameter("batch must be positive"));
        }
        if !(hyper.lr >= 0.0 && hyper.lr.is_finite()) {
            return Err(FusionError::BadHyperparameter("lr must be finite and non-negative"));
        }
        if !(hyper.beta >= 0.0 && hyper.beta.is_finite()) {
            return Err(FusionError::BadHyperparameter("beta must be finite and non-negative"));
        }
        Ok(())
    }

    /// All parameters zero.
    pub fn zeros(method: CombineMethod, dims: Dims, hyper: Hyperparameters) -> Result<Self, FusionError> {
        Self::validate_hyper(&hyper)?;
        let params = Self::layout(method, dims, &hyper)
            .into_iter()
            .map(|(name, r, c)| Tensor::zeros(&name, r, c))
            .collect();
        Ok(FusionModel {
            method,
            dims,
            hyper,
            params,
        })
    }

    /// Weights drawn from `U(−s, s)` with `s = √(6/(fan_in + fan_out))`,
    /// biases zero, seeded by `hyper.seed`.
    pub fn new(method: CombineMethod, dims: Dims, hyper: Hyperparameters) -> Result<Self, FusionError> {
        let mut model = Self::zeros(method, dims, hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.hyper.seed);
        for t in &mut model.params {
            if t.cols == 1 && t.name.starts_with('b') {
                continue;
            }
            let s = math::sqrt(6.0 / (t.rows + t.cols) as f64);
            for v in &mut t.values {
                *v = rng.random_range(-s..s);
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_parts(
        method: CombineMethod,
        dims: Dims,
        hyper: Hyperparameters,
        params: Vec<Tensor>,
    ) -> Result<Self, FusionError> {
        Self::validate_hyper(&hyper)?;
        let layout = Self::layout(method, dims, &hyper);
        if layout.len() != params.len() {
            return Err(FusionError::BadLayout(format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, r, c), t) in layout.iter().zip(&params) {
            if *name != t.name || *r != t.rows || *c != t.cols || t.values.len() != r * c {
                return Err(FusionError::BadLayout(format!(
                    "tensor {} has shape {}x{} ({} values), expected {} {}x{}",
                    t.name,
                    t.rows,
                    t.cols,
                    t.values.len(),
                    name,
                    r,
                    c
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(FusionError::BadLayout(format!("tensor {} is not finite", t.name)));
            }
        }
        Ok(FusionModel {
            method,
            dims,
            hyper,
            params,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|t| t.values.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts() {
        let hyper = Hyperparameters::default();
        let dims = Dims::new(4);
        let concat = FusionModel::layout(CombineMethod::UnimodalConcat, dims, &hyper);
        assert_eq!(concat[0], ("w1".into(), 32, 30));
        assert_eq!(concat.len(), 4);
        let gating = FusionModel::layout(CombineMethod::GatingSum, dims, &hyper);
        assert_eq!(gating[3], ("w_gc".into(), 64, 17));
        assert_eq!(gating[7], ("w1".into(), 32, 64));
        assert_eq!(gating.last().unwrap(), &("b2".into(), 1, 1));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let dims = Dims::new(8);
        let a = FusionModel::new(CombineMethod::AttentionSum, dims, Hyperparameters::default()).unwrap();
        let b = FusionModel::new(CombineMethod::AttentionSum, dims, Hyperparameters::default()).unwrap();
        assert_eq!(a, b);
        for t in &a.params {
            let s = math::sqrt(6.0 / (t.rows + t.cols) as f64);
            assert!(t.values.iter().all(|v| v.abs() <= s));
        }
        let other = Hyperparameters {
            seed: 1,
            ..Hyperparameters::default()
        };
        let c = FusionModel::new(CombineMethod::AttentionSum, dims, other).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn from_parts_checks_shapes() {
        let dims = Dims::new(3);
        let m = FusionModel::new(CombineMethod::GatingSum, dims, Hyperparameters::default()).unwrap();
        let mut params = m.params.clone();
        assert!(FusionModel::from_parts(m.method, dims, m.hyper.clone(), params.clone()).is_ok());
        params[0].values.pop();
        assert!(matches!(
            FusionModel::from_parts(m.method, dims, m.hyper.clone(), params),
            Err(FusionError::BadLayout(_))
        ));
    }
}
