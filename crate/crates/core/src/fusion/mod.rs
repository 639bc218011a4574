// SPDX-License-Identifier: Apache-2.0

//! Fusion classifiers over text, categorical and numerical features.
//!
//! Three combining modules produce the fused representation `m`:
//!
//! * `unimodal_concat`: `m = [t; c; n]`.
//! * `attention_sum`: keys `kᵢ = Wᵢxᵢ`, query `q = W_q t`, weights
//!   `a = softmax(q·kᵢ/√d)`, `m = Σ aᵢkᵢ`.
//! * `gating_sum`: `t′ = W_t t`, per tabular modality a ReLU gate
//!   `gᵢ = max(0, W_gᵢ[t; xᵢ] + b_gᵢ)` scales `Wᵢxᵢ`; the summed shift `h` is
//!   added to `t′` with weight `α = min(β‖t′‖/‖h‖, 1)` (0 when `h = 0`).
//!
//! A ReLU multilayer head maps `m` to a defect probability. There is no
//! layer normalization anywhere in the fused path.

mod linalg;
mod model;
mod network;
mod train;

pub use model::{
    CombineMethod, Dims, FusionError, FusionModel, Hyperparameters, Modalities, Tensor,
    FORMAT_VERSION,
};
pub use network::{combine, loss, loss_and_gradient, predict, predict_input, FusedRepresentation, ModelInput};
pub use train::{train, train_inputs, EpochStats, TrainReport};
