// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{FusionError, FusionModel};
use super::network::{accumulate, loss, predict_input, ModelInput};
use crate::dataset::LabeledInstance;
use crate::eval;
use crate::math;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the selected parameters (0 when no epoch ran).
    pub best_epoch: usize,
    /// Parameters from the best epoch.
    #[serde(skip)]
    pub model: FusionModel,
}

impl TrainReport {
    pub fn train_loss(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(model: &FusionModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.params.iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, model: &mut FusionModel, grads: &[Vec<f64>], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(ADAM_BETA1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(ADAM_BETA2, f64::from(self.step));
        for (((t, g), m), v) in model
            .params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..t.values.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let step = lr * (m[i] / c1) / (math::sqrt(v[i] / c2) + ADAM_EPS);
                t.values[i] -= step;
            }
        }
    }
}

fn to_inputs(model: &FusionModel, set: &[LabeledInstance]) -> Result<(Vec<ModelInput>, Vec<f64>), FusionError> {
    let xs = set
        .iter()
        .map(|i| ModelInput::from_instance(i, model.hyper.modalities))
        .collect::<Result<Vec<_>, _>>()?;
    let ys = set.iter().map(|i| f64::from(i.label)).collect();
    Ok((xs, ys))
}

fn f1_of(model: &FusionModel, xs: &[ModelInput], ys: &[f64]) -> Result<f64, FusionError> {
    let preds = xs
        .iter()
        .map(|x| predict_input(model, x).map(|p| u8::from(p >= model.hyper.threshold)))
        .collect::<Result<Vec<u8>, _>>()?;
    let labels: Vec<u8> = ys.iter().map(|&y| u8::from(y > 0.5)).collect();
    Ok(eval::confusion(&preds, &labels)
        .and_then(|cm| eval::metrics(&cm))
        .map(|m| m.f1)
        .unwrap_or(0.0))
}

/// Minimizes mean binary cross-entropy with Adam over seeded mini-batches
/// and keeps the parameters of the epoch with the best validation F1
/// (lower validation loss breaks ties).
pub fn train(
    model: FusionModel,
    train_set: &[LabeledInstance],
    val_set: &[LabeledInstance],
) -> Result<TrainReport, FusionError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(FusionError::EmptySplit);
    }
    let (xs, ys) = to_inputs(&model, train_set)?;
    let (vx, vy) = to_inputs(&model, val_set)?;
    train_inputs(model, &xs, &ys, &vx, &vy)
}

/// [`train`] over already-built inputs.
pub fn train_inputs(
    mut model: FusionModel,
    xs: &[ModelInput],
    ys: &[f64],
    vx: &[ModelInput],
    vy: &[f64],
) -> Result<TrainReport, FusionError> {
    if xs.is_empty() || vx.is_empty() {
        return Err(FusionError::EmptySplit);
    }
    let hyper = model.hyper.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&model);
    let mut grads: Vec<Vec<f64>> = model.params.iter().map(|t| vec![0.0; t.len()]).collect();
    let mut order: Vec<usize> = (0..xs.len()).collect();

    let mut epochs = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut best_model = model.clone();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch) {
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            let batch_loss = accumulate(
                &model,
                chunk.iter().map(|&i| (&xs[i], ys[i])),
                chunk.len(),
                &mut grads,
            )?;
            if !batch_loss.is_finite() {
                return Err(FusionError::NonFiniteLoss { epoch });
            }
            loss_sum += batch_loss;
            batches += 1;
            adam.update(&mut model, &grads, hyper.lr);
        }
        if !model.is_finite() {
            return Err(FusionError::NonFiniteLoss { epoch });
        }
        let val_loss = loss(&model, vx, vy)?;
        if !val_loss.is_finite() {
            return Err(FusionError::NonFiniteLoss { epoch });
        }
        let val_f1 = f1_of(&model, vx, vy)?;
        epochs.push(EpochStats {
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_f1,
        });
        let better = match best {
            None => true,
            Some((_, f1, vl)) => val_f1 > f1 || (val_f1 == f1 && val_loss < vl),
        };
        if better {
            best = Some((epoch, val_f1, val_loss));
            best_model = model.clone();
        }
    }

    Ok(TrainReport {
        epochs,
        best_epoch: best.map(|b| b.0).unwrap_or(0),
        model: best_model,
    })
}
