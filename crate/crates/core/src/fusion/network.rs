// SPDX-License-Identifier: Apache-2.0

//! Forward and backward passes.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{add_assign, matvec, matvec_t, outer_acc};
use super::model::{CombineMethod, FusionError, FusionModel, Modalities, Tensor};
use crate::dataset::{LabeledInstance, NUM_CATEGORICAL, NUM_NUMERIC};
use crate::math;

/// The fused representation fed to the prediction head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRepresentation {
    pub m: Vec<f64>,
}

/// One example as the network consumes it, after modality masking.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub text: Vec<f64>,
    pub cat: [f64; NUM_CATEGORICAL],
    pub num: [f64; NUM_NUMERIC],
}

impl ModelInput {
    pub fn new(text: &[f64], cat: &[f64], num: &[f64], modalities: Modalities) -> Result<Self, FusionError> {
        if cat.len() != NUM_CATEGORICAL {
            return Err(FusionError::DimMismatch {
                what: "categorical features",
                expected: NUM_CATEGORICAL,
                found: cat.len(),
            });
        }
        if num.len() != NUM_NUMERIC {
            return Err(FusionError::DimMismatch {
                what: "numerical features",
                expected: NUM_NUMERIC,
                found: num.len(),
            });
        }
        let mut input = ModelInput {
            text: text.to_vec(),
            cat: core::array::from_fn(|i| cat[i]),
            num: core::array::from_fn(|i| num[i]),
        };
        match modalities {
            Modalities::All => {}
            Modalities::TextOnly => {
                input.cat = [0.0; NUM_CATEGORICAL];
                input.num = [0.0; NUM_NUMERIC];
            }
            Modalities::TabularOnly => input.text.iter_mut().for_each(|v| *v = 0.0),
        }
        Ok(input)
    }

    pub fn from_instance(inst: &LabeledInstance, modalities: Modalities) -> Result<Self, FusionError> {
        Self::new(&inst.text.values, &inst.cat.as_f64(), &inst.num.z, modalities)
    }
}

enum CombineCache {
    Concat,
    Attention {
        keys: [Vec<f64>; 3],
        query: Vec<f64>,
        weights: [f64; 3],
    },
    Gating {
        text_proj: Vec<f64>,
        gate_in: [Vec<f64>; 2],
        gate_pre: [Vec<f64>; 2],
        gate: [Vec<f64>; 2],
        value: [Vec<f64>; 2],
        shift: Vec<f64>,
        alpha: f64,
        /// `α = β‖t′‖/‖h‖` below the clamp, so it depends on `t′` and `h`.
        alpha_free: bool,
    },
}

struct Trace {
    combine: CombineCache,
    /// `acts[0] = m`, then each hidden activation.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    logit: f64,
}

fn check_dims(model: &FusionModel, x: &ModelInput) -> Result<(), FusionError> {
    if x.text.len() != model.dims.text {
        return Err(FusionError::DimMismatch {
            what: "text vector",
            expected: model.dims.text,
            found: x.text.len(),
        });
    }
    Ok(())
}

fn softmax3(s: [f64; 3]) -> [f64; 3] {
    let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = s.map(|v| math::exp(v - mx));
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

fn proj(t: &Tensor, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.rows];
    matvec(&t.values, t.rows, t.cols, x, &mut out);
    out
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn forward_combine(model: &FusionModel, x: &ModelInput) -> (Vec<f64>, CombineCache) {
    let p = &model.params;
    match model.method {
        CombineMethod::UnimodalConcat => {
            let mut m = x.text.clone();
            m.extend_from_slice(&x.cat);
            m.extend_from_slice(&x.num);
            (m, CombineCache::Concat)
        }
        CombineMethod::AttentionSum => {
            let keys = [proj(&p[0], &x.text), proj(&p[1], &x.cat), proj(&p[2], &x.num)];
            let query = proj(&p[3], &x.text);
            let scale = math::sqrt(model.hyper.d as f64);
            let weights = softmax3(core::array::from_fn(|i| math::dot(&query, &keys[i]) / scale));
            let mut m = vec![0.0; model.hyper.d];
            for (k, a) in keys.iter().zip(weights) {
                m.iter_mut().zip(k).for_each(|(mi, ki)| *mi += a * ki);
            }
            (m, CombineCache::Attention { keys, query, weights })
        }
        CombineMethod::GatingSum => {
            let text_proj = proj(&p[0], &x.text);
            let gate_in = [concat(&x.text, &x.cat), concat(&x.text, &x.num)];
            let value = [proj(&p[1], &x.cat), proj(&p[2], &x.num)];
            let gate_pre: [Vec<f64>; 2] = core::array::from_fn(|i| {
                let (w, b) = (&p[3 + 2 * i], &p[4 + 2 * i]);
                let mut z = proj(w, &gate_in[i]);
                add_assign(&mut z, &b.values);
                z
            });
            let gate: [Vec<f64>; 2] = core::array::from_fn(|i| gate_pre[i].iter().map(|v| v.max(0.0)).collect());
            let shift: Vec<f64> = (0..model.hyper.d)
                .map(|j| gate[0][j] * value[0][j] + gate[1][j] * value[1][j])
                .collect();
            let (nt, nh) = (math::norm(&text_proj), math::norm(&shift));
            let (alpha, alpha_free) = if nh == 0.0 {
                (0.0, false)
            } else {
                let raw = model.hyper.beta * nt / nh;
                if raw < 1.0 {
                    (raw, true)
                } else {
                    (1.0, false)
                }
            };
            let m = text_proj.iter().zip(&shift).map(|(t, h)| t + alpha * h).collect();
            (
                m,
                CombineCache::Gating {
                    text_proj,
                    gate_in,
                    gate_pre,
                    gate,
                    value,
                    shift,
                    alpha,
                    alpha_free,
                },
            )
        }
    }
}

fn forward(model: &FusionModel, x: &ModelInput) -> Trace {
    let (m, combine) = forward_combine(model, x);
    let head = &model.params[FusionModel::combine_tensor_count(model.method)..];
    let layers = model.hyper.hidden.len();
    let mut acts = vec![m];
    let mut pre = Vec::with_capacity(layers);
    for l in 0..layers {
        let (w, b) = (&head[2 * l], &head[2 * l + 1]);
        let mut z = proj(w, &acts[l]);
        add_assign(&mut z, &b.values);
        acts.push(z.iter().map(|v| v.max(0.0)).collect());
        pre.push(z);
    }
    let (w, b) = (&head[2 * layers], &head[2 * layers + 1]);
    let logit = math::dot(&w.values, &acts[layers]) + b.values[0];
    Trace {
        combine,
        acts,
        pre,
        logit,
    }
}

/// Accumulates `dlogit · ∂logit/∂θ` into `grads`.
fn backward(model: &FusionModel, x: &ModelInput, trace: &Trace, dlogit: f64, grads: &mut [Vec<f64>]) {
    let split = FusionModel::combine_tensor_count(model.method);
    let (cgrads, hgrads) = grads.split_at_mut(split);
    let head = &model.params[split..];
    let layers = model.hyper.hidden.len();

    // output layer
    let out_w = &head[2 * layers];
    let top = &trace.acts[layers];
    hgrads[2 * layers].iter_mut().zip(top).for_each(|(g, a)| *g += dlogit * a);
    hgrads[2 * layers + 1][0] += dlogit;
    let mut delta: Vec<f64> = out_w.values.iter().map(|w| dlogit * w).collect();

    for l in (0..layers).rev() {
        let dz: Vec<f64> = delta
            .iter()
            .zip(&trace.pre[l])
            .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
            .collect();
        let w = &head[2 * l];
        outer_acc(&mut hgrads[2 * l], w.rows, w.cols, &dz, &trace.acts[l]);
        add_assign(&mut hgrads[2 * l + 1], &dz);
        let mut below = vec![0.0; w.cols];
        matvec_t(&w.values, w.rows, w.cols, &dz, &mut below);
        delta = below;
    }
    backward_combine(model, x, &trace.combine, &delta, cgrads);
}

fn backward_combine(model: &FusionModel, x: &ModelInput, cache: &CombineCache, dm: &[f64], grads: &mut [Vec<f64>]) {
    let p = &model.params;
    match cache {
        CombineCache::Concat => {}
        CombineCache::Attention { keys, query, weights } => {
            let scale = math::sqrt(model.hyper.d as f64);
            let da: [f64; 3] = core::array::from_fn(|i| math::dot(dm, &keys[i]));
            let mean: f64 = (0..3).map(|i| weights[i] * da[i]).sum();
            let ds: [f64; 3] = core::array::from_fn(|i| weights[i] * (da[i] - mean));
            let inputs: [&[f64]; 3] = [&x.text, &x.cat, &x.num];
            let mut dq = vec![0.0; query.len()];
            for i in 0..3 {
                let dk: Vec<f64> = dm
                    .iter()
                    .zip(query)
                    .map(|(g, q)| weights[i] * g + ds[i] * q / scale)
                    .collect();
                dq.iter_mut().zip(&keys[i]).for_each(|(d, k)| *d += ds[i] * k / scale);
                outer_acc(&mut grads[i], p[i].rows, p[i].cols, &dk, inputs[i]);
            }
            outer_acc(&mut grads[3], p[3].rows, p[3].cols, &dq, &x.text);
        }
        CombineCache::Gating {
            text_proj,
            gate_in,
            gate_pre,
            gate,
            value,
            shift,
            alpha,
            alpha_free,
        } => {
            let beta = model.hyper.beta;
            let mut dt: Vec<f64> = dm.to_vec();
            let mut dh: Vec<f64> = dm.iter().map(|g| alpha * g).collect();
            if *alpha_free {
                let dalpha = math::dot(dm, shift);
                let (nt, nh) = (math::norm(text_proj), math::norm(shift));
                if nt > 0.0 {
                    let c = dalpha * beta / (nt * nh);
                    dt.iter_mut().zip(text_proj).for_each(|(d, t)| *d += c * t);
                }
                let c = -dalpha * beta * nt / (nh * nh * nh);
                dh.iter_mut().zip(shift).for_each(|(d, h)| *d += c * h);
            }
            outer_acc(&mut grads[0], p[0].rows, p[0].cols, &dt, &x.text);
            let tab: [&[f64]; 2] = [&x.cat, &x.num];
            for i in 0..2 {
                let dv: Vec<f64> = dh.iter().zip(&gate[i]).map(|(d, g)| d * g).collect();
                let dpre: Vec<f64> = dh
                    .iter()
                    .zip(&value[i])
                    .zip(&gate_pre[i])
                    .map(|((d, v), z)| if *z > 0.0 { d * v } else { 0.0 })
                    .collect();
                let wi = &p[1 + i];
                outer_acc(&mut grads[1 + i], wi.rows, wi.cols, &dv, tab[i]);
                let wg = &p[3 + 2 * i];
                outer_acc(&mut grads[3 + 2 * i], wg.rows, wg.cols, &dpre, &gate_in[i]);
                add_assign(&mut grads[4 + 2 * i], &dpre);
            }
        }
    }
}

/// The fused representation of one example.
pub fn combine(model: &FusionModel, text: &[f64], cat: &[f64], num: &[f64]) -> Result<FusedRepresentation, FusionError> {
    let x = ModelInput::new(text, cat, num, model.hyper.modalities)?;
    check_dims(model, &x)?;
    Ok(FusedRepresentation {
        m: forward_combine(model, &x).0,
    })
}

pub fn predict_input(model: &FusionModel, x: &ModelInput) -> Result<f64, FusionError> {
    check_dims(model, x)?;
    Ok(math::sigmoid(forward(model, x).logit))
}

/// Probability that the instance is defect-inducing.
pub fn predict(model: &FusionModel, inst: &LabeledInstance) -> Result<f64, FusionError> {
    predict_input(model, &ModelInput::from_instance(inst, model.hyper.modalities)?)
}

/// Binary cross-entropy `softplus(z) − y·z` on the logit.
fn bce(logit: f64, y: f64) -> f64 {
    math::softplus(logit) - y * logit
}

/// Mean binary cross-entropy over the batch.
pub fn loss(model: &FusionModel, batch: &[ModelInput], labels: &[f64]) -> Result<f64, FusionError> {
    let mut total = 0.0;
    for (x, &y) in batch.iter().zip(labels) {
        check_dims(model, x)?;
        total += bce(forward(model, x).logit, y);
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and its exact gradient, one vector per parameter tensor.
pub fn loss_and_gradient(
    model: &FusionModel,
    batch: &[ModelInput],
    labels: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), FusionError> {
    let mut grads: Vec<Vec<f64>> = model.params.iter().map(|t| vec![0.0; t.len()]).collect();
    let loss = accumulate(model, batch.iter().zip(labels.iter().copied()), batch.len(), &mut grads)?;
    Ok((loss, grads))
}

pub(crate) fn accumulate<'a, I>(model: &FusionModel, batch: I, n: usize, grads: &mut [Vec<f64>]) -> Result<f64, FusionError>
where
    I: Iterator<Item = (&'a ModelInput, f64)>,
{
    let inv = 1.0 / n as f64;
    let mut total = 0.0;
    for (x, y) in batch {
        check_dims(model, x)?;
        let trace = forward(model, x);
        total += bce(trace.logit, y);
        let dlogit = (math::sigmoid(trace.logit) - y) * inv;
        backward(model, x, &trace, dlogit, grads);
    }
    Ok(total * inv)
}
