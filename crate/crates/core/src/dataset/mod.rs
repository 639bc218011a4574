// SPDX-License-Identifier: Apache-2.0

//! Turning labelled commits into model inputs: cleaning and joining,
//! categorical one-hot encoding, median imputation and z-scoring fitted on
//! the training split, text vectors, and the train/validation/test split.

mod split;
mod text;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commit::{ChangeKind, CommitRecord, FileChange};
use crate::math;
use crate::metrics::{ChangeMetrics, FixPattern, NUMERIC_FEATURES};
use crate::szz::LabelSet;

pub use split::{split, Partition, SplitOrder, SplitSpec, MIN_INSTANCES};
pub use text::{
    hash_featurize, seeded_hash, tokenize, TextSource, TextVector, DEFAULT_EMBEDDING_DIM,
    DEFAULT_HASH_DIM,
};

pub const NUM_NUMERIC: usize = 13;
pub const NUM_CATEGORICAL: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("commit {hash} has no {missing}")]
    JoinMismatch { hash: String, missing: &'static str },
    #[error("need at least {needed} instances to split, found {found}")]
    TooFewInstances { found: usize, needed: usize },
    #[error("split ratios must be three positive integers")]
    BadRatios,
    #[error("instance {hash}: expected dimension {expected}, found {found}")]
    DimMismatch { hash: String, expected: usize, found: usize },
    #[error("no text vector for commit {0}")]
    MissingText(String),
    #[error("training split is empty")]
    EmptyTraining,
}

/// Numeric metrics as read from disk; any feature may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PartialMetrics {
    pub fix: Option<bool>,
    pub numeric: [Option<f64>; NUM_NUMERIC],
}

impl From<ChangeMetrics> for PartialMetrics {
    fn from(m: ChangeMetrics) -> Self {
        PartialMetrics {
            fix: Some(m.fix),
            numeric: m.numeric().map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKindMix {
    PureAdd,
    PureModify,
    PureDelete,
    Mixed,
}

impl ChangeKindMix {
    /// Renames count as modifications.
    pub fn of(files: &[FileChange]) -> Self {
        let kind = |f: &FileChange| match f.change_kind {
            ChangeKind::Add => 0u8,
            ChangeKind::Modify | ChangeKind::Rename => 1,
            ChangeKind::Delete => 2,
        };
        let mut kinds = files.iter().map(kind);
        let Some(first) = kinds.next() else {
            return ChangeKindMix::Mixed;
        };
        if !kinds.all(|k| k == first) {
            return ChangeKindMix::Mixed;
        }
        match first {
            0 => ChangeKindMix::PureAdd,
            1 => ChangeKindMix::PureModify,
            _ => ChangeKindMix::PureDelete,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Monday = 0. The epoch fell on a Thursday.
pub fn weekday_utc(unix_seconds: i64) -> usize {
    let days = unix_seconds.div_euclid(86_400);
    (days + 3).rem_euclid(7) as usize
}

/// One-hot groups: FIX (2), weekday (7), change-kind mix (4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalFeatures {
    pub one_hot: [u8; NUM_CATEGORICAL],
}

impl CategoricalFeatures {
    pub fn encode(fix: bool, author_time: i64, mix: ChangeKindMix) -> Self {
        let mut one_hot = [0u8; NUM_CATEGORICAL];
        one_hot[usize::from(fix)] = 1;
        one_hot[2 + weekday_utc(author_time)] = 1;
        one_hot[9 + mix.index()] = 1;
        CategoricalFeatures { one_hot }
    }

    pub fn is_valid(&self) -> bool {
        let group = |r: core::ops::Range<usize>| {
            self.one_hot[r.clone()].iter().all(|&b| b <= 1)
                && self.one_hot[r].iter().map(|&b| u32::from(b)).sum::<u32>() == 1
        };
        group(0..2) && group(2..9) && group(9..13)
    }

    pub fn as_f64(&self) -> [f64; NUM_CATEGORICAL] {
        self.one_hot.map(f64::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalFeatures {
    pub z: [f64; NUM_NUMERIC],
}

/// A cleaned, joined commit before imputation and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub hash: String,
    pub label: u8,
    pub message: String,
    pub cat: CategoricalFeatures,
    pub numeric: [Option<f64>; NUM_NUMERIC],
}

/// A model-ready instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub hash: String,
    pub text: TextVector,
    pub cat: CategoricalFeatures,
    pub num: NumericalFeatures,
    pub label: u8,
}

/// Joins commits, metrics and labels, dropping merges, commits without
/// source files and commits with blank messages. Output keeps the order of
/// `records`.
pub fn clean(
    records: &[CommitRecord],
    metrics: &BTreeMap<String, PartialMetrics>,
    labels: &LabelSet,
    fix_pattern: &FixPattern,
) -> Result<Vec<RawInstance>, DatasetError> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if !rec.is_metric_eligible() || rec.message.trim().is_empty() {
            continue;
        }
        let m = metrics.get(&rec.hash).ok_or_else(|| DatasetError::JoinMismatch {
            hash: rec.hash.clone(),
            missing: "metrics",
        })?;
        let label = labels.label(&rec.hash).ok_or_else(|| DatasetError::JoinMismatch {
            hash: rec.hash.clone(),
            missing: "label",
        })?;
        let fix = m.fix.unwrap_or_else(|| fix_pattern.is_fix(&rec.message));
        out.push(RawInstance {
            hash: rec.hash.clone(),
            label,
            message: rec.message.clone(),
            cat: CategoricalFeatures::encode(fix, rec.author_time, ChangeKindMix::of(&rec.files)),
            numeric: m.numeric,
        });
    }
    Ok(out)
}

/// Per-feature statistics fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

/// Median imputation followed by z-scoring, both fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub columns: [ColumnStats; NUM_NUMERIC],
}

impl Preprocessor {
    pub fn fit(instances: &[RawInstance], train: &[usize]) -> Result<Self, DatasetError> {
        if train.is_empty() {
            return Err(DatasetError::EmptyTraining);
        }
        let mut columns = [ColumnStats {
            median: 0.0,
            mean: 0.0,
            std: 0.0,
        }; NUM_NUMERIC];
        for (j, col) in columns.iter_mut().enumerate() {
            let mut present: Vec<f64> = train
                .iter()
                .filter_map(|&i| instances[i].numeric[j])
                .collect();
            col.median = median(&mut present);
            let filled: Vec<f64> = train
                .iter()
                .map(|&i| instances[i].numeric[j].unwrap_or(col.median))
                .collect();
            let (mean, std) = mean_std(&filled);
            col.mean = mean;
            col.std = std;
        }
        Ok(Preprocessor { columns })
    }

    pub fn impute(&self, raw: &[Option<f64>; NUM_NUMERIC]) -> [f64; NUM_NUMERIC] {
        core::array::from_fn(|j| raw[j].unwrap_or(self.columns[j].median))
    }

    /// Constant training columns map to zero.
    pub fn standardize(&self, values: &[f64; NUM_NUMERIC]) -> NumericalFeatures {
        NumericalFeatures {
            z: core::array::from_fn(|j| {
                let c = self.columns[j];
                if c.std == 0.0 {
                    0.0
                } else {
                    (values[j] - c.mean) / c.std
                }
            }),
        }
    }

    pub fn transform(&self, raw: &[Option<f64>; NUM_NUMERIC]) -> NumericalFeatures {
        self.standardize(&self.impute(raw))
    }

    /// Statistics keyed by feature name, for persisting next to the data.
    pub fn to_map(&self) -> BTreeMap<String, ColumnStats> {
        NUMERIC_FEATURES
            .iter()
            .zip(self.columns.iter())
            .map(|(n, c)| (n.to_string(), *c))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, ColumnStats>) -> Option<Self> {
        let mut columns = [ColumnStats {
            median: 0.0,
            mean: 0.0,
            std: 0.0,
        }; NUM_NUMERIC];
        for (j, name) in NUMERIC_FEATURES.iter().enumerate() {
            columns[j] = *map.get(*name)?;
        }
        Some(Preprocessor { columns })
    }
}

/// Median of the values; 0 when there are none.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Population mean and standard deviation. A spread below 1e-12 of the
/// column's scale is treated as constant and reported as 0.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = math::sqrt(var);
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if std <= 1e-12 * scale {
        (mean, 0.0)
    } else {
        (mean, std)
    }
}

/// Builds model-ready instances. `texts[i]` is the text vector of
/// `raw[i]`; all must share one dimension.
pub fn assemble(
    raw: &[RawInstance],
    texts: Vec<TextVector>,
    pre: &Preprocessor,
) -> Result<Vec<LabeledInstance>, DatasetError> {
    let dim = texts.first().map(|t| t.dim).unwrap_or(0);
    raw.iter()
        .zip(texts)
        .map(|(r, text)| {
            if text.dim != dim || !text.is_valid() {
                return Err(DatasetError::DimMismatch {
                    hash: r.hash.clone(),
                    expected: dim,
                    found: text.values.len(),
                });
            }
            Ok(LabeledInstance {
                hash: r.hash.clone(),
                text,
                cat: r.cat,
                num: pre.transform(&r.numeric),
                label: r.label,
            })
        })
        .collect()
}
