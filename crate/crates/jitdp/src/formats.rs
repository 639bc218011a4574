// SPDX-License-Identifier: Apache-2.0

//! On-disk formats of every pipeline artifact.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use jitdp_core::dataset::{
    CategoricalFeatures, ColumnStats, PartialMetrics, Partition, SplitOrder, TextSource,
    TextVector, NUM_NUMERIC,
};
use jitdp_core::eval::{ConfusionMatrix, EvalReport, PrPoint};
use jitdp_core::fusion::{
    CombineMethod, Dims, FusionModel, Hyperparameters, Modalities, Tensor, FORMAT_VERSION,
};
use jitdp_core::metrics::NUMERIC_FEATURES;
use jitdp_core::ChangeMetrics;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: {detail}")]
    CorruptFile { path: PathBuf, detail: String },
    #[error("{path}: format version {found} is not supported (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u64,
        expected: u64,
    },
    #[error("embedding for {hash} has dimension {found}, expected {expected}")]
    DimMismatch {
        hash: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: duplicate embedding for {hash}")]
    DuplicateHash {
        path: PathBuf,
        line: usize,
        hash: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| FormatError::CorruptFile {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::CorruptFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FormatError::CorruptFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

// metrics.jsonl

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow<'a> {
    pub hash: &'a str,
    pub metrics: &'a ChangeMetrics,
}

#[derive(Deserialize)]
struct LooseMetricsRow {
    hash: String,
    metrics: BTreeMap<String, serde_json::Value>,
}

/// Reads metrics rows keyed by hash. Absent or null features come back as
/// `None` so they can be imputed later.
pub fn read_metrics(path: &Path) -> Result<BTreeMap<String, PartialMetrics>, FormatError> {
    let rows: Vec<LooseMetricsRow> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for row in rows {
        let fix = row.metrics.get("fix").and_then(serde_json::Value::as_bool);
        let numeric = std::array::from_fn(|j| {
            row.metrics
                .get(NUMERIC_FEATURES[j])
                .and_then(serde_json::Value::as_f64)
        });
        out.insert(row.hash, PartialMetrics { fix, numeric });
    }
    Ok(out)
}

// labels.jsonl

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub hash: String,
    pub label: u8,
    pub provenance: Vec<String>,
}

// dataset.jsonl

/// One cleaned instance before imputation and standardization, which are
/// fitted on the training split later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub hash: String,
    pub label: u8,
    pub message: String,
    pub text: TextVector,
    pub cat: CategoricalFeatures,
    /// Raw metric values by feature name; `null` when missing.
    pub metrics: BTreeMap<String, Option<f64>>,
}

impl DatasetRow {
    pub fn numeric(&self) -> [Option<f64>; NUM_NUMERIC] {
        std::array::from_fn(|j| self.metrics.get(NUMERIC_FEATURES[j]).copied().flatten())
    }

    pub fn metrics_map(values: &[Option<f64>; NUM_NUMERIC]) -> BTreeMap<String, Option<f64>> {
        NUMERIC_FEATURES
            .iter()
            .zip(values)
            .map(|(n, v)| (n.to_string(), *v))
            .collect()
    }
}

// splits.json

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitsFile {
    pub ratios: String,
    pub seed: u64,
    pub order: SplitOrder,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitsFile {
    pub fn from_partition(p: &Partition, hashes: &[String], ratios: [u32; 3], seed: u64, order: SplitOrder) -> Self {
        let pick = |idx: &[usize]| idx.iter().map(|&i| hashes[i].clone()).collect();
        SplitsFile {
            ratios: format!("{}:{}:{}", ratios[0], ratios[1], ratios[2]),
            seed,
            order,
            train: pick(&p.train),
            val: pick(&p.val),
            test: pick(&p.test),
        }
    }
}

/// stats.json: training-split statistics by feature name.
pub type StatsFile = BTreeMap<String, ColumnStats>;

// model.json

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    combine_method: CombineMethod,
    dims: Dims,
    hyperparameters: Hyperparameters,
    parameters: Vec<StoredTensor>,
}

pub fn model_to_string(model: &FusionModel) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        combine_method: model.method,
        dims: model.dims,
        hyperparameters: model.hyper.clone(),
        parameters: model
            .params
            .iter()
            .map(|t| StoredTensor {
                name: t.name.clone(),
                shape: [t.rows, t.cols],
                values: t.values.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("finite model serializes");
    s.push('\n');
    s
}

pub fn save_model(model: &FusionModel, path: &Path) -> Result<(), FormatError> {
    fs::write(path, model_to_string(model)).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<FusionModel, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_model(&text, path)
}

pub fn parse_model(text: &str, path: &Path) -> Result<FusionModel, FormatError> {
    let corrupt = |detail: String| FormatError::CorruptFile {
        path: path.to_path_buf(),
        detail,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(FormatError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: u64::from(FORMAT_VERSION),
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    let params = file
        .parameters
        .into_iter()
        .map(|t| Tensor {
            name: t.name,
            rows: t.shape[0],
            cols: t.shape[1],
            values: t.values,
        })
        .collect();
    FusionModel::from_parts(file.combine_method, file.dims, file.hyperparameters, params)
        .map_err(|e| corrupt(e.to_string()))
}

// embeddings

/// One line of an embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLine {
    pub hash: String,
    pub dim: usize,
    pub vector: Vec<f64>,
}

fn is_object_id(s: &str) -> bool {
    matches!(s.len(), 40 | 64) && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Loads an embedding JSONL file, checking every vector against
/// `expected_dim`.
pub fn load_embeddings(path: &Path, expected_dim: usize) -> Result<BTreeMap<String, TextVector>, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |detail: String| FormatError::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        let e: EmbeddingLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if !is_object_id(&e.hash) {
            return Err(malformed(format!("{:?} is not a commit id", e.hash)));
        }
        if e.dim != expected_dim || e.vector.len() != expected_dim {
            let found = if e.dim != expected_dim { e.dim } else { e.vector.len() };
            return Err(FormatError::DimMismatch {
                hash: e.hash,
                expected: expected_dim,
                found,
            });
        }
        if out.contains_key(&e.hash) {
            return Err(FormatError::DuplicateHash {
                path: path.to_path_buf(),
                line: i + 1,
                hash: e.hash,
            });
        }
        let v = TextVector {
            dim: e.dim,
            values: e.vector,
            source: TextSource::ExternalEmbedding,
        };
        out.insert(e.hash, v);
    }
    Ok(out)
}

// report.json and pr_curve.csv

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format_version: u32,
    /// Model file the scores came from, relative to the output directory.
    pub model: String,
    pub combine_method: CombineMethod,
    pub modalities: Modalities,
    /// Which part of the split was scored.
    pub part: String,
    pub instances: usize,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pr_auc: f64,
    pub pr_points: Vec<PrPoint>,
}

impl ReportFile {
    pub fn eval_report(&self) -> EvalReport {
        EvalReport {
            confusion: self.confusion,
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            pr_auc: self.pr_auc,
            pr_points: self.pr_points.clone(),
        }
    }
}

pub fn pr_curve_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("threshold,recall,precision\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
    }
    s
}

/// Writes the JSON report and the PR curve CSV next to it.
pub fn write_report(report: &ReportFile, json_path: &Path, csv_path: &Path) -> Result<(), FormatError> {
    write_json(json_path, report)?;
    fs::write(csv_path, pr_curve_csv(&report.pr_points)).map_err(io_err(csv_path))
}

// manifest.json

pub const MANIFEST: &str = "manifest.json";

/// Schema versions of the artifacts present in an output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub schema: u32,
    pub stage: String,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, FormatError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        read_json(&path)
    }

    pub fn save(&self, dir: &Path) -> Result<(), FormatError> {
        write_json(&dir.join(MANIFEST), self)
    }
}
