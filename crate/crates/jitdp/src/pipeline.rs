// SPDX-License-Identifier: Apache-2.0

//! The pipeline stages. Each stage reads the artifacts of the stages
//! before it from the output directory and writes its own next to them.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use jitdp_core::dataset::{
    self, assemble, clean, hash_featurize, DatasetError, Preprocessor, RawInstance, TextVector,
};
use jitdp_core::eval::{self, EvalError};
use jitdp_core::fusion::{self, Dims, FusionError, FusionModel, FORMAT_VERSION};
use jitdp_core::metrics::{compute_all, MetricsError};
use jitdp_core::szz::{label_dataset, LabelSet, SzzError};
use jitdp_core::CommitRecord;
use thiserror::Error;

use crate::blame::trace_fixes;
use crate::config::{ConfigError, Part, PipelineConfig, Stage, TextMode};
use crate::formats::{
    load_embeddings, load_model, read_json, read_jsonl, read_metrics, save_model,
    write_json, write_jsonl, write_report, ArtifactInfo, DatasetRow, FormatError, LabelRow,
    Manifest, MetricsRow, ReportFile, SplitsFile, StatsFile, REPORT_VERSION,
};
use crate::git::GitError;
use crate::mine::mine_history;

pub const COMMITS: &str = "commits.jsonl";
pub const METRICS: &str = "metrics.jsonl";
pub const LABELS: &str = "labels.jsonl";
pub const FIX_LINKS: &str = "fix_links.jsonl";
pub const SZZ_WARNINGS: &str = "szz_warnings.log";
pub const DATASET: &str = "dataset.jsonl";
pub const SPLITS: &str = "splits.json";
pub const STATS: &str = "stats.json";
pub const MODEL: &str = "model.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const REPORT: &str = "report.json";
pub const PR_CURVE: &str = "pr_curve.csv";

/// Schema version of every artifact except the model, which carries its
/// own format version.
const SCHEMA: u32 = 1;

fn schema_of(file: &str) -> u32 {
    if file == MODEL {
        FORMAT_VERSION
    } else {
        SCHEMA
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input {path}; run `jitdp {producer}` first")]
    MissingInput { path: PathBuf, producer: &'static str },
    #[error("{path} has schema {found} but this build reads {expected}; rerun `jitdp {producer}`")]
    SchemaMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
        producer: &'static str,
    },
    #[error("{0}")]
    Stale(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Szz(#[from] SzzError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// Stable machine-readable error name.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::MissingInput { .. } => "missing_input",
            PipelineError::SchemaMismatch { .. } => "schema_mismatch",
            PipelineError::Stale(_) => "stale_input",
            PipelineError::Io { .. } => "io",
            PipelineError::Config(_) => "config",
            PipelineError::Git(GitError::RepoNotFound(_)) => "repo_not_found",
            PipelineError::Git(GitError::CorruptHistory { .. }) => "corrupt_history",
            PipelineError::Git(_) => "git",
            PipelineError::Format(FormatError::VersionMismatch { .. }) => "version_mismatch",
            PipelineError::Format(FormatError::CorruptFile { .. }) => "corrupt_file",
            PipelineError::Format(FormatError::MalformedLine { .. }) => "malformed_line",
            PipelineError::Format(FormatError::DimMismatch { .. }) => "dim_mismatch",
            PipelineError::Format(FormatError::DuplicateHash { .. }) => "duplicate_hash",
            PipelineError::Format(FormatError::Io { .. }) => "io",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::Szz(_) => "szz",
            PipelineError::Dataset(_) => "dataset",
            PipelineError::Fusion(FusionError::NonFiniteLoss { .. }) => "non_finite_loss",
            PipelineError::Fusion(_) => "model",
            PipelineError::Eval(_) => "eval",
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn producer_of(file: &str) -> &'static str {
    match file {
        COMMITS | METRICS => "mine",
        LABELS | FIX_LINKS => "label",
        DATASET => "featurize",
        SPLITS | STATS => "split",
        MODEL | TRAIN_REPORT => "train",
        _ => "evaluate",
    }
}

/// Path of an input artifact after checking it exists and has the schema
/// this build reads.
fn input(out: &Path, manifest: &Manifest, file: &str) -> Result<PathBuf> {
    let path = out.join(file);
    let producer = producer_of(file);
    if !path.is_file() {
        return Err(PipelineError::MissingInput { path, producer });
    }
    if let Some(info) = manifest.artifacts.get(file) {
        let expected = schema_of(file);
        if info.schema != expected {
            return Err(PipelineError::SchemaMismatch {
                path,
                found: info.schema,
                expected,
                producer,
            });
        }
    }
    Ok(path)
}

fn prepare(out: &Path) -> Result<Manifest> {
    fs::create_dir_all(out).map_err(|source| PipelineError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    Ok(Manifest::load(out)?)
}

fn record(out: &Path, manifest: &mut Manifest, stage: Stage, files: &[&str]) -> Result<()> {
    for f in files {
        manifest.artifacts.insert(
            f.to_string(),
            ArtifactInfo {
                schema: schema_of(f),
                stage: stage.name().to_string(),
            },
        );
    }
    Ok(manifest.save(out)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MineSummary {
    pub commits: usize,
    pub eligible: usize,
}

/// Mines the repository and computes change metrics.
pub fn mine(cfg: &PipelineConfig) -> Result<MineSummary> {
    let out = &cfg.general.out;
    let mut manifest = prepare(out)?;
    let commits = mine_history(cfg.repo()?, &cfg.mine_options())?;
    let metrics = compute_all(&commits, &cfg.fix_pattern())?;
    write_jsonl(&out.join(COMMITS), &commits)?;
    write_jsonl(
        &out.join(METRICS),
        metrics.iter().map(|(hash, m)| MetricsRow { hash, metrics: m }),
    )?;
    record(out, &mut manifest, Stage::Mine, &[COMMITS, METRICS])?;
    Ok(MineSummary {
        commits: commits.len(),
        eligible: metrics.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSummary {
    pub fixes: usize,
    pub positives: usize,
    pub warnings: usize,
}

/// Traces fixes with SZZ and labels every mined commit.
pub fn label(cfg: &PipelineConfig) -> Result<LabelSummary> {
    let out = &cfg.general.out;
    let mut manifest = prepare(out)?;
    let commits: Vec<CommitRecord> = read_jsonl(&input(out, &manifest, COMMITS)?)?;
    let summary = trace_fixes(cfg.repo()?, &commits, &cfg.fix_pattern(), &cfg.szz(), cfg.general.jobs)?;
    let labels = label_dataset(&commits, &summary.links)?;

    write_jsonl(&out.join(FIX_LINKS), &summary.links)?;
    write_jsonl(
        &out.join(LABELS),
        commits.iter().map(|c| LabelRow {
            hash: c.hash.clone(),
            label: labels.label(&c.hash).unwrap_or(0),
            provenance: labels.provenance.get(&c.hash).cloned().unwrap_or_default(),
        }),
    )?;
    let warnings_path = out.join(SZZ_WARNINGS);
    let mut log = summary.warnings.join("\n");
    if !log.is_empty() {
        log.push('\n');
    }
    fs::write(&warnings_path, log).map_err(|source| PipelineError::Io {
        path: warnings_path,
        source,
    })?;
    record(out, &mut manifest, Stage::Label, &[LABELS, FIX_LINKS])?;
    Ok(LabelSummary {
        fixes: summary.links.len(),
        positives: labels.positives().count(),
        warnings: summary.warnings.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturizeSummary {
    pub instances: usize,
    pub positives: usize,
    pub text_dim: usize,
}

/// Cleans and joins commits, metrics and labels and attaches text vectors.
pub fn featurize(cfg: &PipelineConfig) -> Result<FeaturizeSummary> {
    let out = &cfg.general.out;
    let mut manifest = prepare(out)?;
    let commits: Vec<CommitRecord> = read_jsonl(&input(out, &manifest, COMMITS)?)?;
    let metrics = read_metrics(&input(out, &manifest, METRICS)?)?;
    let rows: Vec<LabelRow> = read_jsonl(&input(out, &manifest, LABELS)?)?;
    let mut labels = LabelSet::default();
    for r in rows {
        labels.labels.insert(r.hash.clone(), r.label);
        labels.provenance.insert(r.hash, r.provenance);
    }
    let raw = clean(&commits, &metrics, &labels, &cfg.fix_pattern())?;
    let texts = text_vectors(cfg, &raw)?;
    let text_dim = texts.first().map(|t| t.dim).unwrap_or(0);

    write_jsonl(
        &out.join(DATASET),
        raw.iter().zip(texts).map(|(r, text)| DatasetRow {
            hash: r.hash.clone(),
            label: r.label,
            message: r.message.clone(),
            text,
            cat: r.cat,
            metrics: DatasetRow::metrics_map(&r.numeric),
        }),
    )?;
    record(out, &mut manifest, Stage::Featurize, &[DATASET])?;
    Ok(FeaturizeSummary {
        instances: raw.len(),
        positives: raw.iter().filter(|r| r.label == 1).count(),
        text_dim,
    })
}

fn text_vectors(cfg: &PipelineConfig, raw: &[RawInstance]) -> Result<Vec<TextVector>> {
    let f = &cfg.featurize;
    match f.text {
        TextMode::Hash => {
            if f.hash_dim < 2 {
                return Err(ConfigError::Invalid {
                    key: "featurize.hash_dim",
                    detail: "needs at least 2 buckets".into(),
                }
                .into());
            }
            Ok(raw
                .iter()
                .map(|r| hash_featurize(&r.message, f.hash_dim, f.hash_seed))
                .collect())
        }
        TextMode::Embeddings => {
            let path = f.embeddings.as_deref().ok_or(ConfigError::Invalid {
                key: "featurize.embeddings",
                detail: "text = embeddings needs an embedding file (--embeddings)".into(),
            })?;
            let mut map = load_embeddings(path, f.embedding_dim)?;
            raw.iter()
                .map(|r| {
                    map.remove(&r.hash)
                        .ok_or_else(|| DatasetError::MissingText(r.hash.clone()).into())
                })
                .collect()
        }
    }
}

fn raw_of(row: &DatasetRow) -> RawInstance {
    RawInstance {
        hash: row.hash.clone(),
        label: row.label,
        message: row.message.clone(),
        cat: row.cat,
        numeric: row.numeric(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Partitions the dataset and fits imputation and scaling statistics on
/// the training part.
pub fn split(cfg: &PipelineConfig) -> Result<SplitSummary> {
    let out = &cfg.general.out;
    let spec = cfg.split_spec()?;
    let mut manifest = prepare(out)?;
    let rows: Vec<DatasetRow> = read_jsonl(&input(out, &manifest, DATASET)?)?;
    let partition = dataset::split(rows.len(), &spec)?;
    let raw: Vec<RawInstance> = rows.iter().map(raw_of).collect();
    let pre = Preprocessor::fit(&raw, &partition.train)?;
    let hashes: Vec<String> = rows.into_iter().map(|r| r.hash).collect();
    let file = SplitsFile::from_partition(&partition, &hashes, spec.ratios, spec.seed, spec.order);

    write_json(&out.join(SPLITS), &file)?;
    let stats: StatsFile = pre.to_map();
    write_json(&out.join(STATS), &stats)?;
    record(out, &mut manifest, Stage::Split, &[SPLITS, STATS])?;
    Ok(SplitSummary {
        train: file.train.len(),
        val: file.val.len(),
        test: file.test.len(),
    })
}

/// The dataset resolved against the split and statistics on disk.
struct Prepared {
    rows: Vec<DatasetRow>,
    splits: SplitsFile,
    pre: Preprocessor,
}

impl Prepared {
    fn load(out: &Path, manifest: &Manifest) -> Result<Self> {
        let rows: Vec<DatasetRow> = read_jsonl(&input(out, manifest, DATASET)?)?;
        let splits: SplitsFile = read_json(&input(out, manifest, SPLITS)?)?;
        let stats_path = input(out, manifest, STATS)?;
        let stats: StatsFile = read_json(&stats_path)?;
        let pre = Preprocessor::from_map(&stats).ok_or_else(|| FormatError::CorruptFile {
            path: stats_path,
            detail: "missing feature statistics".into(),
        })?;
        let in_data: BTreeSet<&str> = rows.iter().map(|r| r.hash.as_str()).collect();
        let in_split: BTreeSet<&str> = splits
            .train
            .iter()
            .chain(&splits.val)
            .chain(&splits.test)
            .map(String::as_str)
            .collect();
        if in_data != in_split {
            return Err(PipelineError::Stale(format!(
                "{SPLITS} does not match {DATASET}; rerun `jitdp split`"
            )));
        }
        Ok(Prepared { rows, splits, pre })
    }

    fn part(&self, part: Part) -> Result<Vec<dataset::LabeledInstance>> {
        let hashes = match part {
            Part::Train => &self.splits.train,
            Part::Val => &self.splits.val,
            Part::Test => &self.splits.test,
        };
        let by_hash: HashMap<&str, &DatasetRow> = self.rows.iter().map(|r| (r.hash.as_str(), r)).collect();
        let picked: Vec<&DatasetRow> = hashes.iter().map(|h| by_hash[h.as_str()]).collect();
        let raw: Vec<RawInstance> = picked.iter().map(|r| raw_of(r)).collect();
        let texts = picked.iter().map(|r| r.text.clone()).collect();
        Ok(assemble(&raw, texts, &self.pre)?)
    }

    fn text_dim(&self) -> usize {
        self.rows.first().map(|r| r.text.dim).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

/// Trains a fusion model on the training part, selecting the epoch by
/// validation F1.
pub fn train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    let out = &cfg.general.out;
    let mut manifest = prepare(out)?;
    let data = Prepared::load(out, &manifest)?;
    let train_set = data.part(Part::Train)?;
    let val_set = data.part(Part::Val)?;
    let model = FusionModel::new(
        cfg.train.combine.into(),
        Dims::new(data.text_dim()),
        cfg.hyperparameters(),
    )?;
    let report = fusion::train(model, &train_set, &val_set)?;
    save_model(&report.model, &out.join(MODEL))?;
    write_json(&out.join(TRAIN_REPORT), &report)?;
    record(out, &mut manifest, Stage::Train, &[MODEL, TRAIN_REPORT])?;
    Ok(TrainSummary {
        epochs: report.epochs.len(),
        best_epoch: report.best_epoch,
        best_val_f1: report.epochs.get(report.best_epoch).map(|e| e.val_f1).unwrap_or(0.0),
    })
}

/// Scores the configured part with the trained model and writes the
/// report and PR curve.
pub fn evaluate(cfg: &PipelineConfig) -> Result<ReportFile> {
    let out = &cfg.general.out;
    let mut manifest = prepare(out)?;
    let model = load_model(&input(out, &manifest, MODEL)?)?;
    let data = Prepared::load(out, &manifest)?;
    let part = cfg.evaluate.part;
    let set = data.part(part)?;
    let scores = set
        .iter()
        .map(|inst| fusion::predict(&model, inst))
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    let labels: Vec<u8> = set.iter().map(|i| i.label).collect();
    let r = eval::evaluate(&scores, &labels, model.hyper.threshold)?;
    let report = ReportFile {
        format_version: REPORT_VERSION,
        model: MODEL.to_string(),
        combine_method: model.method,
        modalities: model.hyper.modalities,
        part: part.as_str().to_string(),
        instances: set.len(),
        threshold: model.hyper.threshold,
        confusion: r.confusion,
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        pr_auc: r.pr_auc,
        pr_points: r.pr_points,
    };
    write_report(&report, &out.join(REPORT), &out.join(PR_CURVE))?;
    record(out, &mut manifest, Stage::Evaluate, &[REPORT, PR_CURVE])?;
    Ok(report)
}

/// Runs every stage in order.
pub fn all(cfg: &PipelineConfig) -> Result<ReportFile> {
    let m = mine(cfg)?;
    log::info!("mine: {} commits, {} with source changes", m.commits, m.eligible);
    let l = label(cfg)?;
    log::info!("label: {} fixes, {} defect-inducing", l.fixes, l.positives);
    let f = featurize(cfg)?;
    log::info!("featurize: {} instances", f.instances);
    let s = split(cfg)?;
    log::info!("split: {}/{}/{}", s.train, s.val, s.test);
    let t = train(cfg)?;
    log::info!("train: best epoch {} of {}", t.best_epoch, t.epochs);
    evaluate(cfg)
}
