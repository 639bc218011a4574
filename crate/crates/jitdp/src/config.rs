// SPDX-License-Identifier: Apache-2.0

//! Pipeline configuration: a TOML file with one section per stage, every
//! key overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use jitdp_core::dataset::{SplitOrder, SplitSpec, DEFAULT_EMBEDDING_DIM, DEFAULT_HASH_DIM};
use jitdp_core::fusion::{CombineMethod, Hyperparameters, Modalities};
use jitdp_core::szz::{SzzConfig, MAX_META_HOPS};
use jitdp_core::{FixPattern, SourceFilter};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mine::MineOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid value for {key}: {detail}")]
    Invalid { key: &'static str, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub general: General,
    pub mine: Mine,
    pub label: Label,
    pub featurize: Featurize,
    pub split: Split,
    pub train: Train,
    pub evaluate: Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct General {
    pub repo: Option<PathBuf>,
    pub out: PathBuf,
    /// Worker threads for stages that parallelize.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mine {
    pub include_extensions: Vec<String>,
    pub exclude_patterns: Vec<String>,
    pub fix_keywords: Vec<String>,
    pub issue_refs: bool,
    pub rename_similarity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Label {
    pub max_meta_hops: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    Hash,
    Embeddings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Featurize {
    pub text: TextMode,
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub hash_dim: usize,
    pub hash_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Split {
    pub ratios: String,
    pub seed: u64,
    pub order: SplitOrder,
}

/// Command-line spelling of the combine methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Concat,
    Attention,
    Gating,
}

impl From<Combine> for CombineMethod {
    fn from(c: Combine) -> Self {
        match c {
            Combine::Concat => CombineMethod::UnimodalConcat,
            Combine::Attention => CombineMethod::AttentionSum,
            Combine::Gating => CombineMethod::GatingSum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModalityChoice {
    All,
    Text,
    Tabular,
}

impl From<ModalityChoice> for Modalities {
    fn from(m: ModalityChoice) -> Self {
        match m {
            ModalityChoice::All => Modalities::All,
            ModalityChoice::Text => Modalities::TextOnly,
            ModalityChoice::Tabular => Modalities::TabularOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Train {
    pub combine: Combine,
    pub modalities: ModalityChoice,
    pub d: usize,
    pub hidden: Vec<usize>,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluate {
    pub part: Part,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let filter = SourceFilter::default();
        let fix = FixPattern::default();
        let hyper = Hyperparameters::default();
        let split = SplitSpec::default();
        PipelineConfig {
            general: General {
                repo: None,
                out: PathBuf::from("out"),
                jobs: 1,
            },
            mine: Mine {
                include_extensions: filter.include_extensions,
                exclude_patterns: filter.exclude_patterns,
                fix_keywords: fix.keywords,
                issue_refs: fix.issue_refs,
                rename_similarity: SzzConfig::default().rename_similarity,
            },
            label: Label {
                max_meta_hops: MAX_META_HOPS,
            },
            featurize: Featurize {
                text: TextMode::Hash,
                embeddings: None,
                embedding_dim: DEFAULT_EMBEDDING_DIM,
                hash_dim: DEFAULT_HASH_DIM,
                hash_seed: 0,
            },
            split: Split {
                ratios: "8:1:1".into(),
                seed: split.seed,
                order: split.order,
            },
            train: Train {
                combine: Combine::Gating,
                modalities: ModalityChoice::All,
                d: hyper.d,
                hidden: hyper.hidden,
                beta: hyper.beta,
                lr: hyper.lr,
                epochs: hyper.epochs,
                batch: hyper.batch,
                seed: hyper.seed,
                threshold: hyper.threshold,
            },
            evaluate: Evaluate { part: Part::Test },
        }
    }
}

// Section defaults come from the whole-config default so they never drift.
impl Default for General {
    fn default() -> Self {
        PipelineConfig::default().general
    }
}
impl Default for Mine {
    fn default() -> Self {
        PipelineConfig::default().mine
    }
}
impl Default for Label {
    fn default() -> Self {
        PipelineConfig::default().label
    }
}
impl Default for Featurize {
    fn default() -> Self {
        PipelineConfig::default().featurize
    }
}
impl Default for Split {
    fn default() -> Self {
        PipelineConfig::default().split
    }
}
impl Default for Train {
    fn default() -> Self {
        PipelineConfig::default().train
    }
}
impl Default for Evaluate {
    fn default() -> Self {
        PipelineConfig::default().evaluate
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn source_filter(&self) -> SourceFilter {
        SourceFilter {
            include_extensions: self.mine.include_extensions.clone(),
            exclude_patterns: self.mine.exclude_patterns.clone(),
        }
    }

    pub fn fix_pattern(&self) -> FixPattern {
        FixPattern {
            keywords: self.mine.fix_keywords.clone(),
            issue_refs: self.mine.issue_refs,
        }
    }

    pub fn mine_options(&self) -> MineOptions {
        MineOptions {
            filter: self.source_filter(),
            rename_similarity: self.mine.rename_similarity,
        }
    }

    pub fn szz(&self) -> SzzConfig {
        SzzConfig {
            rename_similarity: self.mine.rename_similarity,
            max_meta_hops: self.label.max_meta_hops,
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec, ConfigError> {
        let ratios = SplitSpec::parse_ratios(&self.split.ratios).ok_or_else(|| ConfigError::Invalid {
            key: "split.ratios",
            detail: format!("{:?} is not three positive integers a:b:c", self.split.ratios),
        })?;
        Ok(SplitSpec {
            ratios,
            seed: self.split.seed,
            order: self.split.order,
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        let t = &self.train;
        Hyperparameters {
            d: t.d,
            hidden: t.hidden.clone(),
            beta: t.beta,
            lr: t.lr,
            epochs: t.epochs,
            batch: t.batch,
            seed: t.seed,
            threshold: t.threshold,
            modalities: t.modalities.into(),
        }
    }

    pub fn repo(&self) -> Result<&Path, ConfigError> {
        self.general.repo.as_deref().ok_or(ConfigError::Invalid {
            key: "general.repo",
            detail: "no repository given (use --repo or general.repo)".into(),
        })
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub repo: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Sets both the split seed and the model seed.
    pub seed: Option<u64>,
    pub ratios: Option<String>,
    pub combine: Option<Combine>,
    pub modalities: Option<ModalityChoice>,
    pub text: Option<TextMode>,
    /// Also selects embedding text unless `text` says otherwise.
    pub embeddings: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(r) = &self.repo {
            cfg.general.repo = Some(r.clone());
        }
        if let Some(o) = &self.out {
            cfg.general.out = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.split.seed = s;
            cfg.train.seed = s;
        }
        if let Some(r) = &self.ratios {
            cfg.split.ratios = r.clone();
        }
        if let Some(c) = self.combine {
            cfg.train.combine = c;
        }
        if let Some(m) = self.modalities {
            cfg.train.modalities = m;
        }
        if let Some(e) = &self.embeddings {
            cfg.featurize.embeddings = Some(e.clone());
            cfg.featurize.text = TextMode::Embeddings;
        }
        if let Some(t) = self.text {
            cfg.featurize.text = t;
        }
        if let Some(j) = self.jobs {
            cfg.general.jobs = j.max(1);
        }
    }
}

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Mine,
    Label,
    Featurize,
    Split,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Mine,
        Stage::Label,
        Stage::Featurize,
        Stage::Split,
        Stage::Train,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mine => "mine",
            Stage::Label => "label",
            Stage::Featurize => "featurize",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Every config key the stage reads, with the flag overriding it.
    pub fn keys(self) -> &'static [(&'static str, Option<&'static str>)] {
        const OUT: (&str, Option<&str>) = ("general.out", Some("--out"));
        const REPO: (&str, Option<&str>) = ("general.repo", Some("--repo"));
        const FIX: [(&str, Option<&str>); 2] = [("mine.fix_keywords", None), ("mine.issue_refs", None)];
        match self {
            Stage::Mine => &[
                REPO,
                OUT,
                ("mine.include_extensions", None),
                ("mine.exclude_patterns", None),
                FIX[0],
                FIX[1],
                ("mine.rename_similarity", None),
            ],
            Stage::Label => &[
                REPO,
                OUT,
                ("general.jobs", Some("--jobs")),
                FIX[0],
                FIX[1],
                ("mine.rename_similarity", None),
                ("label.max_meta_hops", None),
            ],
            Stage::Featurize => &[
                OUT,
                FIX[0],
                FIX[1],
                ("featurize.text", Some("--text")),
                ("featurize.embeddings", Some("--embeddings")),
                ("featurize.embedding_dim", None),
                ("featurize.hash_dim", None),
                ("featurize.hash_seed", None),
            ],
            Stage::Split => &[
                OUT,
                ("split.ratios", Some("--ratios")),
                ("split.seed", Some("--seed")),
                ("split.order", None),
            ],
            Stage::Train => &[
                OUT,
                ("train.combine", Some("--combine")),
                ("train.modalities", Some("--modalities")),
                ("train.d", None),
                ("train.hidden", None),
                ("train.beta", None),
                ("train.lr", None),
                ("train.epochs", None),
                ("train.batch", None),
                ("train.seed", Some("--seed")),
                ("train.threshold", None),
            ],
            Stage::Evaluate => &[OUT, ("evaluate.part", None)],
        }
    }

    /// Help text listing [`Stage::keys`].
    pub fn keys_help(stages: &[Stage]) -> String {
        let mut seen: Vec<&str> = Vec::new();
        let mut s = String::from("Config keys read:\n");
        for stage in stages {
            for (key, flag) in stage.keys() {
                if seen.contains(key) {
                    continue;
                }
                seen.push(key);
                match flag {
                    Some(f) => s.push_str(&format!("  {key:<26} {f}\n")),
                    None => s.push_str(&format!("  {key}\n")),
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = PipelineConfig::from_toml(
            "[split]\nratios = \"7:2:1\"\n[train]\ncombine = \"attention\"\nhidden = [8, 4]\n",
            Path::new("x"),
        )
        .unwrap();
        assert_eq!(cfg.split_spec().unwrap().ratios, [7, 2, 1]);
        assert_eq!(cfg.train.combine, Combine::Attention);
        assert_eq!(cfg.train.hidden, vec![8, 4]);
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.featurize.hash_dim, 256);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("[train]\nlearning_rate = 1.0\n", Path::new("x")).is_err());
        assert!(PipelineConfig::from_toml("[nope]\n", Path::new("x")).is_err());
    }

    #[test]
    fn every_key_belongs_to_a_stage() {
        let table: toml::Table = toml::from_str(&PipelineConfig::default().to_toml()).unwrap();
        let mut keys = Vec::new();
        for (section, v) in &table {
            for k in v.as_table().unwrap().keys() {
                keys.push(format!("{section}.{k}"));
            }
        }
        // optional keys are absent when unset
        keys.push("general.repo".into());
        keys.push("featurize.embeddings".into());
        for key in keys {
            assert!(
                Stage::ALL.iter().any(|s| s.keys().iter().any(|(k, _)| *k == key)),
                "{key} is read by no stage"
            );
        }
    }

    #[test]
    fn flags_win() {
        let mut cfg = PipelineConfig::from_toml("[split]\nseed = 3\n[train]\nseed = 4\n", Path::new("x")).unwrap();
        Overrides {
            seed: Some(7),
            embeddings: Some("e.jsonl".into()),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!((cfg.split.seed, cfg.train.seed), (7, 7));
        assert_eq!(cfg.featurize.text, TextMode::Embeddings);

        Overrides {
            text: Some(TextMode::Hash),
            embeddings: Some("e.jsonl".into()),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.featurize.text, TextMode::Hash);
    }

    #[test]
    fn bad_ratios() {
        let mut cfg = PipelineConfig::default();
        cfg.split.ratios = "8:1".into();
        assert!(matches!(cfg.split_spec(), Err(ConfigError::Invalid { key: "split.ratios", .. })));
    }
}
