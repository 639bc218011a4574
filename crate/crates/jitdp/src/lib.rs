// SPDX-License-Identifier: Apache-2.0

//! Repository access, file formats and the staged pipeline around
//! `jitdp-core`.
//!
//! Stages communicate only through files in one output directory:
//!
//! | stage       | writes                                                  |
//! |-------------|---------------------------------------------------------|
//! | `mine`      | `commits.jsonl`, `metrics.jsonl`                        |
//! | `label`     | `labels.jsonl`, `fix_links.jsonl`, `szz_warnings.log`   |
//! | `featurize` | `dataset.jsonl`                                         |
//! | `split`     | `splits.json`, `stats.json`                             |
//! | `train`     | `model.json`, `train_report.json`                       |
//! | `evaluate`  | `report.json`, `pr_curve.csv`                           |
//!
//! `manifest.json` records the schema version of each artifact.

pub mod blame;
pub mod config;
pub mod formats;
pub mod git;
pub mod mine;
pub mod patch;
pub mod pipeline;

pub use config::{Overrides, PipelineConfig, Stage};
pub use formats::{load_embeddings, load_model, save_model};
pub use mine::{mine_history, MineOptions};
pub use pipeline::PipelineError;
