// SPDX-License-Identifier: Apache-2.0

//! Change-level metrics: diffusion, size, purpose, history and experience
//! features of a single commit, computed against the history that precedes
//! it.
//!
//! Conventions:
//! - the subsystem of a path is its first segment, the directory is the full
//!   containing directory; files at the repository root map to `/` for both;
//! - entropy is normalized by `log2(NF)` and weights each file by
//!   `lines_added + lines_deleted`;
//! - AGE is in days and files never touched before contribute 0;
//! - recent experience weights each prior change by `1 / (years + 1)` with a
//!   Julian year of 31,557,600 s.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commit::{ChangeKind, CommitRecord};
use crate::math;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 31_557_600.0;

/// The fourteen change-level features of one commit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeMetrics {
    pub ns: u64,
    pub nd: u64,
    pub nf: u64,
    pub entropy: f64,
    pub la: u64,
    pub ld: u64,
    pub lt: u64,
    pub fix: bool,
    pub ndev: u64,
    pub age: f64,
    pub nuc: u64,
    pub exp: u64,
    pub rexp: f64,
    pub sexp: u64,
}

/// Names of the numeric (non-FIX) features, in vector order.
pub const NUMERIC_FEATURES: [&str; 13] = [
    "ns", "nd", "nf", "entropy", "la", "ld", "lt", "ndev", "age", "nuc", "exp", "rexp", "sexp",
];

impl ChangeMetrics {
    /// The thirteen numeric features in [`NUMERIC_FEATURES`] order.
    pub fn numeric(&self) -> [f64; 13] {
        [
            self.ns as f64,
            self.nd as f64,
            self.nf as f64,
            self.entropy,
            self.la as f64,
            self.ld as f64,
            self.lt as f64,
            self.ndev as f64,
            self.age,
            self.nuc as f64,
            self.exp as f64,
            self.rexp,
            self.sexp as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("history index lacks parent {parent} of commit {hash}")]
    MissingHistory { hash: String, parent: String },
    #[error("commit {0} is a merge or touches no source files")]
    NotEligible(String),
}

/// Keyword and issue-reference matcher deciding whether a message
/// describes a defect fix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixPattern {
    pub keywords: Vec<String>,
    /// Also match `#<digits>` issue references.
    pub issue_refs: bool,
}

impl Default for FixPattern {
    fn default() -> Self {
        FixPattern {
            keywords: ["fix", "fixes", "fixed", "bug", "defect", "fault", "patch"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            issue_refs: true,
        }
    }
}

impl FixPattern {
    /// Whole-word keyword match on the lowercased message, or an issue
    /// reference when enabled.
    pub fn is_fix(&self, message: &str) -> bool {
        let lower = message.to_lowercase();
        let mut words = lower
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|w| !w.is_empty());
        if words.any(|w| self.keywords.iter().any(|k| k == w)) {
            return true;
        }
        self.issue_refs && has_issue_ref(&lower)
    }
}

fn has_issue_ref(s: &str) -> bool {
    let bytes = s.as_bytes();
    bytes
        .iter()
        .enumerate()
        .any(|(i, &b)| b == b'#' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
}

/// First path segment, or `/` for files at the root.
pub fn subsystem_of(path: &str) -> &str {
    match path.split_once('/') {
        Some((first, _)) if !first.is_empty() => first,
        _ => "/",
    }
}

/// Containing directory, or `/` for files at the root.
pub fn directory_of(path: &str) -> &str {
    match path.rsplit_once('/') {
        Some((dir, _)) if !dir.is_empty() => dir,
        _ => "/",
    }
}

/// Normalized Shannon entropy of the churn distribution over files.
///
/// 0 for fewer than two files or when nothing changed.
pub fn entropy(churns: &[u64]) -> f64 {
    let nf = churns.len();
    let total: u64 = churns.iter().sum();
    if nf <= 1 || total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = churns
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * math::log2(p)
        })
        .sum();
    (h / math::log2(nf as f64)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Default)]
struct FileHistory {
    last_touch: i64,
    authors: BTreeSet<u32>,
    commits: BTreeSet<u32>,
}

#[derive(Debug, Clone)]
struct AuthoredChange {
    time: i64,
    subsystems: Vec<String>,
}

/// Incremental record of every change seen so far, in mining order.
#[derive(Debug, Clone, Default)]
pub struct HistoryIndex {
    seen: BTreeSet<String>,
    author_ids: BTreeMap<String, u32>,
    files: BTreeMap<String, FileHistory>,
    by_author: BTreeMap<u32, Vec<AuthoredChange>>,
    changes: u32,
}

impl HistoryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.seen.contains(hash)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    fn author_key(&mut self, author: &str) -> u32 {
        let next = self.author_ids.len() as u32;
        *self.author_ids.entry(author.to_string()).or_insert(next)
    }

    /// Adds a commit after its metrics have been computed. Merges and
    /// commits without source files are only remembered as seen.
    pub fn record(&mut self, commit: &CommitRecord) {
        self.seen.insert(commit.hash.clone());
        if !commit.is_metric_eligible() {
            return;
        }
        let author = self.author_key(&commit.author_id);
        let change_id = self.changes;
        self.changes += 1;
        for file in &commit.files {
            let mut history = match (file.change_kind, file.old_path.as_deref()) {
                (ChangeKind::Rename, Some(old)) => self.files.remove(old).unwrap_or_default(),
                _ => self.files.remove(file.path()).unwrap_or_default(),
            };
            history.last_touch = commit.author_time;
            history.authors.insert(author);
            history.commits.insert(change_id);
            self.files.insert(file.path().to_string(), history);
        }
        let subsystems = distinct_subsystems(commit);
        self.by_author.entry(author).or_default().push(AuthoredChange {
            time: commit.author_time,
            subsystems,
        });
    }

    /// Computes the features of `commit` from the history recorded so far.
    pub fn compute(
        &self,
        commit: &CommitRecord,
        fix_pattern: &FixPattern,
    ) -> Result<ChangeMetrics, MetricsError> {
        if !commit.is_metric_eligible() {
            return Err(MetricsError::NotEligible(commit.hash.clone()));
        }
        if let Some(parent) = commit.parent_hashes.iter().find(|p| !self.seen.contains(*p)) {
            return Err(MetricsError::MissingHistory {
                hash: commit.hash.clone(),
                parent: parent.clone(),
            });
        }

        let files = &commit.files;
        let subsystems = distinct_subsystems(commit);
        let directories: BTreeSet<&str> = files.iter().map(|f| directory_of(f.path())).collect();
        let churns: Vec<u64> = files.iter().map(|f| f.churn()).collect();

        let mut authors: BTreeSet<u32> = BTreeSet::new();
        let mut prior_changes: BTreeSet<u32> = BTreeSet::new();
        let mut age_days = 0.0;
        for file in files {
            let key = file.pre_image_path().unwrap_or(file.path());
            if let Some(h) = self.files.get(key) {
                authors.extend(h.authors.iter().copied());
                prior_changes.extend(h.commits.iter().copied());
                age_days += ((commit.author_time - h.last_touch) as f64 / SECONDS_PER_DAY).max(0.0);
            }
        }

        let (mut exp, mut rexp, mut sexp) = (0u64, 0.0f64, 0u64);
        let authored = self
            .author_ids
            .get(&commit.author_id)
            .and_then(|a| self.by_author.get(a));
        for prior in authored.into_iter().flatten() {
            exp += 1;
            let years = ((commit.author_time - prior.time) as f64 / SECONDS_PER_YEAR).max(0.0);
            rexp += 1.0 / (years + 1.0);
            if prior.subsystems.iter().any(|s| subsystems.contains(s)) {
                sexp += 1;
            }
        }

        Ok(ChangeMetrics {
            ns: subsystems.len() as u64,
            nd: directories.len() as u64,
            nf: files.len() as u64,
            entropy: entropy(&churns),
            la: files.iter().map(|f| f.lines_added).sum(),
            ld: files.iter().map(|f| f.lines_deleted).sum(),
            lt: files.iter().map(|f| f.lines_before).sum(),
            fix: fix_pattern.is_fix(&commit.message),
            ndev: authors.len() as u64,
            age: age_days / files.len() as f64,
            nuc: prior_changes.len() as u64,
            exp,
            rexp,
            sexp,
        })
    }
}

fn distinct_subsystems(commit: &CommitRecord) -> Vec<String> {
    let set: BTreeSet<&str> = commit.files.iter().map(|f| subsystem_of(f.path())).collect();
    set.into_iter().map(String::from).collect()
}

/// Walks `commits` in mining order and yields the metrics of every
/// eligible commit. Each commit only sees the commits before it.
pub fn compute_all(
    commits: &[CommitRecord],
    fix_pattern: &FixPattern,
) -> Result<Vec<(String, ChangeMetrics)>, MetricsError> {
    let mut index = HistoryIndex::new();
    let mut out = Vec::new();
    for commit in commits {
        if commit.is_metric_eligible() {
            out.push((commit.hash.clone(), index.compute(commit, fix_pattern)?));
        }
        index.record(commit);
    }
    Ok(out)
}

/// Features of `commit` given everything mined before it.
pub fn compute_metrics(
    commit: &CommitRecord,
    history: &HistoryIndex,
    fix_pattern: &FixPattern,
) -> Result<ChangeMetrics, MetricsError> {
    history.compute(commit, fix_pattern)
}

/// Convenience wrapper using the default fix pattern.
pub fn is_fix(commit: &CommitRecord) -> bool {
    FixPattern::default().is_fix(&commit.message)
}
