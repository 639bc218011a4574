// SPDX-License-Identifier: Apache-2.0

//! Meta-change aware SZZ.
//!
//! Every line a fix deletes is attributed to the commit that last touched
//! it at the fix's parent. When that commit is a meta-change for the line
//! (a merge, a whitespace-only rewrite of the line, or a mode-only change)
//! attribution steps past it to the line's previous position and blames
//! again. The commits where attribution settles are the inducing set.
//!
//! Repository access is abstracted by [`LineHistory`] so the stepping logic
//! stays independent of how blame and diffs are obtained.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commit::CommitRecord;
use crate::diff::whitespace_equivalent;

/// Upper bound on meta-change hops for a single line.
pub const MAX_META_HOPS: usize = 64;

/// A line position in some revision's version of a file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinePosition {
    pub rev: String,
    pub path: String,
    /// 1-based.
    pub line: u32,
}

/// Where blame attributed a line: the commit that introduced it and the
/// line's position in that commit's post-image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineOrigin {
    pub commit: String,
    pub path: String,
    pub line: u32,
}

/// A pre-image line replaced by the line under inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacedLine {
    pub position: LinePosition,
    pub text: String,
}

/// What the origin commit did to the attributed line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginChange {
    pub parent_count: usize,
    /// The commit changed only file modes for this path.
    pub mode_only: bool,
    /// Text of the line in the origin commit.
    pub text: String,
    /// The parent-side line this one replaced, if any.
    pub replaced: Option<ReplacedLine>,
}

/// Categories of changes that never count as defect-inducing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaChange {
    Merge,
    WhitespaceOnly,
    ModeOnly,
}

impl OriginChange {
    pub fn meta_change(&self) -> Option<MetaChange> {
        if self.parent_count > 1 {
            Some(MetaChange::Merge)
        } else if self.mode_only {
            Some(MetaChange::ModeOnly)
        } else if self
            .replaced
            .as_ref()
            .is_some_and(|r| whitespace_equivalent(&r.text, &self.text))
        {
            Some(MetaChange::WhitespaceOnly)
        } else {
            None
        }
    }
}

/// Read-only line history of a repository.
pub trait LineHistory {
    type Error: core::fmt::Display;

    /// Attributes each of `lines` (1-based) of `path` as of `rev`, in order.
    fn blame(&mut self, rev: &str, path: &str, lines: &[u32])
        -> Result<Vec<LineOrigin>, Self::Error>;

    fn origin_change(&mut self, origin: &LineOrigin) -> Result<OriginChange, Self::Error>;

    fn author_time(&mut self, commit: &str) -> Result<i64, Self::Error>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixLink {
    pub fix_hash: String,
    pub inducing_hashes: BTreeSet<String>,
    pub traced_lines: u64,
}

/// Result of tracing one fix, including the per-file failures that were
/// skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceOutcome {
    pub link: FixLink,
    pub warnings: Vec<String>,
    /// Lines dropped because a meta-change had no predecessor line.
    pub unresolved_lines: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SzzError {
    #[error("commit {0} is a merge and cannot be traced as a fix")]
    MergeFix(String),
    #[error("fix {0} has no parent to blame against")]
    RootFix(String),
    #[error("link references unmined commit {0}")]
    UnknownHash(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SzzConfig {
    /// Rename similarity threshold in percent used by diff-based lookups.
    pub rename_similarity: u8,
    pub max_meta_hops: usize,
}

impl Default for SzzConfig {
    fn default() -> Self {
        SzzConfig {
            rename_similarity: 50,
            max_meta_hops: MAX_META_HOPS,
        }
    }
}

/// Traces the lines deleted by `fix` back to the commits that introduced
/// them. Files whose pre-image cannot be blamed are skipped with a warning.
pub fn trace_fix<H: LineHistory>(
    fix: &CommitRecord,
    history: &mut H,
    config: &SzzConfig,
) -> Result<TraceOutcome, SzzError> {
    if fix.is_merge() {
        return Err(SzzError::MergeFix(fix.hash.clone()));
    }
    let parent = fix
        .parent_hashes
        .first()
        .ok_or_else(|| SzzError::RootFix(fix.hash.clone()))?;

    let mut inducing = BTreeSet::new();
    let mut warnings = Vec::new();
    let mut traced = 0u64;
    let mut unresolved = 0u64;

    for file in &fix.files {
        let Some(old_path) = file.pre_image_path() else { continue };
        if file.deleted_line_numbers.is_empty() {
            continue;
        }
        let origins = match history.blame(parent, old_path, &file.deleted_line_numbers) {
            Ok(o) => o,
            Err(e) => {
                warnings.push(alloc::format!("blame {}:{} failed: {}", parent, old_path, e));
                continue;
            }
        };
        traced += origins.len() as u64;
        for origin in origins {
            match settle(history, origin, config.max_meta_hops) {
                Ok(Some(commit)) => {
                    inducing.insert(commit);
                }
                Ok(None) => unresolved += 1,
                Err(e) => warnings.push(alloc::format!("{}: {}", old_path, e)),
            }
        }
    }

    inducing.remove(&fix.hash);
    let mut kept = BTreeSet::new();
    for hash in inducing {
        match history.author_time(&hash) {
            Ok(t) if t <= fix.author_time => {
                kept.insert(hash);
            }
            Ok(_) => warnings.push(alloc::format!("{hash} is newer than fix {}", fix.hash)),
            Err(e) => warnings.push(alloc::format!("author time of {hash}: {e}")),
        }
    }

    Ok(TraceOutcome {
        link: FixLink {
            fix_hash: fix.hash.clone(),
            inducing_hashes: kept,
            traced_lines: traced,
        },
        warnings,
        unresolved_lines: unresolved,
    })
}

/// Follows one attributed line past meta-changes. `None` when a
/// meta-change has no earlier line to continue from.
fn settle<H: LineHistory>(
    history: &mut H,
    mut origin: LineOrigin,
    max_hops: usize,
) -> Result<Option<String>, H::Error> {
    for _ in 0..=max_hops {
        let change = history.origin_change(&origin)?;
        if change.meta_change().is_none() {
            return Ok(Some(origin.commit));
        }
        let Some(prev) = change.replaced else {
            return Ok(None);
        };
        let pos = prev.position;
        let mut next = history.blame(&pos.rev, &pos.path, &[pos.line])?;
        match next.pop() {
            Some(o) => origin = o,
            None => return Ok(None),
        }
    }
    Ok(None)
}

/// Binary defect labels for every mined commit with the fixes that
/// implicated each one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub labels: BTreeMap<String, u8>,
    pub provenance: BTreeMap<String, Vec<String>>,
}

impl LabelSet {
    pub fn label(&self, hash: &str) -> Option<u8> {
        self.labels.get(hash).copied()
    }

    pub fn positives(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(|(_, &l)| l == 1)
            .map(|(h, _)| h.as_str())
    }
}

/// Marks the union of all inducing sets as defective and every other mined
/// commit as clean.
pub fn label_dataset(commits: &[CommitRecord], links: &[FixLink]) -> Result<LabelSet, SzzError> {
    let known: BTreeSet<&str> = commits.iter().map(|c| c.hash.as_str()).collect();
    let mut provenance: BTreeMap<String, Vec<String>> = commits
        .iter()
        .map(|c| (c.hash.clone(), Vec::new()))
        .collect();
    for link in links {
        if !known.contains(link.fix_hash.as_str()) {
            return Err(SzzError::UnknownHash(link.fix_hash.clone()));
        }
        for inducing in &link.inducing_hashes {
            let slot = provenance
                .get_mut(inducing)
                .ok_or_else(|| SzzError::UnknownHash(inducing.clone()))?;
            if !slot.contains(&link.fix_hash) {
                slot.push(link.fix_hash.clone());
            }
        }
    }
    let labels = provenance
        .iter()
        .map(|(h, p)| (h.clone(), u8::from(!p.is_empty())))
        .collect();
    Ok(LabelSet { labels, provenance })
}
