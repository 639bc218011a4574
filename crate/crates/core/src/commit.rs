// SPDX-License-Identifier: Apache-2.0

//! Mined commit records and the source-file filter applied while mining.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// How a file was touched by a commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Add,
    Modify,
    Delete,
    Rename,
}

/// Line-level summary of one file in one commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    /// Pre-image path; absent for additions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    /// Post-image path; absent for deletions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_path: Option<String>,
    pub change_kind: ChangeKind,
    pub lines_added: u64,
    pub lines_deleted: u64,
    /// Number of lines in the pre-image file (0 for additions).
    pub lines_before: u64,
    /// 1-based, sorted, distinct line numbers removed from the pre-image.
    #[serde(default)]
    pub deleted_line_numbers: Vec<u32>,
}

impl FileChange {
    /// The path the change is known by after the commit, or the deleted
    /// path for deletions.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    /// Path in the pre-image, if the file existed before the commit.
    pub fn pre_image_path(&self) -> Option<&str> {
        self.old_path.as_deref()
    }

    pub fn churn(&self) -> u64 {
        self.lines_added + self.lines_deleted
    }

    /// Checks the structural invariants of a file change.
    pub fn is_consistent(&self) -> bool {
        let paths_ok = match self.change_kind {
            ChangeKind::Add => self.old_path.is_none() && self.new_path.is_some(),
            ChangeKind::Delete => self.old_path.is_some() && self.new_path.is_none(),
            ChangeKind::Modify | ChangeKind::Rename => {
                self.old_path.is_some() && self.new_path.is_some()
            }
        };
        let before_ok = match self.change_kind {
            ChangeKind::Modify | ChangeKind::Delete => self.lines_before >= self.lines_deleted,
            _ => true,
        };
        let lines_ok = self
            .deleted_line_numbers
            .windows(2)
            .all(|w| w[0] < w[1])
            && self
                .deleted_line_numbers
                .iter()
                .all(|&l| l >= 1 && u64::from(l) <= self.lines_before);
        paths_ok && before_ok && lines_ok
    }
}

/// One mined commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub hash: String,
    pub parent_hashes: Vec<String>,
    /// Lowercased `name <email>`.
    pub author_id: String,
    /// Unix seconds, UTC.
    pub author_time: i64,
    pub message: String,
    pub files: Vec<FileChange>,
}

impl CommitRecord {
    pub fn is_merge(&self) -> bool {
        self.parent_hashes.len() > 1
    }

    /// True when the commit takes part in metric computation: a non-merge
    /// with at least one source file.
    pub fn is_metric_eligible(&self) -> bool {
        !self.is_merge() && !self.files.is_empty()
    }
}

/// Builds the normalized author identity used throughout the pipeline.
///
/// No alias resolution: two spellings of the same person are two authors.
pub fn author_identity(name: &str, email: &str) -> String {
    let mut id = String::with_capacity(name.len() + email.len() + 3);
    id.push_str(name.trim());
    id.push_str(" <");
    id.push_str(email.trim());
    id.push('>');
    id.to_lowercase()
}

/// Decides which paths count as source files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFilter {
    /// Extensions including the leading dot, compared case-insensitively.
    pub include_extensions: Vec<String>,
    /// A pattern ending in `/` excludes any path with that directory
    /// component; other patterns exclude paths containing them.
    pub exclude_patterns: Vec<String>,
}

impl Default for SourceFilter {
    fn default() -> Self {
        let ext = [
            ".c", ".cc", ".cpp", ".h", ".hpp", ".py", ".rs", ".go", ".java", ".js", ".ts",
        ];
        let excl = ["test/", "docs/", "third_party/"];
        SourceFilter {
            include_extensions: ext.iter().map(|s| s.to_string()).collect(),
            exclude_patterns: excl.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SourceFilter {
    /// Accepts every path.
    pub fn permissive() -> Self {
        SourceFilter {
            include_extensions: Vec::new(),
            exclude_patterns: Vec::new(),
        }
    }

    pub fn accepts(&self, path: &str) -> bool {
        if self.exclude_patterns.iter().any(|p| pattern_matches(p, path)) {
            return false;
        }
        if self.include_extensions.is_empty() {
            return true;
        }
        let file_name = path.rsplit('/').next().unwrap_or(path);
        let lower = file_name.to_lowercase();
        self.include_extensions
            .iter()
            .any(|ext| lower.ends_with(&ext.to_lowercase()))
    }

    /// A change is kept when either of its paths is a source file.
    pub fn accepts_change(&self, change: &FileChange) -> bool {
        change.new_path.as_deref().is_some_and(|p| self.accepts(p))
            || change.old_path.as_deref().is_some_and(|p| self.accepts(p))
    }
}

fn pattern_matches(pattern: &str, path: &str) -> bool {
    if pattern.is_empty() {
        return false;
    }
    match pattern.strip_suffix('/') {
        Some(dir) => {
            let mut components: Vec<&str> = path.split('/').collect();
            // the last component is the file itself
            components.pop();
            let dir = dir.trim_matches('/');
            if dir.contains('/') {
                path.starts_with(pattern) || path.contains(&alloc::format!("/{pattern}"))
            } else {
                components.contains(&dir)
            }
        }
        None => path.contains(pattern),
    }
}
