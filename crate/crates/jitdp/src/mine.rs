// SPDX-License-Identifier: Apache-2.0

//! Commit records from a repository's history.
//!
//! The whole history comes from one `git log -p -U0` walk. Records are
//! ordered by author time, ties broken by topological order, and a commit
//! is never placed before one of its parents even when author clocks
//! disagree.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use jitdp_core::diff::deleted_line_numbers;
use jitdp_core::{commit::author_identity, ChangeKind, CommitRecord, FileChange, SourceFilter};

use crate::git::{count_lines, Git, GitError};
use crate::patch::parse_patch;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MineOptions {
    pub filter: SourceFilter,
    /// Rename detection threshold in percent.
    pub rename_similarity: u8,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            filter: SourceFilter::default(),
            rename_similarity: 50,
        }
    }
}

const RECORD: char = '\x1e';
const FIELD: char = '\x1f';
const END_OF_HEADER: char = '\x1d';

/// Mines every commit reachable from `HEAD`. Merge commits are kept with
/// no files; other commits keep only the files accepted by the filter.
pub fn mine_history(repo: &Path, opts: &MineOptions) -> Result<Vec<CommitRecord>, GitError> {
    let git = Git::open(repo)?;
    let Some(head) = git.head()? else {
        return Ok(Vec::new());
    };
    let renames = format!("--find-renames={}%", opts.rename_similarity.min(100));
    let raw = git
        .run(&[
            "log",
            &head,
            "--reverse",
            "--topo-order",
            "--diff-merges=off",
            "-p",
            "-U0",
            "--no-ext-diff",
            "--no-textconv",
            &renames,
            "--src-prefix=a/",
            "--dst-prefix=b/",
            "--encoding=UTF-8",
            "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at%x1f%B%x1d",
        ])
        .map_err(|e| match e {
            GitError::Command { stderr, .. } => GitError::CorruptHistory {
                hash: first_hash(&stderr).unwrap_or_else(|| head.clone()),
                detail: stderr,
            },
            other => other,
        })?;
    let text = String::from_utf8_lossy(&raw);

    let mut blobs = git.blob_reader()?;
    let mut records = Vec::new();
    for chunk in text.split(RECORD).skip(1) {
        let rec = parse_commit(chunk, &opts.filter, |rev, path| {
            blobs
                .read(rev, path)?
                .map(|b| count_lines(&b))
                .ok_or_else(|| GitError::CorruptHistory {
                    hash: rev.to_string(),
                    detail: format!("pre-image {path} is missing"),
                })
        })?;
        records.push(rec);
    }
    log::info!("mined {} commits from {}", records.len(), repo.display());
    Ok(order_records(records))
}

fn parse_commit<F>(chunk: &str, filter: &SourceFilter, mut lines_of: F) -> Result<CommitRecord, GitError>
where
    F: FnMut(&str, &str) -> Result<u64, GitError>,
{
    let corrupt = |detail: &str| GitError::CorruptHistory {
        hash: chunk.chars().take(40).collect(),
        detail: detail.to_string(),
    };
    let (header, patch) = chunk
        .split_once(END_OF_HEADER)
        .ok_or_else(|| corrupt("truncated log record"))?;
    let fields: Vec<&str> = header.splitn(6, FIELD).collect();
    let [hash, parents, name, email, time, message] = fields[..] else {
        return Err(corrupt("malformed log header"));
    };
    let author_time: i64 = time.trim().parse().map_err(|_| corrupt("bad author time"))?;
    let parent_hashes: Vec<String> = parents.split_whitespace().map(String::from).collect();

    let mut files = Vec::new();
    if parent_hashes.len() <= 1 {
        for fp in parse_patch(patch) {
            let mut change = FileChange {
                old_path: fp.old_path.clone(),
                new_path: fp.new_path.clone(),
                change_kind: fp.kind,
                lines_added: fp.lines_added(),
                lines_deleted: fp.lines_deleted(),
                lines_before: 0,
                deleted_line_numbers: deleted_line_numbers(&fp.hunks),
            };
            if !filter.accepts_change(&change) {
                continue;
            }
            if change.change_kind != ChangeKind::Add {
                let (Some(parent), Some(old)) = (parent_hashes.first(), change.old_path.as_deref()) else {
                    return Err(corrupt("change to an existing file in a root commit"));
                };
                change.lines_before = lines_of(parent, old)?;
            }
            files.push(change);
        }
    }

    Ok(CommitRecord {
        hash: hash.trim().to_string(),
        parent_hashes,
        author_id: author_identity(name, email),
        author_time,
        message: message.trim_end().to_string(),
        files,
    })
}

/// Re-orders parent-first records by author time without ever moving a
/// commit ahead of a parent.
fn order_records(records: Vec<CommitRecord>) -> Vec<CommitRecord> {
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.hash.as_str(), i))
        .collect();
    let mut pending = vec![0usize; records.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
    for (i, r) in records.iter().enumerate() {
        for p in &r.parent_hashes {
            if let Some(&j) = index.get(p.as_str()) {
                pending[i] += 1;
                children[j].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<(i64, usize)>> = pending
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(i, _)| Reverse((records[i].author_time, i)))
        .collect();
    let mut order = Vec::with_capacity(records.len());
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push(Reverse((records[c].author_time, c)));
            }
        }
    }
    let mut slots: Vec<Option<CommitRecord>> = records.into_iter().map(Some).collect();
    order.into_iter().filter_map(|i| slots[i].take()).collect()
}

fn first_hash(s: &str) -> Option<String> {
    s.split(|c: char| !c.is_ascii_hexdigit())
        .find(|w| w.len() == 40)
        .map(String::from)
}
