// SPDX-License-Identifier: Apache-2.0

//! SZZ over a real repository: [`LineHistory`] backed by `git blame` and
//! zero-context diffs, and parallel tracing of every fix in a mined set.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use jitdp_core::diff::{paired_old_line, Hunk};
use jitdp_core::szz::{
    trace_fix, FixLink, LineHistory, LineOrigin, LinePosition, OriginChange, ReplacedLine,
    SzzConfig,
};
use jitdp_core::{CommitRecord, FixPattern};

use crate::git::{Git, GitError};
use crate::patch::{parse_patch, unquote, FilePatch};

pub struct GitLineHistory {
    git: Git,
    rename_similarity: u8,
    parents: HashMap<String, Vec<String>>,
    times: HashMap<String, i64>,
    texts: HashMap<LineOrigin, String>,
    diffs: HashMap<(String, String), Arc<Vec<FilePatch>>>,
}

impl GitLineHistory {
    pub fn new(git: Git, rename_similarity: u8) -> Self {
        GitLineHistory {
            git,
            rename_similarity: rename_similarity.min(100),
            parents: HashMap::new(),
            times: HashMap::new(),
            texts: HashMap::new(),
            diffs: HashMap::new(),
        }
    }

    fn parents_of(&mut self, commit: &str) -> Result<Vec<String>, GitError> {
        if let Some(p) = self.parents.get(commit) {
            return Ok(p.clone());
        }
        let p = self.git.parents(commit)?;
        self.parents.insert(commit.to_string(), p.clone());
        Ok(p)
    }

    fn diff(&mut self, parent: &str, commit: &str) -> Result<Arc<Vec<FilePatch>>, GitError> {
        let key = (parent.to_string(), commit.to_string());
        if let Some(d) = self.diffs.get(&key) {
            return Ok(Arc::clone(d));
        }
        let renames = format!("--find-renames={}%", self.rename_similarity);
        let out = self.git.run_text(&[
            "diff",
            "-U0",
            "--no-ext-diff",
            "--no-textconv",
            &renames,
            "--src-prefix=a/",
            "--dst-prefix=b/",
            parent,
            commit,
            "--",
        ])?;
        let d = Arc::new(parse_patch(&out));
        self.diffs.insert(key, Arc::clone(&d));
        Ok(d)
    }
}

/// Groups sorted line numbers into inclusive ranges.
fn ranges(lines: &[u32]) -> Vec<(u32, u32)> {
    let mut sorted = lines.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for l in sorted {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == l => *end = l,
            _ => out.push((l, l)),
        }
    }
    out
}

fn covers(hunks: &[Hunk], line: u32) -> bool {
    hunks.iter().any(|h| {
        h.header.new_count > 0
            && h.header.new_start <= line
            && line < h.header.new_start + h.header.new_count
    })
}

fn added_text(hunks: &[Hunk], line: u32) -> Option<&str> {
    hunks.iter().find_map(|h| {
        let offset = line.checked_sub(h.header.new_start)? as usize;
        h.added.get(offset).map(String::as_str)
    })
}

#[derive(Default)]
struct BlameEntry {
    commit: String,
    orig: u32,
    fin: u32,
    path: String,
    time: Option<i64>,
}

impl LineHistory for GitLineHistory {
    type Error = GitError;

    fn blame(&mut self, rev: &str, path: &str, lines: &[u32]) -> Result<Vec<LineOrigin>, GitError> {
        if lines.is_empty() {
            return Ok(Vec::new());
        }
        let specs: Vec<String> = ranges(lines)
            .into_iter()
            .flat_map(|(a, b)| ["-L".to_string(), format!("{a},{b}")])
            .collect();
        let mut args: Vec<&str> = vec!["blame", "--line-porcelain"];
        args.extend(specs.iter().map(String::as_str));
        args.extend([rev, "--", path]);
        let out = self.git.run_text(&args)?;

        let mut found: HashMap<u32, LineOrigin> = HashMap::new();
        let mut cur: Option<BlameEntry> = None;
        for line in out.lines() {
            if let Some(content) = line.strip_prefix('\t') {
                let Some(e) = cur.take() else { continue };
                let origin = LineOrigin {
                    commit: e.commit,
                    path: e.path,
                    line: e.orig,
                };
                if let Some(t) = e.time {
                    self.times.insert(origin.commit.clone(), t);
                }
                self.texts.insert(origin.clone(), content.to_string());
                found.insert(e.fin, origin);
            } else if let Some(p) = line.strip_prefix("filename ") {
                if let Some(e) = cur.as_mut() {
                    e.path = unquote(p);
                }
            } else if let Some(t) = line.strip_prefix("author-time ") {
                if let Some(e) = cur.as_mut() {
                    e.time = t.trim().parse().ok();
                }
            } else if cur.is_none() {
                let mut parts = line.split(' ');
                let (Some(sha), Some(orig), Some(fin)) = (parts.next(), parts.next(), parts.next()) else {
                    continue;
                };
                if sha.len() < 40 || !sha.bytes().all(|b| b.is_ascii_hexdigit()) {
                    continue;
                }
                cur = Some(BlameEntry {
                    commit: sha.to_string(),
                    orig: orig.parse().unwrap_or(0),
                    fin: fin.parse().unwrap_or(0),
                    path: path.to_string(),
                    time: None,
                });
            }
        }
        lines
            .iter()
            .map(|l| {
                found.get(l).cloned().ok_or_else(|| GitError::CorruptHistory {
                    hash: rev.to_string(),
                    detail: format!("blame of {path} has no line {l}"),
                })
            })
            .collect()
    }

    fn origin_change(&mut self, origin: &LineOrigin) -> Result<OriginChange, GitError> {
        let parents = self.parents_of(&origin.commit)?;
        let mut text = self.texts.get(origin).cloned();
        let mut mode_only = false;
        let mut replaced = None;
        for parent in &parents {
            let patches = self.diff(parent, &origin.commit)?;
            let Some(fp) = patches
                .iter()
                .find(|p| p.new_path.as_deref() == Some(origin.path.as_str()))
            else {
                continue;
            };
            if text.is_none() {
                text = added_text(&fp.hunks, origin.line).map(String::from);
            }
            mode_only = fp.mode_changed && !covers(&fp.hunks, origin.line);
            if let (Some(pair), Some(old_path)) = (paired_old_line(&fp.hunks, origin.line), fp.old_path.as_ref()) {
                replaced = Some(ReplacedLine {
                    position: LinePosition {
                        rev: parent.clone(),
                        path: old_path.clone(),
                        line: pair.old_line,
                    },
                    text: pair.old_text.to_string(),
                });
                break;
            }
        }
        Ok(OriginChange {
            parent_count: parents.len(),
            mode_only,
            text: text.unwrap_or_default(),
            replaced,
        })
    }

    fn author_time(&mut self, commit: &str) -> Result<i64, GitError> {
        if let Some(&t) = self.times.get(commit) {
            return Ok(t);
        }
        let out = self.git.run_text(&["log", "-1", "--format=%at", commit, "--"])?;
        let t = out.trim().parse().map_err(|_| GitError::CorruptHistory {
            hash: commit.to_string(),
            detail: format!("bad author time {out:?}"),
        })?;
        self.times.insert(commit.to_string(), t);
        Ok(t)
    }
}

/// Links for every fix in `commits`, in mining order, plus the warnings
/// collected while tracing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceSummary {
    pub links: Vec<FixLink>,
    pub warnings: Vec<String>,
    pub unresolved_lines: u64,
}

/// The commits traced as fixes: non-merge commits with at least one
/// source file whose message matches the fix pattern.
pub fn fix_commits<'a>(commits: &'a [CommitRecord], pattern: &'a FixPattern) -> impl Iterator<Item = &'a CommitRecord> {
    commits
        .iter()
        .filter(move |c| c.is_metric_eligible() && pattern.is_fix(&c.message))
}

/// Traces every fix on up to `jobs` threads, each with its own git
/// processes and caches. Results keep mining order.
pub fn trace_fixes(
    repo: &Path,
    commits: &[CommitRecord],
    pattern: &FixPattern,
    config: &SzzConfig,
    jobs: usize,
) -> Result<TraceSummary, GitError> {
    let git = Git::open(repo)?;
    let fixes: Vec<&CommitRecord> = fix_commits(commits, pattern).collect();
    let next = AtomicUsize::new(0);
    let jobs = jobs.clamp(1, fixes.len().max(1));

    let per_thread: Vec<Vec<(usize, Traced)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|_| {
                let git = git.clone();
                let (fixes, next) = (&fixes, &next);
                s.spawn(move || {
                    let mut history = GitLineHistory::new(git, config.rename_similarity);
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(fix) = fixes.get(i) else { break };
                        done.push((i, trace_one(fix, &mut history, config)));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tracing thread panicked"))
            .collect()
    });

    let mut traced: Vec<(usize, Traced)> = per_thread.into_iter().flatten().collect();
    traced.sort_by_key(|(i, _)| *i);
    let mut summary = TraceSummary::default();
    for (_, t) in traced {
        summary.warnings.extend(t.warnings);
        summary.unresolved_lines += t.unresolved;
        summary.links.extend(t.link);
    }
    log::info!(
        "traced {} fixes, {} warnings, {} unresolved lines",
        fixes.len(),
        summary.warnings.len(),
        summary.unresolved_lines
    );
    Ok(summary)
}

struct Traced {
    link: Option<FixLink>,
    warnings: Vec<String>,
    unresolved: u64,
}

fn trace_one(fix: &CommitRecord, history: &mut GitLineHistory, config: &SzzConfig) -> Traced {
    match trace_fix(fix, history, config) {
        Ok(outcome) => Traced {
            warnings: outcome
                .warnings
                .into_iter()
                .map(|w| format!("fix {}: {w}", fix.hash))
                .collect(),
            unresolved: outcome.unresolved_lines,
            link: Some(outcome.link),
        },
        Err(e) => Traced {
            link: None,
            warnings: vec![format!("fix {}: {e}", fix.hash)],
            unresolved: 0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_ranges() {
        assert_eq!(ranges(&[5, 1, 2, 3, 9, 10, 3]), vec![(1, 3), (5, 5), (9, 10)]);
        assert!(ranges(&[]).is_empty());
    }
}
