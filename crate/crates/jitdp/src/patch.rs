// SPDX-License-Identifier: Apache-2.0

//! Parser for multi-file `git diff` / `git log -p` output produced with
//! `a/` and `b/` prefixes.

use jitdp_core::diff::{parse_hunks, Hunk};
use jitdp_core::ChangeKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub kind: ChangeKind,
    pub mode_changed: bool,
    pub binary: bool,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn lines_added(&self) -> u64 {
        self.hunks.iter().map(|h| h.added.len() as u64).sum()
    }

    pub fn lines_deleted(&self) -> u64 {
        self.hunks.iter().map(|h| h.removed.len() as u64).sum()
    }
}

#[derive(Default)]
struct Header {
    git_line: String,
    old: Option<Option<String>>,
    new: Option<Option<String>>,
    rename_from: Option<String>,
    rename_to: Option<String>,
    added: bool,
    deleted: bool,
    mode_changed: bool,
    binary: bool,
}

/// Splits a patch into per-file sections. Text before the first
/// `diff --git` line is ignored.
pub fn parse_patch(text: &str) -> Vec<FilePatch> {
    let mut out = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let Some(rest) = line.strip_prefix("diff --git ") else { continue };
        let mut h = Header {
            git_line: rest.to_string(),
            ..Header::default()
        };
        // extended header lines up to the first hunk or the next file
        while let Some(&next) = lines.peek() {
            if next.starts_with("@@ ") || next.starts_with("diff --git ") {
                break;
            }
            lines.next();
            if let Some(p) = next.strip_prefix("--- ") {
                h.old = Some(side_path(p, "a/"));
            } else if let Some(p) = next.strip_prefix("+++ ") {
                h.new = Some(side_path(p, "b/"));
            } else if let Some(p) = next.strip_prefix("rename from ") {
                h.rename_from = Some(unquote(p));
            } else if let Some(p) = next.strip_prefix("rename to ") {
                h.rename_to = Some(unquote(p));
            } else if next.starts_with("new file mode ") || next.starts_with("copy to ") {
                h.added = true;
            } else if next.starts_with("deleted file mode ") {
                h.deleted = true;
            } else if next.starts_with("old mode ") || next.starts_with("new mode ") {
                h.mode_changed = true;
            } else if next.starts_with("Binary files ") || next == "GIT binary patch" {
                h.binary = true;
            }
        }
        let mut body = Vec::new();
        while let Some(&next) = lines.peek() {
            if next.starts_with("diff --git ") {
                break;
            }
            body.push(next);
            lines.next();
        }
        out.push(finish(h, parse_hunks(body)));
    }
    out
}

fn finish(h: Header, hunks: Vec<Hunk>) -> FilePatch {
    let fallback = || git_line_path(&h.git_line);
    let (kind, old_path, new_path) = if h.added {
        let new = h.rename_to.clone().or_else(|| h.new.clone().flatten()).or_else(fallback);
        (ChangeKind::Add, None, new)
    } else if h.deleted {
        let old = h.old.clone().flatten().or_else(fallback);
        (ChangeKind::Delete, old, None)
    } else if h.rename_from.is_some() || h.rename_to.is_some() {
        (ChangeKind::Rename, h.rename_from.clone(), h.rename_to.clone())
    } else {
        let path = h
            .new
            .clone()
            .flatten()
            .or_else(|| h.old.clone().flatten())
            .or_else(fallback);
        (ChangeKind::Modify, path.clone(), path)
    };
    FilePatch {
        old_path,
        new_path,
        kind,
        mode_changed: h.mode_changed,
        binary: h.binary,
        hunks,
    }
}

/// Path from a `---`/`+++` line; `None` for `/dev/null`.
fn side_path(raw: &str, prefix: &str) -> Option<String> {
    let raw = raw.trim_end_matches('\t');
    if raw == "/dev/null" {
        return None;
    }
    let p = unquote(raw);
    Some(p.strip_prefix(prefix).map(String::from).unwrap_or(p))
}

/// Best effort for sections without `---`/`+++` lines: the two paths are
/// equal unless the change was a rename, which has its own header lines.
fn git_line_path(rest: &str) -> Option<String> {
    if rest.starts_with('"') {
        let (first, _) = split_quoted(rest)?;
        return first.strip_prefix("a/").map(String::from);
    }
    let n = rest.len();
    if n < 5 || (n - 5) % 2 != 0 {
        return None;
    }
    let len = (n - 5) / 2;
    let a = rest.get(2..2 + len)?;
    let b = rest.get(len + 5..)?;
    (rest.starts_with("a/") && a == b).then(|| a.to_string())
}

fn split_quoted(s: &str) -> Option<(String, &str)> {
    let body = s.strip_prefix('"')?;
    let mut escaped = false;
    for (i, c) in body.char_indices() {
        match c {
            '\\' if !escaped => escaped = true,
            '"' if !escaped => return Some((unquote(&s[..i + 2]), &body[i + 1..])),
            _ => escaped = false,
        }
    }
    None
}

/// Undoes git's C-style path quoting; unquoted input is returned as is.
pub fn unquote(s: &str) -> String {
    let Some(inner) = s.strip_prefix('"').and_then(|x| x.strip_suffix('"')) else {
        return s.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut it = inner.bytes().peekable();
    while let Some(b) = it.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match it.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'r') => bytes.push(b'\r'),
            Some(b'a') => bytes.push(0x07),
            Some(b'b') => bytes.push(0x08),
            Some(b'f') => bytes.push(0x0c),
            Some(b'v') => bytes.push(0x0b),
            Some(d @ b'0'..=b'7') => {
                let mut v = u32::from(d - b'0');
                for _ in 0..2 {
                    match it.peek() {
                        Some(&o @ b'0'..=b'7') => {
                            v = v * 8 + u32::from(o - b'0');
                            it.next();
                        }
                        _ => break,
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => bytes.push(b'\\'),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}
