// SPDX-License-Identifier: Apache-2.0

//! Zero-context unified diff hunks and line pairing between pre- and
//! post-image.

use alloc::string::String;
use alloc::vec::Vec;

/// `@@ -old_start,old_count +new_start,new_count @@`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HunkHeader {
    pub old_start: u32,
    pub old_count: u32,
    pub new_start: u32,
    pub new_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub header: HunkHeader,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

/// A post-image line matched to the pre-image line it replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinePair<'a> {
    pub old_line: u32,
    pub old_text: &'a str,
    pub new_text: &'a str,
}

pub fn parse_hunk_header(line: &str) -> Option<HunkHeader> {
    let rest = line.strip_prefix("@@ -")?;
    let end = rest.find(" @@")?;
    let mut ranges = rest[..end].split(" +");
    let (old_start, old_count) = parse_range(ranges.next()?)?;
    let (new_start, new_count) = parse_range(ranges.next()?)?;
    if ranges.next().is_some() {
        return None;
    }
    Some(HunkHeader {
        old_start,
        old_count,
        new_start,
        new_count,
    })
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((start, count)) => Some((start.parse().ok()?, count.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

/// Collects hunks from the body of one file's patch. Lines outside hunks
/// (headers, `\ No newline` markers) are ignored.
pub fn parse_hunks<'a, I>(lines: I) -> Vec<Hunk>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut hunks: Vec<Hunk> = Vec::new();
    let mut open = false;
    for line in lines {
        if let Some(header) = parse_hunk_header(line) {
            hunks.push(Hunk {
                header,
                removed: Vec::new(),
                added: Vec::new(),
            });
            open = true;
            continue;
        }
        if !open {
            continue;
        }
        let Some(h) = hunks.last_mut() else { continue };
        if let Some(text) = line.strip_prefix('-') {
            if (h.removed.len() as u32) < h.header.old_count {
                h.removed.push(String::from(text));
                continue;
            }
        } else if let Some(text) = line.strip_prefix('+') {
            if (h.added.len() as u32) < h.header.new_count {
                h.added.push(String::from(text));
                continue;
            }
        } else if line.starts_with('\\') || line.starts_with(' ') {
            continue;
        }
        open = h.removed.len() as u32 != h.header.old_count
            || h.added.len() as u32 != h.header.new_count;
    }
    hunks
}

/// Pre-image line numbers removed by the hunks, sorted and distinct.
pub fn deleted_line_numbers(hunks: &[Hunk]) -> Vec<u32> {
    let mut out: Vec<u32> = hunks
        .iter()
        .filter(|h| h.header.old_count > 0)
        .flat_map(|h| h.header.old_start..h.header.old_start + h.header.old_count)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Finds the pre-image line that post-image line `new_line` replaced.
///
/// Within the covering hunk a whitespace-equivalent removed line is
/// preferred (nearest offset first); otherwise the removed line at the same
/// offset. `None` when the line is a pure insertion or outside every hunk.
pub fn paired_old_line(hunks: &[Hunk], new_line: u32) -> Option<LinePair<'_>> {
    let hunk = hunks.iter().find(|h| {
        h.header.new_count > 0
            && h.header.new_start <= new_line
            && new_line < h.header.new_start + h.header.new_count
    })?;
    let offset = (new_line - hunk.header.new_start) as usize;
    let new_text = hunk.added.get(offset)?.as_str();
    if hunk.removed.is_empty() {
        return None;
    }
    let mut candidates: Vec<usize> = (0..hunk.removed.len()).collect();
    candidates.sort_by_key(|&i| (i as isize - offset as isize).unsigned_abs());
    let chosen = candidates
        .iter()
        .copied()
        .find(|&i| whitespace_equivalent(&hunk.removed[i], new_text))
        .or_else(|| (offset < hunk.removed.len()).then_some(offset))?;
    Some(LinePair {
        old_line: hunk.header.old_start + chosen as u32,
        old_text: &hunk.removed[chosen],
        new_text,
    })
}

/// Equal after collapsing every whitespace run to one space and trimming.
pub fn whitespace_equivalent(a: &str, b: &str) -> bool {
    let mut x = a.split_whitespace();
    let mut y = b.split_whitespace();
    loop {
        match (x.next(), y.next()) {
            (None, None) => return true,
            (Some(p), Some(q)) if p == q => {}
            _ => return false,
        }
    }
}
