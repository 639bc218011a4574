// SPDX-License-Identifier: Apache-2.0

//! Generated corpus whose labels need both the message and a metric.
//!
//! Every feature commit adds one new file. It is defect-inducing exactly
//! when its message carries [`KEYWORD`] and it adds a large file; a later
//! `fix` commit then edits the first line of that file. Neither the
//! keyword nor the size separates the classes on its own.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fast_import, Op, ScriptedRepo, Stream, ALICE, BOB, CAROL, T0};

pub const KEYWORD: &str = "cache";

const WORDS: &[&str] = &[
    "update", "refactor", "adjust", "handle", "support", "improve", "clean", "extend", "rework",
    "tidy", "config", "parser", "driver", "buffer", "queue", "token", "layout", "render",
    "socket", "thread",
];

const MODULES: &[&str] = &["sched", "net", "fs", "mm", "io", "ui", "db", "api"];

pub struct Corpus {
    pub repo: ScriptedRepo,
    pub commits: usize,
    pub positives: usize,
}

fn file_body(lines: usize, tag: usize) -> String {
    (0..lines).map(|j| format!("int v{tag}_{j} = {j};\n")).collect()
}

fn message(rng: &mut ChaCha8Rng, keyword: bool) -> String {
    let n = rng.random_range(2..=4);
    let mut words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    if keyword {
        let at = rng.random_range(0..=words.len());
        words.insert(at, KEYWORD);
    }
    words.join(" ")
}

/// Builds exactly `total` commits: feature commits plus one fix per
/// positive, the fixes landing one to eight features later.
pub fn corpus(total: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors = [ALICE, BOB, CAROL];
    // (feature index after which the fix lands, path, fixed body)
    let mut pending: Vec<(usize, String, String)> = Vec::new();
    let mut stream = Stream::default();
    let mut time = T0;
    let mut commits = 0;
    let mut positives = 0;
    let emit_fix = |stream: &mut Stream, rng: &mut ChaCha8Rng, time: &mut i64, path: &str, fixed: &str| {
        let words: Vec<&str> = WORDS.choose_multiple(rng, 2).copied().collect();
        let msg = format!("fix regression in {}", words.join(" "));
        *time += 3600;
        stream.commit(*authors.choose(rng).unwrap(), *time, &msg, &[Op::Write(path, fixed)]);
    };

    let mut i = 0;
    while commits + pending.len() < total {
        let room = total - commits - pending.len();
        let keyword = rng.random_bool(0.5);
        // A positive needs room for its fix as well.
        let big = rng.random_bool(0.5) && (room >= 2 || !keyword);
        let lines = if big { rng.random_range(40..=80) } else { rng.random_range(2..=20) };
        let module = MODULES.choose(&mut rng).unwrap();
        let path = format!("src/{module}/f{i}.c");
        let body = file_body(lines, i);
        let msg = message(&mut rng, keyword);
        time += 3600;
        stream.commit(*authors.choose(&mut rng).unwrap(), time, &msg, &[Op::Write(&path, &body)]);
        commits += 1;
        if keyword && big {
            positives += 1;
            let fixed = body.replacen(&format!("v{i}_0 = 0"), &format!("v{i}_0 = 1"), 1);
            pending.push((i + rng.random_range(1..=8), path, fixed));
        }
        let (due, later): (Vec<_>, Vec<_>) = pending.into_iter().partition(|p| p.0 <= i);
        pending = later;
        for (_, path, fixed) in due {
            emit_fix(&mut stream, &mut rng, &mut time, &path, &fixed);
            commits += 1;
        }
        i += 1;
    }
    for (_, path, fixed) in std::mem::take(&mut pending) {
        emit_fix(&mut stream, &mut rng, &mut time, &path, &fixed);
        commits += 1;
    }
    Corpus {
        repo: fast_import(&stream.finish()),
        commits,
        positives,
    }
}
