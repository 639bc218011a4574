// SPDX-License-Identifier: Apache-2.0

mod common;

use common::fixtures::{metrics_match, metrics_repo};
use common::{ScriptedRepo, ALICE, BOB, DAY, T0};
use jitdp::git::GitError;
use jitdp::{mine_history, MineOptions};
use jitdp_core::metrics::compute_all;
use jitdp_core::{ChangeKind, FixPattern, SourceFilter};

fn mine(repo: &ScriptedRepo) -> Vec<jitdp_core::CommitRecord> {
    mine_history(repo.path(), &MineOptions::default()).expect("mine")
}

#[test]
fn empty_repository_yields_nothing() {
    let repo = ScriptedRepo::new();
    assert!(mine(&repo).is_empty());
}

#[test]
fn missing_repository_is_reported() {
    let dir = common::out_dir();
    let err = mine_history(&dir.path().join("nowhere"), &MineOptions::default()).unwrap_err();
    assert!(matches!(err, GitError::RepoNotFound(_)), "{err}");
}

#[test]
fn linear_history_in_order() {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["1"]);
    let c1 = repo.commit("one", ALICE, T0);
    repo.lines("a.c", &["1", "2"]);
    repo.lines("b.c", &["x"]);
    let c2 = repo.commit("two", BOB, T0 + DAY);
    repo.lines("b.c", &["y"]);
    let c3 = repo.commit("three", ALICE, T0 + 2 * DAY);

    let commits = mine(&repo);
    let hashes: Vec<&str> = commits.iter().map(|c| c.hash.as_str()).collect();
    assert_eq!(hashes, [c1.as_str(), c2.as_str(), c3.as_str()]);
    let nf: Vec<usize> = commits.iter().map(|c| c.files.len()).collect();
    assert_eq!(nf, [1, 2, 1]);
    assert_eq!(commits[1].parent_hashes, vec![c1]);
    assert_eq!(commits[2].files[0].lines_before, 1);
    assert_eq!(commits[2].files[0].deleted_line_numbers, vec![1]);
    assert!(commits.iter().flat_map(|c| &c.files).all(|f| f.is_consistent()));
}

#[test]
fn merges_keep_no_files() {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["1"]);
    repo.commit("base", ALICE, T0);
    repo.branch("topic");
    repo.lines("b.c", &["b"]);
    repo.commit("topic", BOB, T0 + DAY);
    repo.checkout("main");
    repo.lines("c.c", &["c"]);
    repo.commit("main", ALICE, T0 + 2 * DAY);
    let m = repo.merge("topic", "merge", ALICE, T0 + 3 * DAY, &[]);

    let commits = mine(&repo);
    assert_eq!(commits.len(), 4);
    let merge = commits.last().unwrap();
    assert_eq!(merge.hash, m);
    assert!(merge.is_merge());
    assert!(merge.files.is_empty());
    assert!(!merge.is_metric_eligible());
}

#[test]
fn parents_precede_children_despite_clock_skew() {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["1"]);
    let c1 = repo.commit("late clock", ALICE, T0 + 10 * DAY);
    repo.lines("a.c", &["2"]);
    let c2 = repo.commit("early clock", BOB, T0);
    let hashes: Vec<String> = mine(&repo).into_iter().map(|c| c.hash).collect();
    assert_eq!(hashes, [c1, c2]);
}

#[test]
fn renames_and_filtering() {
    let repo = ScriptedRepo::new();
    repo.lines("src/a.c", &["1", "2", "3", "4"]);
    repo.lines("notes.txt", &["n"]);
    repo.lines("docs/x.c", &["d"]);
    repo.commit("add", ALICE, T0);
    repo.mv("src/a.c", "lib/a.c");
    repo.commit("move", ALICE, T0 + DAY);

    let commits = mine(&repo);
    let paths: Vec<&str> = commits[0].files.iter().map(|f| f.path()).collect();
    assert_eq!(paths, ["src/a.c"]);
    let moved = &commits[1].files[0];
    assert_eq!(moved.change_kind, ChangeKind::Rename);
    assert_eq!(moved.old_path.as_deref(), Some("src/a.c"));
    assert_eq!(moved.new_path.as_deref(), Some("lib/a.c"));
    assert_eq!(moved.lines_before, 4);

    let everything = MineOptions {
        filter: SourceFilter::permissive(),
        ..MineOptions::default()
    };
    let all = mine_history(repo.path(), &everything).unwrap();
    assert_eq!(all[0].files.len(), 3);
}

#[test]
fn unusual_paths_and_messages() {
    let repo = ScriptedRepo::new();
    repo.lines("dir with space/ünï.c", &["1"]);
    repo.commit("multi\n\nline body with | and % signs", ALICE, T0);
    let commits = mine(&repo);
    assert_eq!(commits[0].files[0].path(), "dir with space/ünï.c");
    assert_eq!(commits[0].message, "multi\n\nline body with | and % signs");
}

#[test]
fn hand_computed_metrics() {
    let (repo, expected) = metrics_repo();
    let commits = mine(&repo);
    let got = compute_all(&commits, &FixPattern::default()).unwrap();
    assert_eq!(got.len(), expected.len());
    for ((hash, m), (want_hash, want)) in got.iter().zip(&expected) {
        assert_eq!(hash, want_hash);
        if let Err(e) = metrics_match(m, want, 1e-12) {
            panic!("{hash}: {e}");
        }
    }
}

#[test]
fn prefix_metrics_do_not_change() {
    let (repo, _) = metrics_repo();
    let full = compute_all(&mine(&repo), &FixPattern::default()).unwrap();
    repo.git(&["checkout", "-q", "--detach", "HEAD~2"]);
    let prefix = compute_all(&mine(&repo), &FixPattern::default()).unwrap();
    assert_eq!(prefix.len(), full.len() - 2);
    assert_eq!(prefix[..], full[..prefix.len()]);
}

#[test]
fn mining_is_deterministic() {
    let (repo, _) = metrics_repo();
    assert_eq!(mine(&repo), mine(&repo));
}
