// SPDX-License-Identifier: Apache-2.0

//! Scripted repositories with planted SZZ answers and hand-computed metrics.

use std::collections::BTreeSet;

use jitdp::blame::GitLineHistory;
use jitdp::git::Git;
use jitdp::{mine_history, MineOptions};
use jitdp_core::szz::{trace_fix, SzzConfig};
use jitdp_core::ChangeMetrics;

use super::{ScriptedRepo, ALICE, BOB, CAROL, DAY, T0};

pub struct SzzFixture {
    pub name: &'static str,
    pub repo: ScriptedRepo,
    pub fix: String,
    pub expected: BTreeSet<String>,
    /// Commits that must not show up as inducing.
    pub excluded: Vec<String>,
}

fn set(hashes: &[&String]) -> BTreeSet<String> {
    hashes.iter().map(|h| h.to_string()).collect()
}

/// A, B, F: the fix edits a line only A wrote.
pub fn linear() -> SzzFixture {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["int a;", "int b;", "int c;"]);
    let a = repo.commit("add a", ALICE, T0);
    repo.lines("a.c", &["int a;", "int b;", "int c2;"]);
    repo.lines("b.c", &["int x;"]);
    let b = repo.commit("add b", BOB, T0 + DAY);
    repo.lines("a.c", &["int a;", "int b = 0;", "int c2;"]);
    let fix = repo.commit("fix uninitialised b", CAROL, T0 + 2 * DAY);
    SzzFixture {
        name: "linear blame",
        expected: set(&[&a]),
        excluded: vec![b],
        repo,
        fix,
    }
}

/// A writes the file, R moves it to another directory, F fixes a line.
pub fn rename() -> SzzFixture {
    let repo = ScriptedRepo::new();
    let body = ["int parse(char *s) {", "    return s[0];", "}", "int unused;"];
    repo.lines("src/a.c", &body);
    let a = repo.commit("add parser", ALICE, T0);
    repo.mv("src/a.c", "lib/parser.c");
    let r = repo.commit("move parser", BOB, T0 + DAY);
    repo.lines(
        "lib/parser.c",
        &["int parse(char *s) {", "    return s ? s[0] : 0;", "}", "int unused;"],
    );
    let fix = repo.commit("fix null parser input", CAROL, T0 + 2 * DAY);
    SzzFixture {
        name: "rename crossing",
        expected: set(&[&a]),
        excluded: vec![r],
        repo,
        fix,
    }
}

/// W only re-indents the line that F later fixes.
pub fn whitespace() -> SzzFixture {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["int f() {", "return 1;", "}"]);
    let a = repo.commit("add f", ALICE, T0);
    repo.lines("a.c", &["int f() {", "    return 1;", "}"]);
    let w = repo.commit("reformat", BOB, T0 + DAY);
    repo.lines("a.c", &["int f() {", "    return 2;", "}"]);
    let fix = repo.commit("fix f result", CAROL, T0 + 2 * DAY);
    SzzFixture {
        name: "whitespace meta-change",
        expected: set(&[&a]),
        excluded: vec![w],
        repo,
        fix,
    }
}

/// B (topic) and C (main) both change line 4; the conflicted merge M
/// resolves it with new text. F rewrites lines 1, 4 and 7, written by B,
/// M and C. M is stepped through to C.
pub fn merge() -> SzzFixture {
    let repo = ScriptedRepo::new();
    repo.lines("a.c", &["l1", "l2", "l3", "l4", "l5", "l6", "l7"]);
    let a = repo.commit("add lines", ALICE, T0);
    repo.branch("topic");
    repo.lines("a.c", &["l1b", "l2", "l3", "l4b", "l5", "l6", "l7"]);
    let b = repo.commit("topic edits", BOB, T0 + DAY);
    repo.checkout("main");
    repo.lines("a.c", &["l1", "l2", "l3", "l4c", "l5", "l6", "l7c"]);
    let c = repo.commit("main edits", CAROL, T0 + 2 * DAY);
    let m = repo.merge(
        "topic",
        "merge topic",
        ALICE,
        T0 + 3 * DAY,
        &[("a.c", &["l1b", "l2", "l3", "l4m", "l5", "l6", "l7c"])],
    );
    repo.lines("a.c", &["l1x", "l2", "l3", "l4x", "l5", "l6", "l7x"]);
    let fix = repo.commit("fix all three", BOB, T0 + 4 * DAY);
    SzzFixture {
        name: "merge exclusion",
        expected: set(&[&b, &c]),
        excluded: vec![m, a],
        repo,
        fix,
    }
}

pub fn szz_fixtures() -> Vec<SzzFixture> {
    vec![linear(), rename(), whitespace(), merge()]
}

/// Mines the fixture and traces its fix commit.
pub fn trace(fx: &SzzFixture) -> BTreeSet<String> {
    let commits = mine_history(fx.repo.path(), &MineOptions::default()).expect("mine");
    let fix = commits.iter().find(|c| c.hash == fx.fix).expect("fix mined");
    let mut history = GitLineHistory::new(Git::open(fx.repo.path()).expect("open"), 50);
    let outcome = trace_fix(fix, &mut history, &SzzConfig::default()).expect("trace");
    assert!(outcome.warnings.is_empty(), "{}: {:?}", fx.name, outcome.warnings);
    outcome.link.inducing_hashes
}

/// Six commits over three authors with a rename, a deletion, filtered
/// files and a fix, plus the features of each worked out by hand.
pub fn metrics_repo() -> (ScriptedRepo, Vec<(String, ChangeMetrics)>) {
    let repo = ScriptedRepo::new();
    let numbered = |n: usize, tag: &str| -> Vec<String> { (1..=n).map(|i| format!("{tag}{i}")).collect() };
    let write = |path: &str, lines: &[String]| {
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        repo.lines(path, &refs);
    };
    let day = |d: i64| T0 + d * DAY;
    let year = 365.25;
    let mut expected = Vec::new();

    // c1: two new files in src/core, README ignored.
    let mut a_c = numbered(10, "a");
    write("src/core/a.c", &a_c);
    write("src/core/b.c", &numbered(4, "b"));
    repo.lines("README.md", &["readme"]);
    let c1 = repo.commit("add core module", ALICE, day(0));
    expected.push((c1, ChangeMetrics {
        ns: 1, nd: 1, nf: 2, entropy: 0.863_120_568_566_631, la: 14, ld: 0, lt: 0, fix: false,
        ndev: 0, age: 0.0, nuc: 0, exp: 0, rexp: 0.0, sexp: 0,
    }));

    // c2: new driver, one line of a.c replaced.
    write("net/n.c", &numbered(6, "n"));
    a_c[2] = "a3 changed".into();
    write("src/core/a.c", &a_c);
    let c2 = repo.commit("add net driver", BOB, day(2));
    expected.push((c2, ChangeMetrics {
        ns: 2, nd: 2, nf: 2, entropy: 0.811_278_124_459_132_9, la: 7, ld: 1, lt: 10, fix: false,
        ndev: 1, age: 1.0, nuc: 1, exp: 0, rexp: 0.0, sexp: 0,
    }));

    // c3: b.c lines 2-3 replaced by one line.
    repo.lines("src/core/b.c", &["b1", "b23", "b4"]);
    let c3 = repo.commit("fix overflow in core #12", ALICE, day(5));
    expected.push((c3, ChangeMetrics {
        ns: 1, nd: 1, nf: 1, entropy: 0.0, la: 1, ld: 2, lt: 4, fix: true,
        ndev: 1, age: 5.0, nuc: 1, exp: 1, rexp: 1.0 / (5.0 / year + 1.0), sexp: 1,
    }));

    // c4: pure rename.
    repo.mv("net/n.c", "drivers/net.c");
    let c4 = repo.commit("rename driver", CAROL, day(6));
    expected.push((c4, ChangeMetrics {
        ns: 1, nd: 1, nf: 1, entropy: 0.0, la: 0, ld: 0, lt: 6, fix: false,
        ndev: 1, age: 4.0, nuc: 1, exp: 0, rexp: 0.0, sexp: 0,
    }));

    // c5: two lines appended to a.c, first line of the driver dropped,
    // an excluded docs file.
    a_c.push("a11".into());
    a_c.push("a12".into());
    write("src/core/a.c", &a_c);
    write("drivers/net.c", &numbered(6, "n")[1..]);
    repo.lines("docs/guide.c", &["guide"]);
    let c5 = repo.commit("tune core and driver", BOB, day(8));
    expected.push((c5, ChangeMetrics {
        ns: 2, nd: 2, nf: 2, entropy: 0.918_295_834_054_489_5, la: 2, ld: 1, lt: 16, fix: false,
        ndev: 3, age: 4.0, nuc: 3, exp: 1, rexp: 1.0 / (6.0 / year + 1.0), sexp: 1,
    }));

    // c6: b.c deleted.
    repo.remove("src/core/b.c");
    let c6 = repo.commit("remove old core helper", ALICE, day(10));
    expected.push((c6, ChangeMetrics {
        ns: 1, nd: 1, nf: 1, entropy: 0.0, la: 0, ld: 3, lt: 3, fix: false,
        ndev: 1, age: 5.0, nuc: 2, exp: 2,
        rexp: 1.0 / (10.0 / year + 1.0) + 1.0 / (5.0 / year + 1.0), sexp: 2,
    }));

    (repo, expected)
}

/// Compares two feature vectors; counts exactly, reals to `tol`.
pub fn metrics_match(got: &ChangeMetrics, want: &ChangeMetrics, tol: f64) -> Result<(), String> {
    let ints = [
        ("ns", got.ns, want.ns),
        ("nd", got.nd, want.nd),
        ("nf", got.nf, want.nf),
        ("la", got.la, want.la),
        ("ld", got.ld, want.ld),
        ("lt", got.lt, want.lt),
        ("ndev", got.ndev, want.ndev),
        ("nuc", got.nuc, want.nuc),
        ("exp", got.exp, want.exp),
        ("sexp", got.sexp, want.sexp),
    ];
    for (name, g, w) in ints {
        if g != w {
            return Err(format!("{name}: got {g}, want {w}"));
        }
    }
    if got.fix != want.fix {
        return Err(format!("fix: got {}, want {}", got.fix, want.fix));
    }
    let reals = [
        ("entropy", got.entropy, want.entropy),
        ("age", got.age, want.age),
        ("rexp", got.rexp, want.rexp),
    ];
    for (name, g, w) in reals {
        if (g - w).abs() > tol {
            return Err(format!("{name}: got {g}, want {w}"));
        }
    }
    Ok(())
}

/// Six commits where the two fixes trace back to A and C only.
pub fn label_repo() -> (ScriptedRepo, BTreeSet<String>) {
    let repo = ScriptedRepo::new();
    repo.lines("src/a.c", &["a1", "a2", "a3"]);
    let a = repo.commit("add a", ALICE, T0);
    repo.lines("src/b.c", &["b1", "b2"]);
    repo.commit("add b", BOB, T0 + DAY);
    repo.lines("src/c.c", &["c1", "c2", "c3"]);
    let c = repo.commit("add c", CAROL, T0 + 2 * DAY);
    repo.lines("src/b.c", &["b1", "b2", "b3"]);
    repo.commit("extend b", BOB, T0 + 3 * DAY);
    repo.lines("src/a.c", &["a1", "a3"]);
    repo.commit("fix stray a2", ALICE, T0 + 4 * DAY);
    repo.lines("src/c.c", &["c1", "c2 fixed", "c3"]);
    repo.commit("bug in c2", CAROL, T0 + 5 * DAY);
    let expected = [a, c].into_iter().collect();
    (repo, expected)
}
