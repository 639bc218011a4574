// SPDX-License-Identifier: Apache-2.0

//! Scripted git repositories for integration tests.

#![allow(dead_code)]

pub mod fixtures;
pub mod synthetic;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use tempfile::TempDir;

pub const ALICE: (&str, &str) = ("Alice", "alice@example.org");
pub const BOB: (&str, &str) = ("Bob", "bob@example.org");
pub const CAROL: (&str, &str) = ("Carol", "carol@example.org");

pub const DAY: i64 = 86_400;
/// 2023-11-14T22:13:20Z, a Tuesday.
pub const T0: i64 = 1_700_000_000;

pub struct ScriptedRepo {
    dir: TempDir,
}

fn git_command(dir: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.current_dir(dir)
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("LC_ALL", "C")
        .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false"]);
    cmd
}

impl ScriptedRepo {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let repo = ScriptedRepo { dir };
        repo.git(&["init", "-q", "-b", "main"]);
        repo
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Runs git and returns trimmed stdout; panics on failure.
    pub fn git(&self, args: &[&str]) -> String {
        let out = git_command(self.path()).args(args).output().expect("run git");
        assert!(
            out.status.success(),
            "git {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).trim().to_string()
    }

    fn git_as(&self, args: &[&str], author: (&str, &str), time: i64) -> std::process::Output {
        let date = format!("@{time} +0000");
        git_command(self.path())
            .env("GIT_AUTHOR_NAME", author.0)
            .env("GIT_AUTHOR_EMAIL", author.1)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_NAME", author.0)
            .env("GIT_COMMITTER_EMAIL", author.1)
            .env("GIT_COMMITTER_DATE", &date)
            .args(args)
            .output()
            .expect("run git")
    }

    pub fn write(&self, path: &str, content: &str) {
        let p = self.path().join(path);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).unwrap();
        }
        fs::write(p, content).unwrap();
    }

    pub fn lines(&self, path: &str, lines: &[&str]) {
        let mut s = lines.join("\n");
        s.push('\n');
        self.write(path, &s);
    }

    /// `git mv`, creating the destination directory first.
    pub fn mv(&self, from: &str, to: &str) {
        if let Some(parent) = self.path().join(to).parent() {
            fs::create_dir_all(parent).unwrap();
        }
        self.git(&["mv", from, to]);
    }

    pub fn remove(&self, path: &str) {
        fs::remove_file(self.path().join(path)).unwrap();
    }

    /// Stages everything and commits; returns the new hash.
    pub fn commit(&self, message: &str, author: (&str, &str), time: i64) -> String {
        self.git(&["add", "-A"]);
        let out = self.git_as(&["commit", "-q", "--allow-empty", "-m", message], author, time);
        assert!(out.status.success(), "commit failed: {}", String::from_utf8_lossy(&out.stderr));
        self.head()
    }

    pub fn head(&self) -> String {
        self.git(&["rev-parse", "HEAD"])
    }

    pub fn checkout(&self, branch: &str) {
        self.git(&["checkout", "-q", branch]);
    }

    pub fn branch(&self, name: &str) {
        self.git(&["checkout", "-q", "-b", name]);
    }

    /// Merges `branch` into the current branch. When `resolve` is given the
    /// merge is expected to conflict and the listed files are written as
    /// the resolution before committing.
    pub fn merge(
        &self,
        branch: &str,
        message: &str,
        author: (&str, &str),
        time: i64,
        resolve: &[(&str, &[&str])],
    ) -> String {
        let out = self.git_as(&["merge", "-q", "--no-ff", "-m", message, branch], author, time);
        if resolve.is_empty() {
            assert!(out.status.success(), "merge failed: {}", String::from_utf8_lossy(&out.stderr));
            return self.head();
        }
        assert!(!out.status.success(), "merge was expected to conflict");
        for (path, lines) in resolve {
            self.lines(path, lines);
        }
        self.git(&["add", "-A"]);
        let out = self.git_as(&["commit", "-q", "--no-edit"], author, time);
        assert!(out.status.success(), "merge commit failed: {}", String::from_utf8_lossy(&out.stderr));
        self.head()
    }
}

/// Feeds a `git fast-import` stream into a fresh repository.
pub fn fast_import(stream: &str) -> ScriptedRepo {
    let repo = ScriptedRepo::new();
    let mut child = git_command(repo.path())
        .args(["fast-import", "--quiet"])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .expect("spawn fast-import");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stream.as_bytes())
        .unwrap();
    assert!(child.wait().unwrap().success(), "fast-import failed");
    repo.git(&["checkout", "-q", "-f", "main"]);
    repo
}

/// Builder for fast-import streams on `refs/heads/main`.
#[derive(Default)]
pub struct Stream {
    text: String,
    mark: usize,
}

pub enum Op<'a> {
    Write(&'a str, &'a str),
    Delete(&'a str),
}

impl Stream {
    /// Appends a commit and returns its mark.
    pub fn commit(&mut self, author: (&str, &str), time: i64, message: &str, ops: &[Op<'_>]) -> usize {
        self.mark += 1;
        let mut s = format!(
            "commit refs/heads/main\nmark :{}\nauthor {} <{}> {time} +0000\ncommitter {} <{}> {time} +0000\ndata {}\n{message}\n",
            self.mark,
            author.0,
            author.1,
            author.0,
            author.1,
            message.len()
        );
        for op in ops {
            match op {
                Op::Write(path, content) => {
                    s.push_str(&format!("M 100644 inline {path}\ndata {}\n{content}\n", content.len()));
                }
                Op::Delete(path) => s.push_str(&format!("D {path}\n")),
            }
        }
        self.text.push_str(&s);
        self.mark
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn out_dir() -> TempDir {
    tempfile::tempdir().expect("temp dir")
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_jitdp"))
}
