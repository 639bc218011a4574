// SPDX-License-Identifier: Apache-2.0

//! Thin wrapper around the `git` command line.
//!
//! Every call pins the settings that change machine-readable output
//! (path quoting, diff prefixes, colour, external diff drivers) so parsing
//! does not depend on the user's configuration.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("no git repository at {0}")]
    RepoNotFound(PathBuf),
    #[error("unreadable history at {hash}: {detail}")]
    CorruptHistory { hash: String, detail: String },
    #[error("`git {args}` failed: {stderr}")]
    Command { args: String, stderr: String },
    #[error("cannot run git: {0}")]
    Io(#[from] std::io::Error),
}

const PINNED_CONFIG: &[&str] = &[
    "-c",
    "core.quotePath=false",
    "-c",
    "diff.noprefix=false",
    "-c",
    "diff.mnemonicPrefix=false",
    "-c",
    "log.showSignature=false",
    "-c",
    "color.ui=never",
];

#[derive(Debug, Clone)]
pub struct Git {
    root: PathBuf,
}

impl Git {
    /// Opens the repository containing `path`.
    pub fn open(path: &Path) -> Result<Self, GitError> {
        if !path.is_dir() {
            return Err(GitError::RepoNotFound(path.to_path_buf()));
        }
        let git = Git {
            root: path.to_path_buf(),
        };
        match git.run(&["rev-parse", "--git-dir"]) {
            Ok(_) => Ok(git),
            Err(GitError::Command { .. }) => Err(GitError::RepoNotFound(path.to_path_buf())),
            Err(e) => Err(e),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-C").arg(&self.root).args(PINNED_CONFIG);
        cmd.env("GIT_CONFIG_NOSYSTEM", "1")
            .env("LC_ALL", "C")
            .env_remove("GIT_DIR")
            .env_remove("GIT_WORK_TREE");
        cmd
    }

    /// Runs a command and returns its stdout.
    pub fn run(&self, args: &[&str]) -> Result<Vec<u8>, GitError> {
        log::trace!("git {}", args.join(" "));
        let out = self.command().args(args).stdin(Stdio::null()).output()?;
        if !out.status.success() {
            return Err(GitError::Command {
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(out.stdout)
    }

    pub fn run_text(&self, args: &[&str]) -> Result<String, GitError> {
        self.run(args)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
    }

    /// Resolves `HEAD`, or `None` for a repository without commits.
    pub fn head(&self) -> Result<Option<String>, GitError> {
        match self.run_text(&["rev-parse", "--verify", "--quiet", "HEAD^{commit}"]) {
            Ok(s) => Ok(Some(s.trim().to_string())),
            Err(GitError::Command { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Parents of `commit`, in order.
    pub fn parents(&self, commit: &str) -> Result<Vec<String>, GitError> {
        let out = self.run_text(&["rev-list", "--parents", "-n", "1", commit, "--"])?;
        Ok(out.split_whitespace().skip(1).map(String::from).collect())
    }

    /// Starts a `cat-file --batch` process for blob lookups.
    pub fn blob_reader(&self) -> Result<BlobReader, GitError> {
        let mut child = self
            .command()
            .args(["cat-file", "--batch"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(BlobReader {
            child,
            stdin: Some(stdin),
            stdout,
        })
    }
}

/// A long-running `git cat-file --batch`.
pub struct BlobReader {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl BlobReader {
    /// Contents of `rev:path`, or `None` if no such object exists.
    pub fn read(&mut self, rev: &str, path: &str) -> Result<Option<Vec<u8>>, GitError> {
        let stdin = self.stdin.as_mut().expect("reader is open");
        writeln!(stdin, "{rev}:{path}")?;
        stdin.flush()?;
        let mut header = String::new();
        self.stdout.read_line(&mut header)?;
        let header = header.trim_end();
        if header.ends_with(" missing") || header.ends_with(" ambiguous") {
            return Ok(None);
        }
        let size: usize = header
            .rsplit(' ')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GitError::CorruptHistory {
                hash: rev.to_string(),
                detail: format!("unexpected cat-file header {header:?}"),
            })?;
        let mut body = vec![0u8; size + 1];
        self.stdout.read_exact(&mut body)?;
        body.pop();
        Ok(Some(body))
    }
}

impl Drop for BlobReader {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

/// Number of lines in a file's contents; a final line without a newline
/// still counts.
pub fn count_lines(bytes: &[u8]) -> u64 {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
    match bytes.last() {
        Some(b'\n') | None => newlines,
        Some(_) => newlines + 1,
    }
}
