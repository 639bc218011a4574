// SPDX-License-Identifier: Apache-2.0

//! Algorithmic core of the just-in-time defect prediction pipeline.
//!
//! Everything here is pure computation over in-memory values and only needs
//! `alloc`: change metrics over a mined history, the meta-change aware SZZ
//! tracing loop (driven through the [`szz::LineHistory`] trait), dataset
//! cleaning/encoding/splitting, the three fusion models with their training
//! loop, and the evaluation metrics. Repository access, file formats and the
//! command line live in the `jitdp` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod commit;
pub mod dataset;
pub mod diff;
pub mod eval;
pub mod fusion;
pub mod metrics;
pub mod szz;

mod math;

pub use commit::{ChangeKind, CommitRecord, FileChange, SourceFilter};
pub use metrics::{ChangeMetrics, FixPattern, HistoryIndex};
