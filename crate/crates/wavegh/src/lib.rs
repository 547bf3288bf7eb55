//! Batch harness around `wavegh-core`: configuration, file formats, thread
//! pools and the three studies (continuity, stability, estimates) plus the
//! single-trajectory and ad-hoc GH commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod config;
pub mod io;
pub mod parallel;
pub mod report;
pub mod studies;

use config::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] wavegh_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error("thread pool: {0}")]
    Pool(String),
    /// A study failed after writing some of its rows.
    #[error("{study} stopped at step {step}: {source}")]
    Partial {
        study: &'static str,
        step: usize,
        #[source]
        source: Box<HarnessError>,
    },
}
