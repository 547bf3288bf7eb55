//! `report.json` (deterministic) and `timing.json` (wall clock).

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::io::write_json;
use crate::HarnessError;

/// PASS/FAIL line tied to one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: &str, name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { id: id.into(), name: name.into(), pass, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub study: &'static str,
    pub summary: Value,
    pub verdicts: Vec<Verdict>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl StudyOutcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }
}

/// Named stage durations, kept out of `report.json` so that file stays
/// reproducible.
pub struct Timer {
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Default for Timer {
    fn default() -> Self {
        Self::new()
    }
}

impl Timer {
    pub fn new() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, stages: Vec::new() }
    }

    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push((name.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    pub fn total(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn write(&self, out: &Path, study: &str, threads: usize) -> Result<(), HarnessError> {
        let stages: Vec<Value> = self.stages.iter().map(|(n, s)| json!({ "stage": n, "seconds": s })).collect();
        write_json(
            &out.join("timing.json"),
            &json!({ "study": study, "threads": threads, "wall_seconds": self.total(), "stages": stages }),
        )
    }
}

pub fn write_report(out: &Path, cfg: Option<&ScenarioConfig>, outcome: &StudyOutcome) -> Result<(), HarnessError> {
    let report = json!({
        "study": outcome.study,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.map(|c| c.to_toml()),
        "summary": outcome.summary,
        "verdicts": outcome.verdicts,
        "artifacts": outcome.artifacts,
    });
    write_json(&out.join("report.json"), &report)
}
