//! Verification lab for space-time interpolation operators: run
//! configuration, the five experiments and report emission.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ptinterp_core::oracles::ExperimentReport;

pub mod commands;
pub mod config;
pub mod frozen;
pub mod solutions;

pub use commands::run;
pub use config::{Command, ConfigDocument, Operator, RunConfig, Solution};
pub use frozen::FrozenConstants;

/// Writes `report.json` and `table.csv` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    fs::write(dir.join("report.json"), json)?;
    let file = fs::File::create(dir.join("table.csv"))?;
    report.write_csv(file)?;
    Ok(())
}

/// One line per check, failures first marked.
pub fn summary(report: &ExperimentReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        s.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
    }
    s
}
