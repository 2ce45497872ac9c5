//! The five experiments. Each returns a report whose checks decide the exit status.

use std::time::Instant;

use anyhow::Result;
use ptinterp_core::oracles::ExperimentReport;

use crate::config::{Command, RunConfig};
use crate::frozen::FrozenConstants;

pub mod commute;
pub mod converge;
pub mod counterexample;
pub mod localize;
pub mod poincare;

/// Runs `cfg.command`. With `freeze` the regression constants the command
/// depends on are re-measured and stored in `frozen` before checking.
pub fn run(cfg: &RunConfig, frozen: &mut FrozenConstants, freeze: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rep = match cfg.command {
        Command::Commute => commute::run(cfg, frozen, freeze)?,
        Command::Poincare => poincare::run(cfg, frozen, freeze)?,
        Command::Converge => converge::run(cfg, frozen, freeze)?,
        Command::Counterexample => counterexample::run(cfg, frozen, freeze)?,
        Command::Localize => localize::run(cfg, frozen, freeze)?,
    };
    rep.seed = cfg.seed;
    rep.config_digest = cfg.digest();
    if cfg.inject_fault {
        rep.notes.push("fault injection enabled".into());
    }
    Ok(rep)
}

/// Phase timings, written to stderr so reports stay reproducible.
pub(crate) struct Tracker {
    start: Instant,
}

impl Default for Tracker {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Tracker {
    pub(crate) fn lap(&mut self, what: &str) {
        eprintln!("[{:>8.2}s] {what}", self.start.elapsed().as_secs_f64());
    }
}

pub(crate) fn finish_row(
    rep: &mut ExperimentReport,
    diagram: usize,
    k: usize,
    l: usize,
    value: f64,
    h_t: f64,
    h_x: f64,
) -> Result<()> {
    let level = rep.rows.len();
    rep.push_row(level, h_t, h_x, vec![diagram as f64, k as f64, l as f64, value])?;
    Ok(())
}
