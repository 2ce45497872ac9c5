//! Run configuration: a JSON document laid over per-command defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Commute,
    Poincare,
    Converge,
    Counterexample,
    Localize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Commute => "commute",
            Command::Poincare => "poincare",
            Command::Converge => "converge",
            Command::Counterexample => "counterexample",
            Command::Localize => "localize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// `I_t (x) I_x`
    Tensor,
    /// `I_t' (x) I_x` with the L2-stable time interpolant
    Prime,
    /// Vertex-based bilinear operator applied on the conforming mesh
    Irregular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solution {
    #[serde(rename = "heat-mode-1")]
    HeatMode1,
    #[serde(rename = "heat-mode-3")]
    HeatMode3,
    SeparablePoly,
    RoughInTime,
}

/// Effective configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub t_end: f64,
    pub length: f64,
    /// Space cells on the coarsest level.
    pub base_n: usize,
    pub levels: usize,
    /// `h_t ~ h_x^alpha`
    pub alpha: f64,
    pub k: usize,
    pub l: usize,
    pub operator: Operator,
    pub solution: Solution,
    pub seed: u64,
    /// Random fields per suite.
    pub samples: usize,
    /// Random pairs for the `I_Lambda` diagram.
    pub pair_samples: usize,
    /// Refinement factor of oracle representations.
    pub oracle_refine: usize,
    /// Every `period`-th time slab is refined on slab-refined meshes.
    pub period: usize,
    pub out: Option<PathBuf>,
    /// Corrupts one operator or metric; the run must then fail.
    pub inject_fault: bool,
}

/// Document fields; every key is optional and unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub command: Option<Command>,
    pub t_end: Option<f64>,
    pub length: Option<f64>,
    pub base_n: Option<usize>,
    pub levels: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub operator: Option<Operator>,
    pub solution: Option<Solution>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub pair_samples: Option<usize>,
    pub oracle_refine: Option<usize>,
    pub period: Option<usize>,
    pub out: Option<PathBuf>,
    pub inject_fault: Option<bool>,
}

/// Coarsest space resolution of the convergence study for each scaling,
/// keeping the finest time mesh at about a thousand steps.
pub fn converge_base(alpha: f64) -> usize {
    if alpha >= 2.0 {
        4
    } else if alpha >= 1.5 {
        8
    } else {
        16
    }
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let (base_n, levels, alpha, samples, oracle_refine) = match command {
            Command::Commute => (4, 1, 1.0, 100, 2),
            Command::Poincare => (1, 1, 1.0, 500, 1),
            Command::Converge => (16, 4, 1.0, 1, 2),
            Command::Counterexample => (4, 4, 2.0, 1, 2),
            Command::Localize => (8, 4, 1.0, 20, 1),
        };
        Self {
            command,
            t_end: 1.0,
            length: 1.0,
            base_n,
            levels,
            alpha,
            k: 1,
            l: 1,
            operator: Operator::Tensor,
            solution: Solution::HeatMode1,
            seed: 0,
            samples,
            pair_samples: 50,
            oracle_refine,
            period: 4,
            out: None,
            inject_fault: false,
        }
    }

    pub fn from_document(command: Command, doc: ConfigDocument) -> Result<Self> {
        if let Some(c) = doc.command {
            if c != command {
                bail!("config is for `{}` but `{}` was requested", c.name(), command.name());
            }
        }
        let mut c = Self::defaults(command);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = doc.$f { c.$f = v; } )* };
        }
        take!(t_end, length, base_n, levels, alpha, k, l, operator, solution, seed, samples, pair_samples, oracle_refine, period, inject_fault);
        if doc.out.is_some() {
            c.out = doc.out;
        }
        if command == Command::Converge && doc.base_n.is_none() {
            c.base_n = converge_base(c.alpha);
        }
        Ok(c)
    }

    pub fn parse(command: Command, text: &str) -> Result<Self> {
        let doc: ConfigDocument = serde_json::from_str(text).context("invalid config document")?;
        Self::from_document(command, doc)
    }

    pub fn load(command: Command, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(command, &text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || !(self.length > 0.0 && self.length.is_finite()) {
            bail!("t_end and length must be positive");
        }
        if ![1.0, 1.5, 2.0].contains(&self.alpha) {
            bail!("alpha must be one of 1, 1.5, 2 (got {})", self.alpha);
        }
        if self.k == 0 || self.l == 0 || self.k > 4 || self.l > 4 {
            bail!("degrees must satisfy 1 <= k, l <= 4");
        }
        if self.base_n == 0 || self.levels == 0 || self.samples == 0 || self.oracle_refine == 0 {
            bail!("base_n, levels, samples and oracle_refine must be positive");
        }
        if self.period < 2 {
            bail!("period must be at least 2");
        }
        if self.operator == Operator::Irregular && (self.k, self.l) != (1, 1) {
            bail!("the irregular operator supports k = l = 1 only");
        }
        match self.command {
            Command::Converge | Command::Counterexample | Command::Localize if self.levels < 3 => {
                bail!("rate fits need at least 3 levels");
            }
            Command::Commute if self.pair_samples == 0 => bail!("pair_samples must be positive"),
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(self.command.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(Command::Converge, r#"{"levls": 3}"#).is_err());
        assert!(RunConfig::parse(Command::Converge, r#"{"levels": 5}"#).is_ok());
    }

    #[test]
    fn converge_base_follows_alpha() {
        assert_eq!(RunConfig::parse(Command::Converge, r#"{"alpha": 2}"#).unwrap().base_n, 4);
        assert_eq!(RunConfig::parse(Command::Converge, r#"{"alpha": 2, "base_n": 6}"#).unwrap().base_n, 6);
    }

    #[test]
    fn solution_names() {
        let c = RunConfig::parse(Command::Converge, r#"{"solution": "heat-mode-3"}"#).unwrap();
        assert_eq!(c.solution, Solution::HeatMode3);
        assert!(RunConfig::parse(Command::Converge, r#"{"solution": "heat-mode3"}"#).is_err());
    }

    #[test]
    fn command_mismatch_is_rejected() {
        assert!(RunConfig::parse(Command::Converge, r#"{"command": "poincare"}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::defaults(Command::Converge);
        assert!(c.validate().is_ok());
        c.alpha = 3.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::defaults(Command::Converge);
        c.operator = Operator::Irregular;
        c.k = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_ignores_output_directory() {
        let a = RunConfig::defaults(Command::Localize);
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
