use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use ptinterp::{run, summary, write_outputs, Command, FrozenConstants, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ptinterp", version, about = "Verification experiments for space-time interpolation operators")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; omitted keys take the command defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `out/<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Re-measure the frozen regression constants and rewrite the constants file.
    #[arg(long)]
    freeze: bool,
    /// Corrupt one operator or metric; the run must then fail.
    #[arg(long)]
    inject_fault: bool,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(cli.command, p)?,
        None => RunConfig::defaults(cli.command),
    };
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.inject_fault {
        cfg.inject_fault = true;
    }
    cfg.validate()?;
    let mut frozen = FrozenConstants::embedded();
    let report = run(&cfg, &mut frozen, cli.freeze)?;
    if cli.freeze {
        frozen.save()?;
        eprintln!("froze constants into {}", FrozenConstants::path().display());
    }
    let dir = cfg.out_dir();
    write_outputs(&report, &dir)?;
    print!("{}", summary(&report));
    println!("{} -> {}", if report.passed() { "passed" } else { "FAILED" }, dir.display());
    Ok(report.passed())
}
