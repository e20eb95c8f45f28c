//! Command-line driver: `run` evaluates a sweep and writes CSV (or the
//! discrepancy report for `--sweep validate`); `report` summarizes a CSV.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lisbound_cli::{report_summary, run_sweep, PhaseMode, SweepKind, SweepSpec};
use lisbound_core::{FimSource, Scenario};

#[derive(Parser)]
#[command(
    name = "lisbound",
    about = "Error-bound sweeps for surface-aided mmWave positioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per grid point and variant.
    Run(RunArgs),
    /// Print a text summary of a sweep CSV.
    Report {
        /// CSV file produced by `run`.
        csv: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML; missing keys take the built-in reference constants.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Sweep axis.
    #[arg(long, value_enum, default_value = "snr")]
    sweep: SweepKindArg,
    /// Grid as `a:b:step` or a comma-separated list. Defaults to the SNR
    /// axis -20:20:2.5 (for `nl`, pass element counts).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Phase profile for the surface.
    #[arg(long, value_enum, default_value = "incremental")]
    phase: PhaseArg,
    /// Surface element count for snr/phase sweeps (default: scenario value).
    #[arg(long)]
    nl: Option<usize>,
    /// Fixed SNR in dB for element-count sweeps.
    #[arg(long, default_value_t = 5.0)]
    snr_db: f64,
    /// Random profiles per grid point (median reported).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// RNG seed for the precoder and the random profiles.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Information engine.
    #[arg(long, value_enum, default_value = "numeric")]
    fim: FimArg,
    /// Add the scatterer-benchmark comparison rows.
    #[arg(long, default_value_t = false)]
    benchmark: bool,
    /// Output file (CSV, or report text for `--sweep validate`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKindArg {
    Snr,
    Nl,
    Phase,
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Incremental,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum FimArg {
    Closed,
    Numeric,
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("grid range must be a:b:step, got '{text}'");
        }
        let a: f64 = parts[0].parse().context("grid start")?;
        let b: f64 = parts[1].parse().context("grid end")?;
        let step: f64 = parts[2].parse().context("grid step")?;
        if step <= 0.0 || b < a {
            bail!("grid range needs a <= b and step > 0");
        }
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let v = a + step * k as f64;
            if v > b + step * 1e-9 {
                break;
            }
            grid.push(v);
            k += 1;
        }
        Ok(grid)
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<f64>().context("grid value"))
            .collect()
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::Report { csv } => {
            let summary = report_summary(&csv)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(path) => Scenario::from_path(path)
            .with_context(|| format!("loading scenario {}", path.display()))?,
        None => Scenario::reference(),
    };
    let kind = match args.sweep {
        SweepKindArg::Snr => SweepKind::Snr,
        SweepKindArg::Nl => SweepKind::ElementCount,
        SweepKindArg::Phase => SweepKind::PhaseComparison,
        SweepKindArg::Validate => SweepKind::Validate,
    };
    let grid = match &args.grid {
        Some(text) => parse_grid(text)?,
        None => lisbound_cli::default_snr_grid(),
    };
    let spec = SweepSpec {
        kind,
        grid,
        phase: match args.phase {
            PhaseArg::Incremental => PhaseMode::Incremental,
            PhaseArg::Random => PhaseMode::Random,
        },
        n_l: args.nl.unwrap_or(scenario.n_l),
        snr_db: args.snr_db,
        trials: args.trials,
        seed: args.seed,
        fim_source: match args.fim {
            FimArg::Closed => FimSource::ClosedForm,
            FimArg::Numeric => FimSource::Numeric,
        },
        benchmark: args.benchmark,
    };
    let outcome = run_sweep(&scenario, &spec, &args.out)?;
    if let Some(report) = &outcome.validation {
        let summaries = report.summaries();
        eprintln!(
            "validated {} entries over {} scenarios: {} mismatched entries",
            report.entries_checked,
            report.scenarios,
            summaries.len()
        );
        for s in &summaries {
            eprintln!("  {s}");
        }
        if !report.all_stable() {
            bail!("closed-form vs oracle mismatch is not a stable algebra difference");
        }
    } else {
        eprintln!(
            "wrote {} rows to {}",
            outcome.rows.len(),
            args.out.display()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_parse_grid_range() {
        let g = parse_grid("-20:20:2.5").unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], -20.0);
        assert_eq!(*g.last().unwrap(), 20.0);
    }

    #[test]
    fn test_parse_grid_list_and_single() {
        assert_eq!(
            parse_grid("10,20,40,80,130").unwrap(),
            vec![10.0, 20.0, 40.0, 80.0, 130.0]
        );
        assert_eq!(parse_grid("5").unwrap(), vec![5.0]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
