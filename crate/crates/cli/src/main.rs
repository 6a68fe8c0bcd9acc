use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hystchain_cli::{config, execute, execute_figure, CliError};

#[derive(Parser, Debug)]
#[command(name = "hystchain", version, about = "Driven oscillator chains with hysteretic damping")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config entry, e.g. `--set params.damping=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base seed for stochastic runs and wave packets.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run the bundled config set for a figure instead of a subcommand.
    #[arg(long, global = true, conflicts_with = "config")]
    figure: Option<u32>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate once from rest and write the trajectory.
    Single,
    /// Sweep the drive amplitude at one frequency.
    Sweep,
    /// Threshold amplitude over a frequency grid, with a line fit.
    FcrCurve,
    /// Spread of a random central packet.
    Wavepacket,
    /// Impulsive kick at the driven end.
    Breather,
    /// Noisy-drive ensemble with transmission probability.
    Ensemble,
    /// Per-realization threshold amplitudes and their distribution.
    FcrDist,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Single => "single",
            Command::Sweep => "sweep",
            Command::FcrCurve => "fcr-curve",
            Command::Wavepacket => "wavepacket",
            Command::Breather => "breather",
            Command::Ensemble => "ensemble",
            Command::FcrDist => "fcr-dist",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let overrides = cli
        .overrides
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(figure) = cli.figure {
        if cli.command.is_some() {
            return Err(CliError::Validation("--figure replaces the subcommand".into()));
        }
        let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("out/figure{figure:02}")));
        execute_figure(figure, &overrides, cli.seed, &out, |line| eprintln!("{line}"))?;
        eprintln!("outputs in {}", out.display());
        return Ok(());
    }

    let command = cli
        .command
        .ok_or_else(|| CliError::Validation("a subcommand or --figure is required".into()))?;
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?,
        None => String::new(),
    };
    let (spec, warnings) = config::parse_config(&text, Some(command.kind()), &overrides, cli.seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("out/{}", command.kind())));
    let (_, summary) = execute(&spec, &warnings, &out)?;
    println!("{summary}");
    eprintln!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
