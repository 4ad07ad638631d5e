use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use esdelay::feasibility::Method;
use esdelay::Variant;
use esdelay_cli::commands::{self, Globals, Target};

#[derive(Parser)]
#[command(name = "esdelay", version, about = "Extremum seeking under bounded time-varying delays")]
struct Cli {
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replaces every delay seed in the experiment.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Also write an SVG plot of the error.
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    quiet: bool,
    /// Shorter figure horizons; skip the D_M = 50 simulation rows.
    #[arg(long, global = true)]
    fast: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectory.csv.
    Simulate,
    /// Print the remainder bounds and the bound chain with condition margins.
    Bounds,
    /// Largest epsilon from the stability conditions or from simulation.
    Search {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum)]
        variant: VariantArg,
    },
    /// Rebuild a table, a figure, or the window identities.
    Reproduce {
        #[arg(long, value_enum)]
        target: TargetArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Theorem,
    Simulation,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Unbiased,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Table1,
    Table2,
    Fig2,
    Fig3,
    Identities,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let g = Globals { config: cli.config, out: cli.out, seed_override: cli.seed_override, plot: cli.plot, quiet: cli.quiet, fast: cli.fast };
    let result = match cli.command {
        Command::Simulate => commands::simulate(&g),
        Command::Bounds => commands::bounds(&g),
        Command::Search { method, variant } => {
            let method = match method {
                MethodArg::Theorem => Method::Theorem,
                MethodArg::Simulation => Method::Simulation,
            };
            let variant = match variant {
                VariantArg::Unbiased => Variant::Unbiased,
                VariantArg::Classical => Variant::Classical,
            };
            commands::search(&g, method, variant)
        }
        Command::Reproduce { target } => commands::reproduce(
            &g,
            match target {
                TargetArg::Table1 => Target::Table1,
                TargetArg::Table2 => Target::Table2,
                TargetArg::Fig2 => Target::Fig2,
                TargetArg::Fig3 => Target::Fig3,
                TargetArg::Identities => Target::Identities,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esdelay: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
