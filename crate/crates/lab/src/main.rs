use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manelab::config::Format;
use manelab::{run, Command, Options};

#[derive(Parser)]
#[command(name = "manelab", version, about = "Reproducible experiments on parabolic counterexample systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON scenario file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent experiments and monodromy columns.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Geometric scales "eps_hi:eps_lo:count", overriding geometry.scales.
    #[arg(long, global = true)]
    scales: Option<String>,
    /// Write only this format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Spectral gap and the two-site linearization parity check.
    GapCheck,
    /// Monodromy against the predicted shift, and the decay certificate.
    Floquet,
    /// Covering, box-counting and doubling estimates on a point cloud.
    Dimension,
    /// Trajectory pair and log-Lipschitz modulus.
    Simulate,
    /// All experiments.
    Report,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Cmd::GapCheck => Command::GapCheck,
        Cmd::Floquet => Command::Floquet,
        Cmd::Dimension => Command::Dimension,
        Cmd::Simulate => Command::Simulate,
        Cmd::Report => Command::Report,
    };
    let opts = Options {
        config: cli.config,
        out: cli.out,
        threads: cli.threads,
        scales: cli.scales,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    };
    match run(cmd, &opts) {
        Ok(report) => {
            print!("{}", report.table());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
