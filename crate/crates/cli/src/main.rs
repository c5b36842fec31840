use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use piggyback_core::Strategy;

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "piggyback", version, about = "Piggybacked MDS storage codes with reduced repair traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CodeArgs {
    /// Systematic nodes.
    #[arg(short = 'k')]
    k: usize,
    /// Parity nodes (also the number of instances per stripe).
    #[arg(short = 'r')]
    r: usize,
    /// Number of groups; defaults to the best equal split for `r`.
    #[arg(short = 't')]
    t: Option<usize>,
    /// Piggyback placement: baseline or even.
    #[arg(long, default_value = "even", value_parser = parse_strategy)]
    strategy: Strategy,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: piggyback_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose a grouping and report its repair bandwidth.
    Plan(CodeArgs),
    /// Encode a file into node directories.
    Encode {
        file: PathBuf,
        #[command(flatten)]
        code: CodeArgs,
        /// Cell size in bytes.
        #[arg(long, default_value_t = 4096)]
        block_size: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild one lost node directory and report the traffic it took.
    Repair {
        dir: PathBuf,
        /// Node to rebuild, numbered from 1.
        #[arg(long)]
        node: usize,
    },
    /// Check shard checksums and parity consistency.
    Verify { dir: PathBuf },
    /// Recover the original file from the surviving nodes.
    Reassemble {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare MDS, RSR, MSR and the piggyback code.
    Compare {
        #[arg(short = 'k')]
        k: usize,
        #[arg(short = 'r')]
        r: usize,
        /// Field size used for complexity counts.
        #[arg(short = 'q', default_value_t = 256)]
        q: u64,
        /// Write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep r and emit the piggyback rate against sqrt(2r - 1) / r as CSV.
    Bench {
        #[arg(long, default_value_t = 2)]
        r_min: usize,
        #[arg(long, default_value_t = 50)]
        r_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan(c) => commands::plan(c.k, c.r, c.t),
        Command::Encode { file, code, block_size, out } => {
            commands::encode(&file, &out, code.k, code.r, code.t, code.strategy, block_size)
        }
        Command::Repair { dir, node } => commands::repair(&dir, node),
        Command::Verify { dir } => commands::verify(&dir),
        Command::Reassemble { dir, out } => commands::reassemble(&dir, &out),
        Command::Compare { k, r, q, out } => commands::compare(k, r, q, out.as_deref()),
        Command::Bench { r_min, r_max, out } => commands::bench(r_min, r_max, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(commands::EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
