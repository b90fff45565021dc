//! Command-line front end.

pub mod commands;
pub mod gen;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::io::ReductionMode;
use crate::netmat::NetworkMode;
use commands::{CliError, GenKind, ReduceOptions};
use gen::RandomShape;

#[derive(Parser, Debug)]
#[command(name = "lpfold", version, about = "Symmetry folding for LP and MILP instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Lp,
    LpReflect,
    Milp,
}

impl From<ModeArg> for ReductionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Lp => ReductionMode::Lp,
            ModeArg::LpReflect => ReductionMode::LpReflect,
            ModeArg::Milp => ReductionMode::Milp,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NetworkArg {
    /// Network matrices
    Rows,
    /// Transposed network matrices
    Cols,
}

impl From<NetworkArg> for NetworkMode {
    fn from(n: NetworkArg) -> Self {
        match n {
            NetworkArg::Rows => NetworkMode::Network,
            NetworkArg::Cols => NetworkMode::TransposedNetwork,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenKindArg {
    Gap,
    #[value(alias = "paper-example")]
    ReflectionExample,
    DupRandom,
    ReflectRandom,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reduce an MPS instance and write the reduced instance plus a postsolve archive
    Reduce {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "lp-reflect")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "rows")]
        network: NetworkArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        map: PathBuf,
    },
    /// Map a reduced solution back to the original instance
    Postsolve {
        solution: PathBuf,
        archive: PathBuf,
        original: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a reduction by sampling vertices on both sides
    Verify {
        original: PathBuf,
        reduced: PathBuf,
        archive: PathBuf,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate an instance with planted symmetry and a `.truth` sidecar
    Gen {
        kind: GenKindArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 5)]
        dups: usize,
        #[arg(long, default_value_t = 2)]
        flips: usize,
        #[arg(long, default_value_t = 0)]
        per_col: usize,
        #[arg(long, default_value_t = 0)]
        row_dups: usize,
        #[arg(long)]
        knapsacks: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        cap: Option<Vec<i64>>,
        #[arg(long)]
        items: Option<String>,
    },
    /// Print instance dimensions
    Stats { input: PathBuf },
}

fn seed_override(seed: u64) -> u64 {
    std::env::var("LPFOLD_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(seed)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reduce { input, mode, network, out, map } => {
            let opts = ReduceOptions { mode: mode.into(), network: network.into() };
            commands::cmd_reduce(&input, opts, &out, &map).map(|_| ())
        }
        Command::Postsolve { solution, archive, original, out } => {
            commands::cmd_postsolve(&solution, &archive, &original, &out)
        }
        Command::Verify { original, reduced, archive, samples, seed } => {
            commands::cmd_verify(&original, &reduced, &archive, samples, seed_override(seed)).map(|_| ())
        }
        Command::Gen { kind, out, seed, rows, cols, dups, flips, per_col, row_dups, knapsacks, cap, items } => {
            let shape = RandomShape { rows, cols, dups, flips, per_col, row_dups };
            let kind = match kind {
                GenKindArg::Gap => GenKind::Gap { knapsacks, caps: cap, items },
                GenKindArg::ReflectionExample => GenKind::ReflectionExample,
                GenKindArg::DupRandom => GenKind::DupRandom(shape),
                GenKindArg::ReflectRandom => GenKind::ReflectRandom(shape),
            };
            commands::cmd_gen(&kind, seed_override(seed), &out).map(|_| ())
        }
        Command::Stats { input } => commands::cmd_stats(&input),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_parse() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["lpfold", "reduce", "a.mps", "--mode", "milp", "--network", "cols", "--out", "b.mps", "--map", "m"])
            .unwrap();
        assert!(matches!(cli.command, Command::Reduce { mode: ModeArg::Milp, network: NetworkArg::Cols, .. }));
        let cli = Cli::try_parse_from([
            "lpfold", "gen", "gap", "--knapsacks", "2", "--items", "2x(a=2,c=3);1x(a=1,c=1)", "--cap", "3,2", "--out", "g.mps",
        ])
        .unwrap();
        let Command::Gen { cap, .. } = cli.command else { panic!("expected gen") };
        assert_eq!(cap, Some(vec![3, 2]));
    }
}
