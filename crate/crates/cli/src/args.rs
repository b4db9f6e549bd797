use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "obroute",
    version,
    about = "Oblivious routing via random walks"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral profile of a graph: lambda, lambda_bar, laziness and walk length k.
    Spectra {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deterministic splittable routing policy and its congestion on a demand matrix.
    RouteSplit {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        demands: DemandArgs,
        /// Seed, used only by randomized demand kinds and generators.
        #[arg(long)]
        seed: Option<u64>,
        /// Include the per-pair link flows in the JSON report.
        #[arg(long)]
        include_policy: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Single-path routing on random-walk paths, with the congestion audit.
    RouteUnsplit {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        demands: DemandArgs,
        #[arg(long)]
        seed: u64,
        /// Constant of the audit bound C (d_max ln^2 n + k ln n).
        #[arg(long, default_value_t = obroute::unsplittable::DEFAULT_AUDIT_CONSTANT)]
        constant: f64,
        /// Include the chosen path of every pair in the JSON report.
        #[arg(long)]
        include_paths: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Packet routing of a permutation along two-leg random-walk paths.
    Valiant {
        #[command(flatten)]
        graph: GraphArgs,
        /// Permutation file: targets separated by whitespace or commas, or a JSON array.
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        permutation: Option<PathBuf>,
        /// Route random permutations drawn from the seed.
        #[arg(long)]
        random: bool,
        /// Number of random permutations (with --random).
        #[arg(long, default_value_t = 1, requires = "random")]
        runs: usize,
        #[arg(long)]
        seed: u64,
        /// Each link carries one packet per direction per round.
        #[arg(long)]
        per_direction: bool,
        /// Record the per-round moves (CSV format emits the trace).
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Statistical invariant suites; exits 1 when a check fails.
    Verify {
        /// Suite name.
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = obroute::verify::DEFAULT_TRIALS)]
        trials: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct GraphArgs {
    /// Edge-list file (`u v capacity` per line) or JSON {n, edges}.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Generator spec: hypercube:D, complete:N, cycle:N, grid:A,B, random_regular:N,D[,SEED].
    #[arg(long)]
    pub generate: Option<String>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct DemandArgs {
    /// Demand matrix file: CSV rows or a JSON array of rows.
    #[arg(long)]
    pub demands: Option<PathBuf>,
    /// Built-in demand: adjacency, zero, uniform:VOLUME, random:DENSITY, permutation, canonical.
    #[arg(long)]
    pub demand_kind: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}
