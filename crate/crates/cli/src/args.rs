use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "furn", version, about = "Generalized Polya urns with feedback")]
pub struct Cli {
    /// TOML file with default values; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: ./out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for replica-level parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct UrnArgs {
    /// Feedback expression in k, one per agent (repeatable). A single
    /// expression is used for every agent.
    #[arg(long = "feedback")]
    pub feedback: Vec<String>,
    /// Number of agents when a single feedback is repeated.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Initial counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<u64>>,
    /// Initial shares, comma separated; fractions such as 6/14 are accepted.
    #[arg(long, value_delimiter = ',')]
    pub shares: Option<Vec<String>>,
    /// Initial market size used with --shares.
    #[arg(long = "N")]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the direct chain and write the trajectory.
    Simulate {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long)]
        steps: Option<u64>,
        /// Also write the binary trajectory format.
        #[arg(long)]
        binary: bool,
    },
    /// Run the exponential embedding and write its jump chain.
    Embed {
        #[command(flatten)]
        urn: UrnArgs,
        #[arg(long)]
        steps: Option<u64>,
        /// Time horizon of the birth processes.
        #[arg(long = "t-max")]
        t_max: Option<f64>,
    },
    /// Regime, domain, limit-share and monopoly-bound report.
    Analyze {
        #[command(flatten)]
        urn: UrnArgs,
    },
    /// Scaling limits of the share process.
    Scaling {
        #[arg(value_enum)]
        mode: ScalingMode,
        #[command(flatten)]
        urn: UrnArgs,
        /// Time horizon.
        #[arg(short = 'T', long = "T")]
        t: Option<f64>,
        /// Integration step.
        #[arg(long)]
        h: Option<f64>,
        /// Time-scale exponent for `beta`.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Run a registered experiment, or `all`.
    Experiment {
        name: String,
        /// Parameter override `key=value` (repeatable).
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingMode {
    Ode,
    Fclt,
    Qvar,
    Beta,
    Fixed,
}
