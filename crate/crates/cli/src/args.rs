use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hammerflow", version, about = "Optimal valve closure against water hammer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one control schedule and report its objective.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: RequiredSource,
    },
    /// Optimize the closure schedule.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Keep the segment durations at their initial values.
        #[arg(long)]
        fixed_grid: bool,
        #[arg(long, value_name = "N")]
        max_iters: Option<usize>,
    },
    /// Compare the adjoint gradient with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Corrupt the adjoint gradient before comparing (negative control).
        #[arg(long, hide = true)]
        perturb_gradient: bool,
    },
    /// Constant closure against fixed-grid and time-scaled optimization.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "N")]
        max_iters: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "PATH", default_value = "out")]
    pub out_dir: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Override a config key, e.g. `--set M=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct Source {
    /// Control parameter file (`sigma1_1 = ...`).
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    /// Linear ramp from u_max to 0 over T.
    #[arg(long)]
    pub ramp: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RequiredSource {
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub ramp: bool,
}
