use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod outdir;

/// Pedestrian crowd experiments with social groups.
#[derive(Parser, Debug)]
#[command(name = "groupflow", version, about)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Configuration file (TOML). Defaults depend on the command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured replica count.
    #[arg(long)]
    pub replicas: Option<u32>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Run one scenario and write its metrics and trajectory.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Grid search over (delta, kappa_c) on the calibration corridor.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Fundamental-diagram campaign on the periodic corridor.
    Fd {
        #[command(flatten)]
        common: Common,
        /// Target density in p/m²; repeat for several.
        #[arg(long = "density")]
        densities: Vec<f64>,
        /// Fraction of agents in dyads; repeat for several.
        #[arg(long = "dyads")]
        dyads: Vec<f64>,
    },
    /// Outflow campaign on the bottleneck room.
    Bottleneck {
        #[command(flatten)]
        common: Common,
        /// Opening width in meters; repeat for several.
        #[arg(long = "width")]
        widths: Vec<f64>,
        /// Fraction of agents in dyads, compared against a singles-only run.
        #[arg(long = "dyads")]
        dyads: Vec<f64>,
    },
    /// Recompute the metrics of a directory written by `run`.
    Analyze {
        /// Directory holding manifest.toml, frames.csv, trajectory.csv and exits.csv.
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn init_pool() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GROUPFLOW_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            anyhow::anyhow!("GROUPFLOW_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause
            .downcast_ref::<groupflow::config::ConfigError>()
            .is_some()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<groupflow::Error>() {
            return match e {
                groupflow::Error::Invariant { .. } => 3,
                groupflow::Error::InvalidConfig(_)
                | groupflow::Error::InvalidGeometry(_)
                | groupflow::Error::OverCapacity { .. }
                | groupflow::Error::SpawnOverflow { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_pool().and_then(|_| match cli.verb {
        Verb::Run { common } => commands::run(&common),
        Verb::Sweep { common } => commands::sweep(&common),
        Verb::Fd {
            common,
            densities,
            dyads,
        } => commands::fd(&common, &densities, &dyads),
        Verb::Bottleneck {
            common,
            widths,
            dyads,
        } => commands::bottleneck(&common, &widths, &dyads),
        Verb::Analyze { record, out, force } => commands::analyze(&record, &out, force),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
