//! Pipeline driver: each subcommand runs one stage against a run directory.
//!
//! Configuration comes from an optional `key = value` file, overridden by
//! `--set key=value` pairs and the dedicated flags below. Exit codes:
//! 0 success, 1 usage or configuration error, 2 data error, 3 internal
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use checkin_patterns::pipeline::{run_stage, RunConfig};

#[derive(Parser)]
#[command(name = "checkin-patterns", version, about)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run directory holding all stage artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Global RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override any configuration key, e.g. --set window_size=8.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic check-in corpus with planted ground truth.
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        k_true: Option<usize>,
        #[arg(long)]
        checkins_per_user: Option<usize>,
    },
    /// Parse a check-in CSV, filter users, and build the corpus.
    Ingest {
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long)]
        min_checkins: Option<usize>,
        /// Comma-separated whitelist of pattern-bearing categories.
        #[arg(long)]
        categories: Option<String>,
        /// Local-time offset in seconds.
        #[arg(long)]
        tz_offset: Option<i32>,
        #[arg(long)]
        ref_lat: Option<f64>,
        #[arg(long)]
        ref_lon: Option<f64>,
    },
    /// Score candidate pattern counts by temporal coherence.
    SelectK {
        /// Candidates as a range `3..9` or list `3,4,5`.
        #[arg(long)]
        k_candidates: Option<String>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Fit the pattern model at the configured K (0 = use select-k's pick).
    Fit {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Disable the temporal layer (plain LDA baseline).
        #[arg(long)]
        no_temporal: bool,
    },
    /// Localize each user's activity centre and radii.
    Profiles {
        #[arg(long)]
        eta: Option<f64>,
        /// Also export every user's reachability plot.
        #[arg(long)]
        export_reachability: bool,
    },
    /// Map demand, supply, and DSR layers over the city grid.
    Dsi {
        #[arg(long)]
        cell_size: Option<f64>,
    },
    /// Correlate cell DSR with user travel distances.
    Validate {
        /// `cell` (default) or `user`.
        #[arg(long)]
        correlation_level: Option<String>,
    },
    /// Bundle artifact hashes and stage timings into the run manifest.
    Report,
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Ingest { .. } => "ingest",
            Command::SelectK { .. } => "select-k",
            Command::Fit { .. } => "fit",
            Command::Profiles { .. } => "profiles",
            Command::Dsi { .. } => "dsi",
            Command::Validate { .. } => "validate",
            Command::Report => "report",
        }
    }

    fn overrides(&self, out: &mut Vec<(String, String)>) {
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        match self {
            Command::Synth {
                users,
                k_true,
                checkins_per_user,
            } => {
                push("synth_users", users.map(|v| v.to_string()));
                push("synth_k_true", k_true.map(|v| v.to_string()));
                push(
                    "synth_checkins_per_user",
                    checkins_per_user.map(|v| v.to_string()),
                );
            }
            Command::Ingest {
                input,
                min_checkins,
                categories,
                tz_offset,
                ref_lat,
                ref_lon,
            } => {
                push("input", input.as_ref().map(|p| p.display().to_string()));
                push("min_checkins", min_checkins.map(|v| v.to_string()));
                push("categories", categories.clone());
                push("tz_offset", tz_offset.map(|v| v.to_string()));
                push("ref_lat", ref_lat.map(|v| v.to_string()));
                push("ref_lon", ref_lon.map(|v| v.to_string()));
            }
            Command::SelectK {
                k_candidates,
                chains,
            } => {
                push("k_candidates", k_candidates.clone());
                push("chains", chains.map(|v| v.to_string()));
            }
            Command::Fit {
                k,
                iterations,
                no_temporal,
            } => {
                push("k", k.map(|v| v.to_string()));
                push("iterations", iterations.map(|v| v.to_string()));
                if *no_temporal {
                    out.push(("temporal_enabled".to_string(), "false".to_string()));
                }
            }
            Command::Profiles {
                eta,
                export_reachability,
            } => {
                push("eta", eta.map(|v| v.to_string()));
                if *export_reachability {
                    out.push(("export_reachability".to_string(), "true".to_string()));
                }
            }
            Command::Dsi { cell_size } => {
                push("cell_size", cell_size.map(|v| v.to_string()));
            }
            Command::Validate { correlation_level } => {
                push("correlation_level", correlation_level.clone());
            }
            Command::Report => {}
        }
    }
}

fn build_config(cli: &Cli) -> checkin_patterns::Result<RunConfig> {
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(dir) = &cli.out_dir {
        overrides.push(("out_dir".to_string(), dir.display().to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    cli.command.overrides(&mut overrides);
    for pair in &cli.sets {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(checkin_patterns::Error::config(format!(
                "--set expects KEY=VALUE, got {pair:?}"
            )));
        };
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    RunConfig::from_sources(cli.config.as_deref(), &overrides)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let stage = cli.command.stage();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_stage(&config, stage) {
        Ok(()) => {
            println!("{stage}: ok ({})", config.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
