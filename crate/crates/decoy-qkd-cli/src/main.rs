//! `decoy-qkd`: decoy-state QKD campaign simulator and analyzer.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decoy_qkd_cli::commands::{
    cmd_analyze, cmd_optimize, cmd_simulate, cmd_sweep, AnalyzeOverrides,
};
use decoy_qkd_cli::config::{parse_vacuum_term, parse_variant, ConfigFile, RunConfig};
use decoy_qkd_cli::sweep::SweepVariable;
use decoy_qkd_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "decoy-qkd",
    about = "Simulate and analyze decoy-state BB84 sessions over lossy fiber",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML configuration file; defaults describe the reference 20 km system.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Protocol variant override: corrected | as-printed | single-decoy | asymptotic.
    #[arg(long)]
    variant: Option<String>,

    /// Campaign size override.
    #[arg(long)]
    sessions: Option<usize>,

    /// Suppress the summary printout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded campaign and write session records plus a summary.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Emit key-rate curves against ratio, vacuum rate, or distance.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,

        /// Swept variable: ratio | y0 | distance (defaults to config).
        #[arg(long)]
        variable: Option<String>,

        /// Range start (defaults to config).
        #[arg(long)]
        start: Option<f64>,

        /// Range stop (defaults to config).
        #[arg(long)]
        stop: Option<f64>,

        /// Number of sample points (defaults to config).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Grid-search source parameters maximizing the analytic key rate.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute security results from a stored dataset's tallies.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,

        /// Input session-record dataset (records.csv with its sidecar).
        #[arg(long)]
        input: PathBuf,

        /// Widening override: number of standard deviations.
        #[arg(long)]
        k_std: Option<f64>,

        /// Vacuum error-term override: half | as-printed.
        #[arg(long)]
        vacuum_term: Option<String>,
    },
}

fn load_config(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        file.campaign.master_seed = seed;
    }
    if let Some(sessions) = common.sessions {
        file.campaign.sessions = sessions;
    }
    if let Some(variant) = &common.variant {
        parse_variant(variant)?; // fail fast with a clear message
        file.analysis.variant = variant.clone();
        file.analysis.y0_threshold = None; // re-derive per variant
    }
    file.build()
}

fn run() -> CliResult<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let (dataset, summary) = cmd_simulate(&cfg, &common.out)?;
            if !common.quiet {
                println!("wrote {}", dataset.display());
                print!("{}", summary.render());
            }
        }
        Command::Sweep {
            common,
            variable,
            start,
            stop,
            points,
        } => {
            let cfg = load_config(&common)?;
            let variable = SweepVariable::parse(
                variable.as_deref().unwrap_or(cfg.sweep.variable.as_str()),
            )?;
            let outcome = cmd_sweep(
                &cfg,
                variable,
                start.unwrap_or(cfg.sweep.start),
                stop.unwrap_or(cfg.sweep.stop),
                points.unwrap_or(cfg.sweep.points),
                &common.out,
            )?;
            if !common.quiet {
                println!("wrote {}", outcome.curve_path.display());
                for (variant, x) in &outcome.crossings {
                    println!("zero-rate crossing [{variant}]: {} = {x:.6e}", variable.name());
                }
            }
        }
        Command::Optimize { common } => {
            let cfg = load_config(&common)?;
            let (path, report) = cmd_optimize(&cfg, &common.out)?;
            if !common.quiet {
                println!("wrote {}", path.display());
                let best = &report.finite_statistics;
                println!(
                    "optimum ({}): mu = {:.4}, nu = {:.4}, p_signal = {:.4}, rate = {:.1} bps",
                    report.variant, best.mu, best.nu, best.p_signal, best.key_rate_bps
                );
                let asym = &report.asymptotic;
                println!(
                    "asymptotic statistics: mu = {:.4}, nu = {:.4}, p_signal = {:.4}, rate = {:.1} bps",
                    asym.mu, asym.nu, asym.p_signal, asym.key_rate_bps
                );
            }
        }
        Command::Analyze {
            common,
            input,
            k_std,
            vacuum_term,
        } => {
            let cfg = load_config(&common)?;
            let mut overrides = AnalyzeOverrides::default();
            if let Some(k) = k_std {
                overrides.policy = Some(
                    decoy_qkd::BoundPolicy::new(k, cfg.policy.estimator)
                        .map_err(|e| CliError::validation(e.to_string()))?,
                );
            }
            let mut options = cfg.options;
            let mut touched = common.variant.is_some();
            if let Some(term) = &vacuum_term {
                options.vacuum_term = parse_vacuum_term(term)?;
                touched = true;
            }
            if touched {
                overrides.options = Some(options);
            }
            let (path, records) = cmd_analyze(&input, &cfg, &overrides, &common.out)?;
            if !common.quiet {
                println!("wrote {} ({} records)", path.display(), records.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
