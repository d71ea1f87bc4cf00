//! Front end for the `spde-moments` library: config files, run manifests,
//! CSV and SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

use clap::{Parser, Subcommand};
use config::{tokenize, ExperimentConfig};
use error::{CliError, CliResult};
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

pub const COLOR_ENV: &str = "SPDE_MOMENTS_COLOR";

#[derive(Debug, Parser)]
#[command(name = "spde-moments", version, about = "Second moments of wave and heat equations with fractional noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (flat key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override a config key, e.g. `--set t=1.0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Estimate E|u(t,x)|² at the configured time(s).
    Estimate,
    /// Estimate along `t_grid` and fit the growth exponent.
    Scan,
    /// Print the derived constants.
    Constants,
    /// Estimate the cone probability γ.
    Gamma,
    /// FK along the Riesz family a → 1 against spatial white noise.
    WhiteLimit,
}

/// File values first, then `--set`, then the dedicated flags.
pub fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut pairs = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            tokenize(&text)?
        }
        None => Vec::new(),
    };
    let mut put = |k: &str, v: String| {
        pairs.retain(|p| p.1 != k);
        pairs.push((0, k.to_string(), v));
    };
    for s in &cli.set {
        let Some((k, v)) = s.split_once('=') else {
            return Err(CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")));
        };
        put(k.trim(), v.trim().to_string());
    }
    if let Some(seed) = cli.seed {
        put("seed", seed.to_string());
    }
    if let Some(o) = &cli.out {
        put("out", o.display().to_string());
    }
    Ok(ExperimentConfig::from_pairs(&pairs)?)
}

fn color_enabled() -> bool {
    match std::env::var(COLOR_ENV).as_deref() {
        Ok("always") | Ok("1") => true,
        Ok("never") | Ok("0") => false,
        _ => std::io::stderr().is_terminal(),
    }
}

pub fn report_error(e: &CliError) {
    let tag = if color_enabled() { "\x1b[31merror\x1b[0m" } else { "error" };
    eprintln!("{tag}: {e}");
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .write_style(if color_enabled() { env_logger::WriteStyle::Always } else { env_logger::WriteStyle::Never })
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| -> CliResult<()> {
        let mut stdout = std::io::stdout().lock();
        match cli.command {
            Command::Estimate => {
                let o = commands::cmd_estimate(&cfg, threads)?;
                writeln!(stdout, "{}", manifest::ESTIMATE_HEADER)?;
                for r in &o.computation.rows {
                    writeln!(stdout, "{}", r.csv_row())?;
                }
                writeln!(stdout, "# written to {}", o.dir.display())?;
            }
            Command::Scan => {
                let o = commands::cmd_scan(&cfg, threads)?;
                for f in &o.fits {
                    writeln!(stdout, "{}: fitted exponent {} (rms residual {}, {} points); reference {}", f.method, f.rho, f.residual, f.used, o.reference_rho)?;
                }
                writeln!(stdout, "# written to {}", o.dir.display())?;
            }
            Command::Constants => {
                let r = commands::cmd_constants(&cfg)?;
                write!(stdout, "{}", r.to_table())?;
                if !r.dalang.holds {
                    stdout.flush()?;
                    return Err(spde_moments::Error::Dalang(spde_moments::noise::dalang_message(r.dalang.a)).into());
                }
            }
            Command::Gamma => write!(stdout, "{}", commands::cmd_gamma(&cfg)?)?,
            Command::WhiteLimit => write!(stdout, "{}", commands::cmd_white_limit(&cfg)?.text)?,
        }
        Ok(())
    })
}
