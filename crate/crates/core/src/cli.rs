//! Command-line surface. Data goes to standard output or the run directory;
//! progress goes to standard error unless `--quiet` is given.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::output;
use crate::pipeline::{self, RobustOptimum};
use crate::stochastic::{draw_samples, evaluate_samples, DesignPoint, StochasticResponse};

/// Environment variable consulted for a seed when `--seed` is absent.
pub const SEED_ENV: &str = "LAMOPT_SEED";

#[derive(Debug, Parser)]
#[command(name = "lamopt", version, about = "Robust design of a laminated composite plate under input uncertainty")]
pub struct Cli {
    /// Run configuration (TOML), or `default` for the built-in case study.
    #[arg(long, global = true, default_value = "default")]
    pub config: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppresses progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-ply stresses at one design point.
    Evaluate {
        /// Comma-separated vf,t1,t2,t3,t4,load; defaults to the nominal design.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        design: Option<Vec<f64>>,
        /// Print an aligned table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Monte-Carlo statistics of max |σ6| at one design point.
    Propagate {
        /// Comma-separated vf,t1,t2,t3,t4,load; defaults to the nominal design.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        design: Option<Vec<f64>>,
        /// Sample count; defaults to `uq.samples_report`.
        #[arg(long)]
        samples: Option<usize>,
        /// Also write samples.csv to the output directory.
        #[arg(long)]
        write_samples: bool,
    },
    /// Surrogate-based Sobol indices at the nominal design.
    Sensitivity,
    /// Full robust optimization study.
    Optimize,
    /// Re-selects the robust optimum from an existing archive.
    Report {
        /// Archive to read; defaults to `<out>/archive.csv`.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Overrides `ga.rsd_limit`.
        #[arg(long)]
        rsd_limit: Option<f64>,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = load_config(&cli.config)?;
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(SEED_ENV, format!("`{v}` is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    if let Some(seed) = cli.seed.or(env_seed) {
        config.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.output.directory = out.to_string_lossy().into_owned();
    }
    config.validate()?;
    Ok(config)
}

fn design_or_nominal(config: &RunConfig, design: &Option<Vec<f64>>) -> Result<DesignPoint> {
    match design {
        Some(values) => DesignPoint::from_slice(values),
        None => Ok(config.input_set()?.nominal()),
    }
}

fn print_json<T: Serialize>(stdout: &mut dyn Write, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(stdout, "{body}").map_err(|e| Error::io("<stdout>", e))
}

#[derive(Serialize)]
struct PropagateSummary<'a> {
    design: &'a DesignPoint,
    seed: u64,
    response: StochasticResponse,
}

#[derive(Serialize)]
struct ReportOutput {
    archive: String,
    rsd_limit: f64,
    status: &'static str,
    optimum: Option<RobustOptimum>,
}

fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let config = resolve_config(cli)?;
    let dir = PathBuf::from(&config.output.directory);
    let started = output::unix_ms();
    match &cli.command {
        Command::Evaluate { design, table } => {
            let design = design_or_nominal(&config, design)?;
            let report = config.plate_model().evaluate(&design)?;
            if *table {
                write!(stdout, "{}", report.to_table()).map_err(|e| Error::io("<stdout>", e))
            } else {
                print_json(stdout, &report)
            }
        }
        Command::Propagate {
            design,
            samples,
            write_samples,
        } => {
            let inputs = config.input_set()?;
            let design = design_or_nominal(&config, design)?;
            let k = samples.unwrap_or(config.uq.samples_report);
            let matrix = draw_samples(&inputs, &design, k, config.uq.seed)?;
            let values = evaluate_samples(&config.plate_model(), &matrix)?;
            let response = StochasticResponse::from_values(&values, matrix.clamp_count)?;
            if *write_samples {
                output::prepare_dir(&dir, config.output.overwrite)?;
                let path = dir.join("samples.csv");
                output::write_file(&path, &output::samples_csv(&matrix, &values))?;
                output::write_manifest(&dir, "propagate", &config, started, &[path])?;
            }
            print_json(
                stdout,
                &PropagateSummary {
                    design: &design,
                    seed: config.uq.seed,
                    response,
                },
            )
        }
        Command::Sensitivity => {
            if !cli.quiet {
                eprintln!("sensitivity: fitting degree-{} surrogate", config.pce.degree);
            }
            let (pce, report) = pipeline::nominal_sensitivity(&config)?;
            output::prepare_dir(&dir, config.output.overwrite)?;
            let files = pipeline::write_sensitivity(&dir, &report)?;
            output::write_manifest(&dir, "sensitivity", &config, started, &files)?;
            print_json(stdout, &pipeline::SensitivitySummary::new(&pce, report))
        }
        Command::Optimize => {
            let result = pipeline::run_study(&config, &dir, cli.quiet)?;
            if !cli.quiet {
                eprintln!("done in {:.1} s; outputs in {}", result.wall_seconds, dir.display());
            }
            print_json(stdout, &result.summary())
        }
        Command::Report { archive, rsd_limit } => {
            let path = archive.clone().unwrap_or_else(|| dir.join("archive.csv"));
            let limit = rsd_limit.unwrap_or(config.ga.rsd_limit);
            let optimum = pipeline::report_from_archive(Path::new(&path), &config.input_set()?, limit)?;
            print_json(
                stdout,
                &ReportOutput {
                    archive: path.display().to_string(),
                    rsd_limit: limit,
                    status: if optimum.is_some() { "ok" } else { "no feasible design" },
                    optimum,
                },
            )
        }
    }
}
