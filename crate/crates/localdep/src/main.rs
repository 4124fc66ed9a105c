//! The `localdep` command-line front end.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 estimator
//! precondition failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use localdep::cli::{
    cmd_bench, cmd_compute, cmd_converge, cmd_selftest, cmd_sweep, wrap_output, CliError,
    CommandKind, EstimatorKind, InputSource, OutputFormat, Params, RunConfig,
};
use localdep::report::{bench_to_csv, reports_to_csv, sweep_rows_to_csv};
use localdep::synth::{Family, FuncKind, GeneratorSpec};

#[derive(Parser)]
#[command(
    name = "localdep",
    version,
    about = "Local dependence measures: delta/eps-window residuals, rank correlation, and L2 variance decomposition",
    disable_help_subcommand = true
)]
struct TopLevel {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run estimators on a CSV file or a generated sample.
    Compute(CommonOpts),
    /// Estimate across a rho grid with replicates (vs the rho^2 reference).
    Sweep(CommonOpts),
    /// Convergence studies: zeta over an eps grid, the shrinking-window
    /// residual over an n grid, the delta pipeline over a delta grid.
    Converge(CommonOpts),
    /// Wall-clock timings per estimator per n, with the sub-quadratic check.
    Bench(CommonOpts),
    /// Quick internal consistency checks (oracle equivalence, identities).
    Selftest(OutputOpts),
}

#[derive(Args)]
struct OutputOpts {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct CommonOpts {
    /// Two-column CSV input (optional single header line).
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,
    /// Generator family: bivariate_normal|gaussian_copula|functional|independent.
    #[arg(long)]
    gen: Option<String>,
    /// Correlation parameter for the Gaussian families.
    #[arg(long)]
    rho: Option<f64>,
    /// Function for the functional family: identity|square|sine|step.
    #[arg(long)]
    f: Option<String>,
    /// Sample size for generated data.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Master seed; everything derives from it deterministically.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated epsilon list (rank scale).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Comma-separated delta list (x units).
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Neighbor count for eta2_knn (default ceil(sqrt n)).
    #[arg(long)]
    k: Option<usize>,
    /// Cell count for eta2_binned (default ceil(n^(1/3))).
    #[arg(long)]
    bins: Option<usize>,
    /// Comma-separated rho grid for sweeps.
    #[arg(long = "rho-grid", value_delimiter = ',')]
    rho_grid: Vec<f64>,
    /// Comma-separated n grid for convergence studies and benchmarks.
    #[arg(long = "n-grid", value_delimiter = ',')]
    n_grid: Vec<usize>,
    /// Replicates per grid point.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Comma-separated estimator list: adjacent_l1,zeta_eps,zeta_limit,xi,
    /// xi_large,eta2_knn,eta2_binned,r2,delta_mean,xi_bruteforce,zeta_bruteforce.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
    /// Override the n <= 5000 guard on quadratic-cost paths.
    #[arg(long = "force-quadratic")]
    force_quadratic: bool,
}

impl CommonOpts {
    fn into_config(self, command: CommandKind) -> Result<(RunConfig, Option<PathBuf>), CliError> {
        let input = match (&self.input, &self.gen) {
            (Some(path), None) => Some(InputSource::File { path: path.clone() }),
            (None, Some(family)) => {
                let family = Family::from_str(family).map_err(CliError::Estimator)?;
                let f = match &self.f {
                    Some(name) => Some(FuncKind::from_str(name).map_err(CliError::Estimator)?),
                    None => None,
                };
                Some(InputSource::Gen {
                    gen: GeneratorSpec {
                        family,
                        rho: self.rho,
                        n: self.n,
                        seed: self.seed,
                        f,
                    },
                })
            }
            (None, None) => None,
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("--input conflicts with --gen".into()))
            }
        };
        let estimators = self
            .estimators
            .iter()
            .map(|s| EstimatorKind::from_str(s))
            .collect::<Result<Vec<_>, _>>()?;
        let config = RunConfig {
            command,
            input,
            estimators,
            params: Params {
                eps: self.eps,
                delta: self.delta,
                k: self.k,
                bins: self.bins,
                rho_grid: self.rho_grid,
                n_grid: self.n_grid,
                reps: self.reps,
                seed: self.seed,
            },
            format: OutputFormat::from_str(&self.format)?,
            force_quadratic: self.force_quadratic,
        };
        Ok((config, self.out))
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

fn run(top: TopLevel) -> Result<(), CliError> {
    match top.command {
        Command::Compute(opts) => {
            let (config, out) = opts.into_config(CommandKind::Compute)?;
            let reports = cmd_compute(&config)?;
            let text = match config.format {
                OutputFormat::Json => to_json(&wrap_output(&config, &reports)),
                OutputFormat::Csv => reports_to_csv(
                    Some(&serde_json::to_string(&config).unwrap()),
                    &reports,
                ),
            };
            emit(out.as_ref(), &text)
        }
        Command::Sweep(opts) => {
            let (config, out) = opts.into_config(CommandKind::Sweep)?;
            let rows = cmd_sweep(&config)?;
            let text = match config.format {
                OutputFormat::Json => to_json(&wrap_output(&config, &rows)),
                OutputFormat::Csv => {
                    sweep_rows_to_csv(Some(&serde_json::to_string(&config).unwrap()), &rows)
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::Converge(opts) => {
            let (config, out) = opts.into_config(CommandKind::Converge)?;
            let rows = cmd_converge(&config)?;
            let text = match config.format {
                OutputFormat::Json => to_json(&wrap_output(&config, &rows)),
                OutputFormat::Csv => {
                    sweep_rows_to_csv(Some(&serde_json::to_string(&config).unwrap()), &rows)
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::Bench(opts) => {
            let (config, out) = opts.into_config(CommandKind::Bench)?;
            let report = cmd_bench(&config)?;
            let text = match config.format {
                OutputFormat::Json => to_json(&wrap_output(&config, &report)),
                OutputFormat::Csv => {
                    bench_to_csv(Some(&serde_json::to_string(&config).unwrap()), &report)
                }
            };
            emit(out.as_ref(), &text)?;
            match &report.scaling {
                Some(check) if !check.ok => Err(CliError::Usage(format!(
                    "sub-quadratic scaling check failed: ratio {:.2} > {:.2}",
                    check.ratio, check.max_ratio
                ))),
                _ => Ok(()),
            }
        }
        Command::Selftest(opts) => {
            let format = OutputFormat::from_str(&opts.format)?;
            let (lines, ok) = cmd_selftest();
            for line in &lines {
                eprintln!(
                    "selftest {}: {}{}",
                    line.name,
                    if line.passed { "ok" } else { "FAILED" },
                    line.detail
                        .as_deref()
                        .map(|d| format!(" ({d})"))
                        .unwrap_or_default()
                );
            }
            let config = RunConfig {
                command: CommandKind::Selftest,
                input: None,
                estimators: vec![],
                params: Params::default(),
                format,
                force_quadratic: false,
            };
            let text = match format {
                OutputFormat::Json => to_json(&wrap_output(&config, &lines)),
                OutputFormat::Csv => {
                    let mut s = String::from("name,passed\n");
                    for l in &lines {
                        s.push_str(&format!("{},{}\n", l.name, l.passed));
                    }
                    s
                }
            };
            emit(opts.out.as_ref(), &text)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Usage("selftest failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    // Help and version exit 0; genuine argument errors exit 1 (not clap's
    // default 2, which is reserved for data errors here).
    let top = match TopLevel::try_parse() {
        Ok(top) => top,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(top) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("localdep: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
