use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirreg_cli::artifacts::{write_expected_values, write_summary, EXPECTED_VALUES_CSV, SUMMARY_CSV};
use dirreg_cli::plot::{plot, PlotOptions};
use dirreg_cli::simulate::{default_beta, parse_beta, write_simulated};
use dirreg_cli::summarize::{restore, summarize};
use dirreg_cli::{run, CliError, Method, RunConfig};
use dirreg_core::hmc::SamplerConfig;
use dirreg_core::simulate::BloodShaped;

#[derive(Parser)]
#[command(name = "dirreg", version, about = "Dirichlet regression for compositional data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write fit.json, summary.csv, expected_values.csv and draws.csv.
    #[command(alias = "run")]
    Fit(FitArgs),
    /// Write a synthetic two-group data set.
    Simulate(SimulateArgs),
    /// Recompute the summary tables of a finished run.
    Summarize(SummarizeArgs),
    /// Draw parallel-coordinate SVG panels for a finished run.
    Plot(PlotArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    /// e.g. `y ~ Disease` or `y ~ Disease | 1`.
    #[arg(long)]
    formula: String,
    /// Response columns; by default every column starting with the
    /// formula's left-hand side.
    #[arg(long, value_delimiter = ',')]
    response: Option<Vec<String>>,
    /// Reference component, by name or 1-based index (default: last).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,
    #[arg(long, default_value_t = 5.0)]
    prior_sd_beta: f64,
    #[arg(long, default_value_t = 5.0)]
    prior_sd_theta: f64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Iterations per chain, warmup included.
    #[arg(long = "iter", default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 0.95)]
    adapt_delta: f64,
    #[arg(long, default_value_t = 20)]
    max_treedepth: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Random restarts for the ML optimizer.
    #[arg(long, default_value_t = 1)]
    ml_starts: usize,
    /// Skip draws.csv.
    #[arg(long)]
    no_draws: bool,
    /// Output directory.
    #[arg(long, default_value = "dirreg-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    components: usize,
    /// `intercept,effect` rows separated by `;`, one per non-reference component.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long, default_value_t = 68.0)]
    precision: f64,
    /// Share of observations in group A.
    #[arg(long, default_value_t = 14.0 / 30.0)]
    share_a: f64,
    #[arg(long)]
    output: PathBuf,
    /// Also write the true coefficients as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory of a finished run.
    dir: PathBuf,
    /// Credible/confidence level; the run's level by default.
    #[arg(long)]
    level: Option<f64>,
    /// Write summary.csv and expected_values.csv here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory of a finished run.
    dir: PathBuf,
    /// One panel per level of this column.
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    level: Option<f64>,
    /// Where the SVG files go; the run directory by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fit(args: FitArgs) -> ExitCode {
    let mut config = RunConfig::new(args.input, args.formula, args.out);
    config.response = args.response;
    config.reference = args.reference;
    config.method = args.method;
    config.prior_sd_beta = args.prior_sd_beta;
    config.prior_sd_theta = args.prior_sd_theta;
    config.sampler = SamplerConfig {
        chains: args.chains,
        iterations: args.iterations,
        warmup: args.warmup,
        target_accept: args.adapt_delta,
        max_treedepth: args.max_treedepth,
        seed: args.seed,
        ..SamplerConfig::default()
    };
    config.level = args.level;
    config.ml_starts = args.ml_starts;
    config.write_draws = !args.no_draws;
    let outcome = run(&config);
    match &outcome.error {
        Some(e) => eprintln!("error [{}]: {e}", e.code()),
        None => {
            if let Some(r) = outcome.report.bayes.as_ref().and_then(|b| b.max_rhat) {
                eprintln!("max split R-hat {r:.4}");
            }
            if outcome.exit_code() == 2 {
                eprintln!("warning: convergence diagnostics failed");
            }
            eprintln!("wrote {}", config.out.display());
        }
    }
    ExitCode::from(outcome.exit_code())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.components < 2 {
        return Err(CliError::Config("at least two components required".into()));
    }
    if !(args.precision > 0.0) {
        return Err(CliError::Config("precision must be positive".into()));
    }
    let beta = match &args.beta {
        Some(text) => parse_beta(text)?,
        None => default_beta(args.components),
    };
    if beta.len() + 1 != args.components {
        return Err(CliError::Config(format!(
            "{} beta rows given for {} components",
            beta.len(),
            args.components
        )));
    }
    let spec = BloodShaped {
        n: args.n,
        share_a: args.share_a,
        beta,
        log_precision: args.precision.ln(),
        seed: args.seed,
    };
    write_simulated(&spec, &args.output, args.truth.as_deref())
}

fn summarize_cmd(args: SummarizeArgs) -> Result<(), CliError> {
    let restored = restore(&args.dir)?;
    let (lines, expected) = summarize(&restored, args.level)?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?;
            let summary = dir.join(SUMMARY_CSV);
            let ev = dir.join(EXPECTED_VALUES_CSV);
            let file = |p: &Path| {
                std::fs::File::create(p).map_err(|e| CliError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })
            };
            write_summary(file(&summary)?, &lines, &summary)?;
            write_expected_values(file(&ev)?, &expected, &ev)
        }
        None => {
            let stdout = Path::new("<stdout>");
            write_summary(io::stdout().lock(), &lines, stdout)?;
            println!();
            write_expected_values(io::stdout().lock(), &expected, stdout)
        }
    }
}

fn plot_cmd(args: PlotArgs) -> Result<(), CliError> {
    let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
    let opts = PlotOptions {
        group_by: args.group_by,
        level: args.level,
    };
    for path in plot(&args.dir, &out, &opts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(result: Result<(), CliError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Fit(args) => fit(args),
        Command::Simulate(args) => report(simulate(args)),
        Command::Summarize(args) => report(summarize_cmd(args)),
        Command::Plot(args) => report(plot_cmd(args)),
    }
}
