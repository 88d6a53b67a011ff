//! `ciu-explain`: contextual importance and utility reports from scenario files.
//!
//! Exit codes: 0 success, 1 usage error, 2 scenario or validation error,
//! 3 model or transport error, 4 internal error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use ciu::engine;
use ciu::estimator::{sweep_feature, sweep_levels, EstimatorConfig, Strategy};
use ciu::model::{LoadOptions, TIMEOUT_ENV};
use ciu::narrative::{render_contrast, render_explanation};
use ciu::{Error, ErrorClass, Scenario};

#[derive(Debug, Parser)]
#[command(name = "ciu-explain", version, about = "Contextual importance and utility explanations for black-box models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain one output at a context.
    Explain(ExplainArgs),
    /// Explain why one output beat another at a context.
    Contrast(ContrastArgs),
    /// Write a 1-D sweep of one feature as CSV.
    Sweep(SweepArgs),
    /// Check a scenario without explaining anything.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    /// grid or mc
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long)]
    grid_levels: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid refinement rounds.
    #[arg(long)]
    refine: Option<u32>,
    /// Worker threads; ignored for external models.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    /// Bundled demo name or scenario file path.
    scenario: String,
    /// Comma-separated values and/or name=value pairs.
    #[arg(long)]
    context: String,
    #[arg(long)]
    output: String,
    /// Comma-separated features or concepts; defaults to the scenario's targets.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Print the canonical JSON report instead of text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
struct ContrastArgs {
    scenario: String,
    #[arg(long)]
    context: String,
    /// The preferred output, then the rejected one (`--output a --output b` or `--output a,b`).
    #[arg(long, value_delimiter = ',', required = true)]
    output: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Reasons listed in the text report.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    scenario: String,
    #[arg(long)]
    context: String,
    #[arg(long)]
    feature: String,
    /// Points for a continuous feature; categorical features use every level.
    #[arg(long, default_value_t = 21)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    scenario: String,
    /// Also launch the model and complete the adapter handshake.
    #[arg(long)]
    probe_model: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "grid" => Ok(Strategy::Grid),
        "mc" => Ok(Strategy::MonteCarlo),
        other => Err(format!("expected 'grid' or 'mc', got '{other}'")),
    }
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Explain(args) => cmd_explain(args),
        Command::Contrast(args) => cmd_contrast(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Usage: ciu-explain <COMMAND> --help");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            let code = match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Model => 3,
                ErrorClass::Internal => 4,
            };
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn load_options() -> Result<LoadOptions, Error> {
    let timeout = match std::env::var(TIMEOUT_ENV) {
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(secs) if secs.is_finite() && secs > 0.0 => Some(Duration::from_secs_f64(secs)),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{TIMEOUT_ENV} must be a positive number of seconds, got '{raw}'"
                )))
            }
        },
        Err(_) => None,
    };
    Ok(LoadOptions { timeout })
}

fn estimator_config(scenario: &Scenario, args: &EstimatorArgs) -> EstimatorConfig {
    let mut config = scenario.estimator.clone();
    if let Some(s) = args.strategy {
        config.strategy = s;
    }
    if let Some(n) = args.grid_levels {
        config.grid_levels = n;
    }
    if let Some(n) = args.mc_samples {
        config.mc_samples = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.refine {
        config.refinement = r;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    config
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&args.scenario)?;
    let context = scenario.parse_context(&args.context)?;
    let output = scenario.output(&args.output)?;
    let targets = args.targets.unwrap_or_else(|| scenario.default_targets.clone());
    let config = estimator_config(&scenario, &args.estimator);
    config.validate()?;
    let model = scenario.load_model(&load_options()?)?;

    let report = engine::explain(
        model.as_ref(),
        &scenario.space,
        &context,
        output,
        &targets,
        &scenario.tree,
        &config,
    )?;
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
    if args.json {
        println!("{}", report.to_canonical_json());
    } else {
        print!("{}", render_explanation(&report, &scenario.space, &scenario.style)?);
    }
    Ok(())
}

fn cmd_contrast(args: ContrastArgs) -> Result<(), Failure> {
    let [a, b] = args.output.as_slice() else {
        return Err(Failure::Usage(format!(
            "contrast needs exactly two outputs, got {}",
            args.output.len()
        )));
    };
    if a == b {
        return Err(Failure::Usage(format!("contrast needs two different outputs, got '{a}' twice")));
    }
    if args.top_k == 0 {
        return Err(Failure::Usage("--top-k must be at least 1".into()));
    }
    let scenario = Scenario::load(&args.scenario)?;
    let context = scenario.parse_context(&args.context)?;
    let output_a = scenario.output(a)?;
    let output_b = scenario.output(b)?;
    let targets = args.targets.unwrap_or_else(|| scenario.default_targets.clone());
    let config = estimator_config(&scenario, &args.estimator);
    config.validate()?;
    let model = scenario.load_model(&load_options()?)?;

    let report = engine::contrast(
        model.as_ref(),
        &scenario.space,
        &context,
        output_a,
        output_b,
        &targets,
        &scenario.tree,
        &config,
    )?;
    if args.json {
        println!("{}", report.to_canonical_json());
    } else {
        print!("{}", render_contrast(&report, &scenario.space, args.top_k)?);
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&args.scenario)?;
    let context = scenario.parse_context(&args.context)?;
    let index = scenario
        .space
        .index_of(&args.feature)
        .ok_or_else(|| Error::UnknownFeature(args.feature.clone()))?;
    let model = scenario.load_model(&load_options()?)?;

    let sweep = if scenario.space.feature(index).is_categorical() {
        sweep_levels(model.as_ref(), &scenario.space, &context, index)?
    } else {
        sweep_feature(model.as_ref(), &scenario.space, &context, index, args.resolution)?
    };
    std::fs::write(&args.out, sweep.to_csv()).map_err(|e| {
        Error::InvalidArgument(format!("cannot write '{}': {e}", args.out.display()))
    })?;
    println!("wrote {} rows to {}", sweep.points.len(), args.out.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&args.scenario)?;
    if !scenario.model.is_external() || args.probe_model {
        let model = scenario.load_model(&load_options()?)?;
        if args.probe_model {
            println!(
                "model: {} ({} inputs, {} outputs)",
                model.fingerprint(),
                model.n_inputs(),
                model.n_outputs()
            );
        }
    }
    println!(
        "ok: {} ({} features, {} concepts, {} outputs)",
        scenario.name,
        scenario.space.len(),
        scenario.tree.names().count(),
        scenario.outputs.len()
    );
    Ok(())
}
