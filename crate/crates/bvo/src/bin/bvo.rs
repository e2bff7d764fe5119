use std::path::PathBuf;
use std::process::ExitCode;

use bvo::config::{default_instance_config, ExperimentSpec, Overrides, ProblemKind};
use bvo::core::optimizer::Method;
use bvo::experiment::{run_experiment, summarize_files};
use bvo::scaling::{cubic_reference, fit_series, scaling_study, write_scaling, Axis, Mode, ScalingSettings, DATA_SIZES, DIMENSIONS};
use bvo::{HarnessError, Result};
use clap::{Args, Parser, Subcommand};

/// Bayesian variational optimization over discrete spaces.
#[derive(Parser)]
#[command(name = "bvo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated optimizations and write traces, summary and curves.
    Run(RunArgs),
    /// Time one optimization round across problem sizes.
    Scale(ScaleArgs),
    /// Summarize existing trace files.
    Aggregate(AggregateArgs),
    /// Print the default benchmark instance config.
    Config,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long = "lambda")]
    reg_lambda: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long = "init")]
    init_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instance_seed: Option<u64>,
    /// Instance config file (see `bvo config`).
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall-clock timings in the traces.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long, default_value = "dimension")]
    axis: Axis,
    #[arg(long, default_value = "fixed_batches")]
    mode: Mode,
    /// Comma-separated, increasing; defaults depend on the axis.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timings are only meaningful on one worker.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Scaling CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the cubic reference series next to `--out`.
    #[arg(long)]
    reference: bool,
}

#[derive(Args)]
struct AggregateArgs {
    /// Trace files.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// File name prefix for `{stem}_summary.csv` and `{stem}_curves.csv`.
    #[arg(long, default_value = "all")]
    stem: String,
}

fn run(args: RunArgs) -> Result<()> {
    let flags = Overrides {
        problem: args.problem,
        method: args.method,
        reg_lambda: args.reg_lambda,
        runs: args.runs,
        init_points: args.init_points,
        iters: args.iters,
        seed: args.seed,
        instance_seed: args.instance_seed,
        out: args.out,
        jobs: args.jobs,
        timing: args.timing.then_some(true),
        instances: args.instances,
    };
    let spec = ExperimentSpec::resolve(args.config.as_deref(), &flags)?;
    let outcome = run_experiment(&spec)?;
    let s = &outcome.summary;
    println!(
        "{} {} lambda={}: {} over {} runs ({} failed) -> {}",
        s.problem,
        s.method,
        s.lambda,
        s.cell,
        s.runs,
        s.failed,
        outcome.summary_path.display()
    );
    Ok(())
}

fn scale(args: ScaleArgs) -> Result<()> {
    if args.jobs != 1 {
        return Err(HarnessError::Config("the scaling study runs with --jobs 1".into()));
    }
    let sizes = if args.sizes.is_empty() {
        match args.axis {
            Axis::Dimension => DIMENSIONS.to_vec(),
            Axis::DataSize => DATA_SIZES.to_vec(),
        }
    } else {
        args.sizes
    };
    let settings = ScalingSettings { repeats: args.repeats, seed: args.seed, ..ScalingSettings::default() };
    let study = scaling_study(args.axis, &sizes, args.mode, &settings)?;
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    write_scaling(&args.out, &study.records)?;
    if args.reference {
        let path = args.out.with_extension("reference.csv");
        write_scaling(&path, &fit_series(args.axis, args.mode, &sizes, &cubic_reference(&sizes))?)?;
    }
    println!("{} ({}) slope {:.3} -> {}", args.axis, args.mode, study.slope(), args.out.display());
    Ok(())
}

fn aggregate(args: AggregateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out).map_err(|e| HarnessError::io(&args.out, e))?;
    let (summary, curves) = summarize_files(&args.traces, &args.out, &args.stem)?;
    println!("{}", summary.display());
    if let Some(c) = curves {
        println!("{}", c.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return report("usage", &e.to_string()),
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Scale(a) => scale(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Config => {
            print!("{}", default_instance_config());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}

fn report(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message.trim() }));
    ExitCode::FAILURE
}
