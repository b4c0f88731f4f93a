use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slso_cli::{cmd_eval, cmd_run, exit, load_corpus, CliError, RunConfig, RunFlags};
use slso_core::orchestrator::Method;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "slso", version, about = "Structured jaw-cyst findings with self-correction loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a case corpus.
    Run(RunArgs),
    /// Score two runs against ground truth and compare them.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Corpus root with one directory per case.
    #[arg(long)]
    cases: Option<PathBuf>,
    /// slso or cot.
    #[arg(long)]
    method: Option<Method>,
    /// Endpoint URL, or mock:SCRIPT for a scripted backend.
    #[arg(long)]
    backend: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cap1: Option<u32>,
    #[arg(long)]
    cap2: Option<u32>,
    /// Language tag for generated findings.
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Maximum number of cases in flight.
    #[arg(long)]
    parallel: Option<usize>,
    /// Directory of template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// TOML config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Baseline run directory.
    #[arg(long)]
    run_a: PathBuf,
    /// Proposed run directory.
    #[arg(long)]
    run_b: PathBuf,
    /// Corpus root holding <case>/truth.json.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

async fn run(args: RunArgs) -> Result<i32, CliError> {
    let config = RunConfig::resolve(RunFlags {
        cases: args.cases,
        method: args.method,
        backend: args.backend,
        out: args.out,
        model: args.model,
        language: args.lang,
        parallel: args.parallel,
        cap1: args.cap1,
        cap2: args.cap2,
        templates: args.templates,
        config: args.config,
    })?;
    let corpus = load_corpus(&config.cases)?;
    for bad in &corpus.invalid {
        eprintln!("skipping {}: {}", bad.case_id, bad.reason);
    }
    let summary = cmd_run(&config, &corpus).await?;
    for case in &summary.cases {
        println!("{}", case.summary_line());
    }
    Ok(summary.exit_code())
}

fn eval(args: EvalArgs) -> Result<i32, CliError> {
    let report = cmd_eval(&args.run_a, &args.run_b, &args.truth, &args.out)?;
    print!("{}", report.to_markdown());
    Ok(exit::OK)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let outcome = match Cli::parse().command {
        Command::Run(args) => run(args).await,
        Command::Eval(args) => eval(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
