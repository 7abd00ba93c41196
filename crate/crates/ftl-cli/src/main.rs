mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::commands::Run;
use crate::config::{load_file, Overrides, Resolved};

/// Stochastic follow-the-leader traffic through a junction and its
/// Hamilton-Jacobi limit.
#[derive(Parser)]
#[command(name = "ftl-junction", version)]
struct Cli {
    /// Worker threads for replicate loops; defaults to all cores. Results do
    /// not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file, or a previous run's manifest.json to replay it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Compute effective velocities and Hamiltonians and check convexity.
    Homogenize(RunArgs),
    /// Integrate one realization from the flat datum and record positions.
    Simulate(RunArgs),
    /// Estimate the junction flux limiter from replicate crossing counts.
    EstimateLimiter(RunArgs),
    /// Solve the junction problem from the flat datum on a grid.
    SolveMacro(RunArgs),
    /// Compare scaled microscopic counts with the macroscopic solution.
    Compare(RunArgs),
    /// Check model assumptions and the simulator's structural bounds.
    Diagnostics(RunArgs),
    /// Print the command reference as Markdown.
    #[command(hide = true)]
    Reference,
}

/// The subcommand definition, for usage errors that show its own usage line.
fn subcommand(name: &str) -> clap::Command {
    let mut cli = Cli::command();
    cli.build();
    cli.find_subcommand(name).expect("known subcommand").clone()
}

fn resolve(args: RunArgs, command: &str) -> Result<Resolved, clap::Error> {
    let usage = |msg: String| subcommand(command).error(clap::error::ErrorKind::InvalidValue, msg);
    let base = match &args.config {
        Some(path) if !path.is_file() => return Err(usage(format!("config file {} not found", path.display()))),
        Some(path) => load_file(path).map_err(|e| usage(format!("{e:#}")))?,
        None => Overrides::default(),
    };
    let merged = args.overrides.over(base);
    match &merged.spec {
        None => {
            return Err(subcommand(command).error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "no model spec given; pass --spec or set `spec` in the config",
            ))
        }
        Some(p) if !p.is_file() => return Err(usage(format!("spec file {} not found", p.display()))),
        Some(_) => {}
    }
    Resolved::new(merged, command).map_err(|e| usage(format!("{e:#}")))
}

fn execute(command: &'static str, args: RunArgs, body: fn(&mut Run) -> Result<()>) -> Result<bool> {
    let cfg = match resolve(args, command) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let mut run = Run::new(command, cfg)?;
    body(&mut run)?;
    let (dest, failed) = run.publish()?;
    println!("{command}: wrote {}", dest.display());
    for f in &failed {
        eprintln!("check failed: {f}");
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match cli.command {
        Command::Homogenize(a) => execute("homogenize", a, commands::homogenize),
        Command::Simulate(a) => execute("simulate", a, commands::simulate),
        Command::EstimateLimiter(a) => execute("estimate-limiter", a, commands::estimate_limiter),
        Command::SolveMacro(a) => execute("solve-macro", a, commands::solve_macro),
        Command::Compare(a) => execute("compare", a, commands::compare),
        Command::Diagnostics(a) => execute("diagnostics", a, commands::diagnostics),
        Command::Reference => {
            print!("{}", reference());
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

/// Markdown reference built from the clap definitions.
fn reference() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let mut out = String::from("# ftl-junction command reference\n\n");
    out.push_str("<!-- Generated by `ftl-junction reference`; do not edit. -->\n\n");
    out.push_str(&format!("```text\n{}```\n", cmd.render_long_help()));
    for sub in cmd.get_subcommands_mut() {
        if sub.is_hide_set() || sub.get_name() == "help" {
            continue;
        }
        let name = sub.get_name().to_string();
        out.push_str(&format!("\n## {name}\n\n```text\n{}```\n", sub.render_long_help()));
    }
    out
}
