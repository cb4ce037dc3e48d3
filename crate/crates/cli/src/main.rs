use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use structinfo::cbit::Normalization;
use structinfo::config::RunConfig;
use structinfo::output::{balance_summary, run_stage, Stage};
use structinfo::pipeline::Study;
use structinfo::presets;
use structinfo::verify::{evaluate, preset_criteria, Runs};
use structinfo::Error;

#[derive(Parser)]
#[command(name = "structinfo", version, about = "1D elastodynamic structural information analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for concurrent simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print nothing but errors and the verification verdict.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base model and write sensors, energy, snapshots and probes.
    Simulate(RunArgs),
    /// Also run every variation pair and write differential fields.
    Diff(RunArgs),
    /// Also write information balance traces, fields and residuals.
    Balance(RunArgs),
    /// Full run with the Cbit report.
    CbitReport(RunArgs),
    /// Check the acceptance criteria of a preset (fig2, fig3, fig9, fig24,
    /// homogeneous or all).
    Verify {
        preset: String,
        /// Print the measured values of every check.
        #[arg(long)]
        details: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file or preset name.
    config: String,
    /// Output directory (default: the configured one, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record snapshots every n levels in addition to the configured times.
    #[arg(long)]
    stride: Option<usize>,
    /// Sensor information normalisation.
    #[arg(long, value_parser = ["absolute", "relative"])]
    normalization: Option<String>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}

fn load(args: &RunArgs) -> Result<(RunConfig, Normalization, PathBuf), Error> {
    let mut cfg = presets::load(&args.config)?;
    if let Some(s) = args.stride {
        if s == 0 {
            return Err(Error::Config("--stride must be at least 1".into()));
        }
        cfg.recording.snapshot_stride = Some(s);
    }
    let normalization = match &args.normalization {
        Some(n) => n.parse()?,
        None => cfg.analysis.normalization,
    };
    cfg.analysis.normalization = normalization;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    Ok((cfg, normalization, out))
}

fn run(stage: Stage, args: &RunArgs, quiet: bool) -> Result<(), Error> {
    let (cfg, normalization, out) = load(args)?;
    let study = Study::new(&cfg)?;
    let start = Instant::now();
    let result = run_stage(&study, stage, normalization, &out)?;
    if quiet {
        return Ok(());
    }
    if let (Stage::Balance, Some(a)) = (stage, &result.analysis) {
        print!("{}", balance_summary(&study.grid(), a));
    }
    if let Some(r) = &result.report {
        print!("{}", r.to_table());
    }
    println!(
        "{}: {} files written to {} in {:.1} s",
        stage.label(),
        result.manifest.files.len() + 1,
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn verify(preset: &str, details: bool, quiet: bool) -> Result<bool, Error> {
    let ids = preset_criteria(preset)?;
    let runs = Runs::new();
    let mut ok = true;
    for id in ids {
        let r = evaluate(&runs, id);
        ok &= r.passed();
        if !quiet {
            println!("{}", r.line());
            if details || !r.passed() {
                print!("{}", r.details());
            }
        }
    }
    println!("verify {preset}: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => run(Stage::Simulate, a, cli.quiet).map(|_| true),
        Command::Diff(a) => run(Stage::Diff, a, cli.quiet).map(|_| true),
        Command::Balance(a) => run(Stage::Balance, a, cli.quiet).map(|_| true),
        Command::CbitReport(a) => run(Stage::Cbit, a, cli.quiet).map(|_| true),
        Command::Verify { preset, details } => verify(preset, *details, cli.quiet),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!(": {s}"));
                src = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
