//! Command-line front end: single-cell simulation, grid sweeps, closed-form
//! bound reports, figure data, and trace replay.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical or domain
//! error, 3 I/O or file-format error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rescon::analysis::{
    ell_profile, log_grid, BoundParams, BoundReport, TfDistribution, BOUND_REPORT_HEADER,
};
use rescon::harness::{
    execute_run, replay_trace, run_experiment, run_experiment_with_threads, trace_filename,
    write_trace, ExperimentConfig, FIGURE_CSV_HEADER,
};
use rescon::{Error, Result};

const SUMMARY_CSV_HEADER: &str = "run,final_e,final_e_legit,final_e_malicious,tf,resolved";

#[derive(Parser)]
#[command(
    name = "rescon",
    version,
    about = "Resilient-consensus simulator, parameter sweeps, and deviation bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first (regime, gamma) cell of a config; write per-run traces
    /// and a summary table.
    Simulate(SimulateArgs),
    /// Run the full (regime, gamma) grid of a config; write cell statistics.
    Sweep(SweepArgs),
    /// Print one closed-form deviation-bound report row.
    Bounds(BoundsArgs),
    /// Write the bound-summand-vs-gamma profile for a span of recovery times.
    FigureEll(FigureEllArgs),
    /// Re-execute a stored trace and verify it reproduces exactly.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Key-value config file; omitted keys keep their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Run-count override.
    #[arg(long)]
    runs: Option<usize>,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; 0 forces strictly serial execution. Defaults to the
    /// global pool.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Confidence scale in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    c: f64,
    /// Confidence decay rate per round.
    #[arg(long)]
    gamma: f64,
    /// Largest legitimate-agent neighborhood size.
    #[arg(long = "dM")]
    d_m: usize,
    /// Legitimate trust-mean offset from 1/2 (positive).
    #[arg(long = "EL")]
    offset_legit: f64,
    /// Malicious trust-mean offset from 1/2 (negative).
    #[arg(long = "EM", allow_negative_numbers = true)]
    offset_malicious: f64,
    /// Legitimate agent count.
    #[arg(long = "L")]
    legit: usize,
    /// Malicious agent count.
    #[arg(long = "M")]
    malicious: usize,
    /// Smallest entry of the nominal Perron vector.
    #[arg(long)]
    vm: f64,
    /// Uniform state bound.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Fixed recovery time; ignored when --tf-samples is given.
    #[arg(long, default_value_t = 0)]
    tf: u32,
    /// File with one empirical recovery time per line.
    #[arg(long)]
    tf_samples: Option<PathBuf>,
    /// Deviation threshold the tail bound is evaluated at.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Args)]
struct FigureEllArgs {
    #[arg(long, default_value_t = 0.9)]
    c: f64,
    #[arg(long = "dM")]
    d_m: usize,
    #[arg(long)]
    vm: f64,
    #[arg(long, default_value_t = 2)]
    tf_min: u32,
    #[arg(long, default_value_t = 10)]
    tf_max: u32,
    /// Output directory for ell-profile.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file written by simulate or a trace-writing sweep.
    #[arg(long)]
    trace: PathBuf,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(horizon) = args.horizon {
        cfg.horizon = horizon;
    }
    cfg.regimes.truncate(1);
    cfg.gammas.truncate(1);
    cfg.validate()?;
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let mut summary = String::from(SUMMARY_CSV_HEADER);
    summary.push('\n');
    for run in 0..cfg.runs {
        let (outcome, trace, meta) = execute_run(&cfg, 0, 0, run)?;
        write_trace(&out_dir.join(trace_filename(0, 0, run)), &meta, &trace)?;
        writeln!(
            summary,
            "{run},{},{},{},{},{}",
            outcome.final_e,
            outcome.final_e_legit,
            outcome.final_e_malicious,
            outcome.recovery.value(),
            outcome.recovery.resolved().is_some()
        )
        .expect("writing to a string cannot fail");
    }
    std::fs::write(out_dir.join("summary.csv"), summary)?;
    println!("wrote {} traces and summary.csv to {}", cfg.runs, out_dir.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let result = match args.threads {
        None => run_experiment(&cfg)?,
        Some(threads) => run_experiment_with_threads(&cfg, threads)?,
    };
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("sweep.csv");
    result.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_tf_samples(path: &Path) -> Result<Vec<u32>> {
    let content = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tf = line.parse().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: bad recovery time {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        samples.push(tf);
    }
    Ok(samples)
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let tf = match &args.tf_samples {
        Some(path) => TfDistribution::Samples(read_tf_samples(path)?),
        None => TfDistribution::Fixed(args.tf),
    };
    let params = BoundParams {
        c: args.c,
        gamma: args.gamma,
        d_m: args.d_m,
        offset_legit: args.offset_legit,
        offset_malicious: args.offset_malicious,
        legit_count: args.legit,
        malicious_count: args.malicious,
        v_min: args.vm,
        eta: args.eta,
        tf,
    };
    let report = BoundReport::compute(args.epsilon, &params)?;
    println!("{BOUND_REPORT_HEADER}");
    println!("{}", report.csv_row());
    Ok(())
}

fn figure_ell(args: FigureEllArgs) -> Result<()> {
    if args.tf_min > args.tf_max {
        return Err(Error::Config(format!(
            "tf-min {} exceeds tf-max {}",
            args.tf_min, args.tf_max
        )));
    }
    let tf_values: Vec<u32> = (args.tf_min..=args.tf_max).collect();
    let gammas = log_grid(1e-3, 5.0, 200)?;
    let profile = ell_profile(args.c, args.d_m, args.vm, &tf_values, &gammas)?;
    let mut body = String::from(FIGURE_CSV_HEADER);
    body.push('\n');
    for (ti, &tf) in profile.tf_values.iter().enumerate() {
        for (gi, &gamma) in profile.gammas.iter().enumerate() {
            writeln!(body, "Tf={tf},{gamma},{},0", profile.neg_ell[ti][gi])
                .expect("writing to a string cannot fail");
        }
    }
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("ell-profile.csv");
    std::fs::write(&path, body)?;
    println!("wrote {}", path.display());
    for (i, &tf) in profile.tf_values.iter().enumerate() {
        println!("Tf={tf}: argmin gamma = {}", profile.argmin_gamma[i]);
    }
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let report = replay_trace(&args.trace)?;
    println!("{}", report.summary());
    report.verify()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io(_) | Error::Parse(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = !matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            // a malformed command line is a configuration error
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Bounds(args) => bounds(args),
        Command::FigureEll(args) => figure_ell(args),
        Command::Replay(args) => replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
