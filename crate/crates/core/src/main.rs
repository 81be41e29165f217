use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cranrates::channel::{db_to_linear, Channel, SearchMethod, SystemConfig, DEFAULT_EPSILON, DEFAULT_LLL_DELTA};
use cranrates::experiments::{
    eval_channel, parse_schemes, parse_values, run_sweep, write_sweep, OutputFormat, Scheme, SweepAxis, SweepSpec,
};
use cranrates::{Error, Result};

#[derive(Parser)]
#[command(name = "cranrates", version, about = "Uplink C-RAN sum-rates under finite backhaul")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep over backhaul capacity or SNR.
    Sweep(SweepArgs),
    /// Evaluate schemes on one channel read from a JSON file.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// Comma-separated subset of qcof,jqcof,cof,swz,cutset.
    #[arg(long, default_value = "qcof,jqcof,cof,swz,cutset")]
    schemes: String,
    #[arg(long, default_value = "exhaustive")]
    search: SearchMethod,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long = "lll-delta", default_value_t = DEFAULT_LLL_DELTA)]
    lll_delta: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    axis: String,
    /// Comma list or inclusive range start:stop:step.
    #[arg(long)]
    values: String,
    #[arg(long, default_value_t = 3)]
    users: usize,
    #[arg(long, default_value_t = 2)]
    relays: usize,
    /// Fixed SNR in dB (required when sweeping backhaul).
    #[arg(long = "snr-db")]
    snr_db: Option<f64>,
    /// Fixed per-relay backhaul (required when sweeping SNR).
    #[arg(long)]
    backhaul: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long = "snr-db")]
    snr_db: f64,
    /// Per-relay capacities C1,...,CK.
    #[arg(long)]
    backhaul: String,
    /// Expected number of users; checked against the file.
    #[arg(long)]
    users: Option<usize>,
    /// Expected number of relays; checked against the file.
    #[arg(long)]
    relays: Option<usize>,
    #[command(flatten)]
    common: Common,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let axis: SweepAxis = args.axis.parse()?;
    let format: OutputFormat = args.format.parse()?;
    let (snr_db, backhaul) = match axis {
        SweepAxis::Backhaul => (
            args.snr_db
                .ok_or_else(|| Error::InvalidConfig("--snr-db is required when sweeping backhaul".into()))?,
            0.0,
        ),
        SweepAxis::SnrDb => (
            0.0,
            args.backhaul
                .ok_or_else(|| Error::InvalidConfig("--backhaul is required when sweeping snr-db".into()))?,
        ),
    };
    let mut base = SystemConfig::new(args.users, args.relays, db_to_linear(snr_db), backhaul);
    base.epsilon = args.common.epsilon;
    base.lll_delta = args.common.lll_delta;
    base.search = args.common.search;
    base.seed = args.seed;
    base.trials = args.trials;
    let spec = SweepSpec {
        base,
        snr_db,
        backhaul,
        axis,
        values: parse_values(&args.values)?,
        schemes: parse_schemes(&args.common.schemes)?,
    };
    let result = run_sweep(&spec, args.workers)?;
    for v in &result.bound_violations {
        eprintln!(
            "warning: {} exceeds the cut-set bound at trial {} (snr_db={}, C={}): {} > {}",
            v.scheme, v.trial, v.snr_db, v.backhaul, v.sum_rate, v.cutset
        );
    }
    for path in write_sweep(&result, &args.out, format)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let channel = Channel::load_json(&args.channel).map_err(|e| match e {
        Error::Io(io) => Error::MalformedChannelFile(format!("{}: {io}", args.channel.display())),
        other => other,
    })?;
    let users = args.users.unwrap_or(channel.users());
    let relays = args.relays.unwrap_or(channel.relays());
    let backhaul = parse_values(&args.backhaul)?;
    let schemes: Vec<Scheme> = parse_schemes(&args.common.schemes)?;
    let mut cfg = SystemConfig::new(users, relays, db_to_linear(args.snr_db), 0.0);
    cfg.backhaul = backhaul;
    cfg.epsilon = args.common.epsilon;
    cfg.lll_delta = args.common.lll_delta;
    cfg.search = args.common.search;
    let report = eval_channel(&channel, &cfg, args.snr_db, &schemes)?;
    let text = serde_json::to_string_pretty(&report)?;
    match args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
