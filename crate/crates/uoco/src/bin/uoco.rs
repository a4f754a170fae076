//! Command-line entry point for running benchmark experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uoco::harness::{self, AlgoChoice, FamilyChoice, RunConfig};

#[derive(Parser)]
#[command(name = "uoco", version, about = "Universal online convex optimization harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV trace.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Loss family: linear-adversarial | strongly-convex-quadratic |
    /// exp-concave-squared | smooth-realizable.
    #[arg(long)]
    family: Option<String>,

    /// Domain kind: ball | box | simplex | halfspaces (halfspaces need a
    /// config file for the rows).
    #[arg(long)]
    domain: Option<String>,

    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<u64>,

    /// Dimension.
    #[arg(long)]
    d: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Algorithm: universal | universal-smooth | baseline | ogd | ons.
    #[arg(long)]
    algo: Option<String>,

    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kebab<T: serde::de::DeserializeOwned>(what: &str, value: &str) -> Result<T, String> {
    #[derive(serde::Deserialize)]
    struct Wrapper<T> {
        v: T,
    }
    toml::from_str::<Wrapper<T>>(&format!("v = \"{value}\""))
        .map(|w| w.v)
        .map_err(|_| format!("unrecognized {what} `{value}`"))
}

fn assemble_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(f) = &args.family {
        cfg.family = parse_kebab::<FamilyChoice>("family", f)?;
    }
    if let Some(dkind) = &args.domain {
        cfg.domain.kind = parse_kebab("domain", dkind)?;
    }
    if let Some(t) = args.horizon {
        cfg.t = t;
    }
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(a) = &args.algo {
        cfg.algo = parse_kebab::<AlgoChoice>("algo", a)?;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(args: &RunArgs) -> ExitCode {
    let cfg = match assemble_config(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let outcome = match harness::execute(&cfg) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out_path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("uoco_trace.csv"));
    if let Err(e) = harness::write_csv(&out_path, &outcome) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let s = &outcome.summary;
    println!(
        "rounds={} experts={} projections={} final_regret={:.6} rate={} -> {}",
        outcome.records.len(),
        s.expert_count,
        s.total_projections,
        s.final_regret,
        s.rate.as_ref().map_or("na".to_string(), |r| r.label()),
        out_path.display(),
    );
    if let Some(reason) = &outcome.aborted {
        eprintln!("error: partial trace: {reason}");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
    }
}
