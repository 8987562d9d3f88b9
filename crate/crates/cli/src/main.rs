use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coarselab_cli::{
    init_threads, parse_bundle_spec, parse_graph_spec, run, suite, ExperimentConfig, Matrix, Op,
    RunError,
};

#[derive(Parser)]
#[command(
    name = "coarselab",
    version,
    about = "Finite-scale coarse geometry experiments"
)]
struct Cli {
    /// Seed for every randomized step; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and tables. Without it the report goes to
    /// stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "COARSELAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OpArgs {
    /// Start from this config file; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph generator: JSON or path:9, cycle:12, star:5, grid:3x4,
    /// tree:3,4, free:2,3, edges:FILE.
    #[arg(long)]
    graph: Option<String>,
    /// Bundle: JSON or product|horoball|glued(GRAPH, N).
    #[arg(long)]
    bundle: Option<String>,
    /// JSON file holding a sampled space.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Op parameter; the value is read as JSON when it parses, else as a
    /// string.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph or bundle and write its edge lists and manifest.
    Gen(OpArgs),
    /// Four-point and slim-triangle hyperbolicity.
    Delta(OpArgs),
    /// Gromov product, optionally with the corner-product check.
    Gromov(OpArgs),
    /// Certify a chain of geodesic legs as a quasigeodesic.
    Chain(OpArgs),
    /// Sample detours and check the exponential divergence bound.
    Detour(OpArgs),
    /// Ball counts and a certified exponential growth fit.
    Growth(OpArgs),
    /// Embed the trivalent tree, optionally with the growth pipeline.
    #[command(name = "embed-t3")]
    EmbedT3(OpArgs),
    /// Coarse surjectivity constant of the barycenter map.
    #[command(name = "surj-const")]
    SurjConst(OpArgs),
    /// Validate a bundle and report its properness profile.
    Bundle(OpArgs),
    /// Flow fronts and the per-level flow bound.
    #[command(visible_alias = "flow-bound")]
    Flow(OpArgs),
    /// Sampled flaring check.
    Flare(OpArgs),
    /// Exponential divergence of two sections.
    Diverge(OpArgs),
    /// Shadowing search for a target section.
    Shadow(OpArgs),
    /// Separated net of a sampled space.
    Net(OpArgs),
    /// Approximating graph bundle of a sampled horoball, with its audit.
    #[command(name = "approx-bundle")]
    ApproxBundle(OpArgs),
    /// Path-family hyperbolicity criterion.
    Bowditch(OpArgs),
    /// Run one config file.
    Run { config: PathBuf },
    /// Run every config of a matrix file.
    Suite { matrix: PathBuf },
}

fn op_config(op: Op, args: OpArgs) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.op != op {
                return Err(RunError::ConfigInvalid(format!(
                    "config runs {}, not {op}",
                    cfg.op
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(op),
    };
    if let Some(g) = &args.graph {
        cfg.graph = Some(parse_graph_spec(g)?);
    }
    if let Some(b) = &args.bundle {
        cfg.bundle = Some(parse_bundle_spec(b)?);
    }
    if let Some(path) = &args.space {
        let text = std::fs::read_to_string(path)?;
        cfg.space =
            Some(serde_json::from_str(&text).map_err(|e| RunError::ConfigInvalid(e.to_string()))?);
    }
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| RunError::ConfigInvalid(format!("parameter {kv:?} is not KEY=VALUE")))?;
        cfg.set_param(k, v)?;
    }
    Ok(cfg)
}

fn run_one(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<i32, RunError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let outcome = run(&cfg, out)?;
    match out {
        Some(dir) => eprintln!(
            "{} {}: {:?} -> {}",
            cfg.op,
            outcome.report.label,
            outcome.report.status,
            dir.display()
        ),
        None => print!("{}", outcome.report.to_json()),
    }
    Ok(outcome.report.exit_code())
}

fn main_inner(cli: Cli) -> Result<i32, RunError> {
    init_threads(cli.threads)?;
    let out = cli.out.as_deref();
    let (op, args) = match cli.command {
        Command::Run { config } => return run_one(ExperimentConfig::load(&config)?, cli.seed, out),
        Command::Suite { matrix } => {
            let s = suite(&Matrix::load(&matrix)?, cli.seed, out)?;
            print!("{}", s.summary.to_json());
            return Ok(s.summary.exit_code());
        }
        Command::Gen(a) => (Op::Gen, a),
        Command::Delta(a) => (Op::Delta, a),
        Command::Gromov(a) => (Op::Gromov, a),
        Command::Chain(a) => (Op::Chain, a),
        Command::Detour(a) => (Op::Detour, a),
        Command::Growth(a) => (Op::Growth, a),
        Command::EmbedT3(a) => (Op::EmbedT3, a),
        Command::SurjConst(a) => (Op::SurjConst, a),
        Command::Bundle(a) => (Op::Bundle, a),
        Command::Flow(a) => (Op::Flow, a),
        Command::Flare(a) => (Op::Flare, a),
        Command::Diverge(a) => (Op::Diverge, a),
        Command::Shadow(a) => (Op::Shadow, a),
        Command::Net(a) => (Op::Net, a),
        Command::ApproxBundle(a) => (Op::ApproxBundle, a),
        Command::Bowditch(a) => (Op::Bowditch, a),
    };
    run_one(op_config(op, args)?, cli.seed, out)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
