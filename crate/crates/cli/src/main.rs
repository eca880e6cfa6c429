use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use decopath::experiments::{ExperimentConfig, ExperimentKind, Params};
use decopath::par::Exec;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Experiments on decorated paths, Young/Marcus solvers and chaotic drivers.
#[derive(Parser, Debug)]
#[command(name = "decopath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Endpoint table of the non-Marcus example for a menu of excursions.
    ExampleNonmarcus(RunArgs),
    /// Birkhoff-sum path of the cusp billiard and its deepest excursions.
    Butterfly(RunArgs),
    /// Decorated solutions with linear profiles against the Marcus solver.
    MarcusCheck(RunArgs),
    /// Property checks of the decorated metrics and p-variation.
    MetricsSuite(RunArgs),
    /// Return-time tails, clustering and profile estimates.
    Tails(RunArgs),
    /// Fast-slow endpoints against the decorated Lévy limit.
    FastslowCompare(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config; the shipped default is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run ensembles on one thread.
    #[arg(long)]
    sequential: bool,
    /// Size of the worker pool.
    #[arg(long, env = "DECOPATH_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &RunArgs) {
        match self {
            Command::ExampleNonmarcus(a) => (ExperimentKind::ExampleNonmarcus, a),
            Command::Butterfly(a) => (ExperimentKind::Butterfly, a),
            Command::MarcusCheck(a) => (ExperimentKind::MarcusCheck, a),
            Command::MetricsSuite(a) => (ExperimentKind::MetricsSuite, a),
            Command::Tails(a) => (ExperimentKind::Tails, a),
            Command::FastslowCompare(a) => (ExperimentKind::FastslowCompare, a),
        }
    }
}

fn default_config(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::ExampleNonmarcus => include_str!("../../../configs/example-nonmarcus.toml"),
        ExperimentKind::Butterfly => include_str!("../../../configs/butterfly.toml"),
        ExperimentKind::MarcusCheck => include_str!("../../../configs/marcus-check.toml"),
        ExperimentKind::MetricsSuite => include_str!("../../../configs/metrics-suite.toml"),
        ExperimentKind::Tails => include_str!("../../../configs/tails-pm.toml"),
        ExperimentKind::FastslowCompare => include_str!("../../../configs/fastslow-compare.toml"),
    }
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<(ExperimentConfig, Params)> {
    let (text, origin) = match &args.config {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (default_config(kind).to_string(), format!("default {} config", kind.name())),
    };
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {origin}"))?;
    let mut cfg = ExperimentConfig::from_value(serde_json::to_value(table)?).with_context(|| origin.clone())?;
    if cfg.experiment != kind {
        bail!(
            "{origin} configures `{}`, not `{}`",
            cfg.experiment.name(),
            kind.name()
        );
    }
    let params = Params::parse(kind, cfg.params.clone()).with_context(|| origin.clone())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.params = params.to_value();
    Ok((cfg, params))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = cli.command.split();
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let exec = if args.sequential { Exec::Sequential } else { Exec::default() };
    let (cfg, params) = load(kind, args)?;
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("out/{}", kind.name())));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let canonical = serde_json::to_string(&ExperimentConfig { out: None, ..cfg.clone() })?;
    let hash = Sha256::digest(canonical.as_bytes());
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let output = params.run(cfg.seed, exec)?;
    let wall = clock.elapsed().as_secs_f64();

    for a in &output.artifacts {
        write(&out, &a.name, &a.contents)?;
    }
    write(&out, "summary.json", &serde_json::to_string_pretty(&output.summary)?)?;
    write(&out, "report.txt", &output.report)?;
    let manifest = json!({
        "experiment": kind.name(),
        "seed": cfg.seed,
        "config": cfg,
        "config_sha256": hex(&hash[..]),
        "versions": {
            "decopath": decopath::VERSION,
            "decopath-cli": env!("CARGO_PKG_VERSION"),
        },
        "exec": if exec == Exec::Sequential { "sequential" } else { "parallel" },
        "threads": rayon::current_num_threads(),
        "started_unix": started,
        "wall_seconds": wall,
        "artifacts": output.artifacts.iter().map(|a| Value::from(a.name.as_str())).collect::<Vec<_>>(),
    });
    write(&out, "manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    print!("{}", output.report);
    println!("wrote {} ({wall:.1}s)", out.display());
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
