//! Command-line front end for the claim-screening pipeline.
//!
//! Settings are resolved in three layers: built-in defaults, then
//! command-line flags, then the `--config` TOML file, which wins over both.
//! Exit status is 0 on success, 1 on a fatal error, and 2 when the stage
//! completed but skipped rows or players.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lotto_audit::montecarlo::Engine;
use lotto_audit::pipeline::{
    cmd_cluster, cmd_ingest, cmd_pipeline, cmd_screen, cmd_simulate, cmd_synth, PlayerSelection, RunConfig, StageReport,
};

#[derive(Parser, Debug)]
#[command(name = "lotto-audit", version, about = "Screen lottery prize claims for ticket discounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Parse a claims file into per-player profiles.
    Ingest,
    /// Expected net gain, store entropy and the outlier rectangle.
    Screen,
    /// Monte Carlo net-gain intervals for flagged or listed players.
    Simulate,
    /// Store-share clustering, expansion set and k sweep.
    Cluster,
    /// Write a synthetic claims file with a ground-truth manifest.
    Synth,
    /// ingest, screen, cluster and simulate in sequence.
    Pipeline,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Claims file (delimited text with a header row).
    #[arg(long, global = true)]
    claims: Option<PathBuf>,
    /// Prize-table file (JSON).
    #[arg(long, global = true)]
    prizes: Option<PathBuf>,
    /// Lottery-name to prize-table mapping rules (JSON).
    #[arg(long, global = true)]
    mapping: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates per player [default: 60000].
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Central interval level before the Bonferroni adjustment [default: 0.80].
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Number of k-means clusters [default: 25].
    #[arg(long, global = true)]
    k: Option<usize>,
    /// k-means restarts [default: 20].
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Win-count floor for clustering [default: 5].
    #[arg(long = "min-wins", global = true)]
    min_wins: Option<usize>,
    /// Entropy edge of the outlier rectangle (nats).
    #[arg(long = "entropy-threshold", global = true)]
    entropy_threshold: Option<f64>,
    /// log10 mean net loss edge of the outlier rectangle.
    #[arg(long = "loss-threshold", global = true)]
    loss_threshold: Option<f64>,
    /// Rectangle size when thresholds are not given [default: 9].
    #[arg(long = "calibrate-top-k", global = true)]
    calibrate_top_k: Option<usize>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Players to simulate: flagged, expansion, flagged-and-expansion, or a
    /// comma-separated id list.
    #[arg(long, global = true)]
    players: Option<PlayerSelection>,
    /// Per-win sampler: fast or ticket-loop.
    #[arg(long, global = true, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Also write every replicate total.
    #[arg(long = "dump-totals", global = true)]
    dump_totals: bool,
    /// TOML configuration; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "fast" => Ok(Engine::Fast),
        "ticket-loop" => Ok(Engine::TicketLoop),
        other => Err(format!("unknown engine {other:?} (expected fast or ticket-loop)")),
    }
}

fn resolve_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if c.claims.is_some() {
        cfg.claims = c.claims.clone();
    }
    if c.prizes.is_some() {
        cfg.prizes = c.prizes.clone();
    }
    if c.mapping.is_some() {
        cfg.mapping = c.mapping.clone();
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = c.replicates {
        cfg.constants.replicates = r;
    }
    if let Some(l) = c.level {
        cfg.constants.interval_level = l;
    }
    if let Some(k) = c.k {
        cfg.constants.cluster_k = k;
    }
    if let Some(r) = c.restarts {
        cfg.cluster.restarts = r;
    }
    if let Some(m) = c.min_wins {
        cfg.cluster.min_wins = m;
    }
    if c.entropy_threshold.is_some() {
        cfg.flag.entropy_threshold = c.entropy_threshold;
    }
    if c.loss_threshold.is_some() {
        cfg.flag.loss_threshold = c.loss_threshold;
    }
    if let Some(k) = c.calibrate_top_k {
        cfg.flag.calibrate_top_k = k;
    }
    if let Some(p) = &c.players {
        cfg.simulate.players = p.clone();
    }
    if let Some(e) = c.engine {
        cfg.simulate.engine = e;
    }
    if c.dump_totals {
        cfg.simulate.dump_totals = true;
    }
    cfg.threads = c.threads;
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg = cfg.with_overlay(&text).with_context(|| format!("applying {}", path.display()))?;
    }
    Ok(cfg)
}

fn run(command: Command, cfg: &RunConfig) -> anyhow::Result<StageReport> {
    let report = match command {
        Command::Ingest => cmd_ingest(cfg),
        Command::Screen => cmd_screen(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Cluster => cmd_cluster(cfg),
        Command::Synth => cmd_synth(cfg),
        Command::Pipeline => cmd_pipeline(cfg),
    }?;
    Ok(report)
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
    let result = resolve_config(&cli.common).and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(report) => {
            for line in &report.messages {
                println!("{line}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
