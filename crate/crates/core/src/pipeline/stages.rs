use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{PlayerSelection, RunConfig};
use super::output::OutDir;
use super::{PipelineError, StageReport};
use crate::cluster::{
    cluster_players, cluster_scatter, co_cluster_report, count_distinct, expansion_set, feature_vectors,
    stability_sweep, ClusterTag, CoCluster, KMeansConfig, SweepRow, FEATURE_DIM, SCATTER_MIN_ENTROPY,
};
use crate::exec::{with_threads, Execution};
use crate::ingest::{aggregate_players_by, parse_claims, read_profiles, write_claims, write_profiles, Profiles};
use crate::money::Cents;
use crate::montecarlo::{bonferroni_quantiles, simulate_player, summarize, Engine, SeedSpec, SimOptions};
use crate::prizes::{load_prize_tables, MappingConfig, PrizeRegistry, Resolver};
use crate::screen::{
    apply_flags, calibrate_top_k, correlation_logloss_entropy, count_big_players, entropy_ecdf, flag_outliers,
    screen_all, survival_counts, FlagRule, ScreeningResult,
};
use crate::synth::{generate_population, PopulationSpec};

/// File names inside the output directory.
pub mod files {
    pub const PROFILES: &str = "profiles.jsonl";
    pub const ROW_ERRORS: &str = "row_errors.csv";
    pub const INGEST_SUMMARY: &str = "ingest_summary.json";
    pub const SCREENING_CSV: &str = "screening.csv";
    pub const SCREENING_JSON: &str = "screening.json";
    pub const SCREEN_SUMMARY: &str = "screen_summary.json";
    pub const PLOT_WINS: &str = "plot_wins_survival.csv";
    pub const PLOT_STORES: &str = "plot_stores_survival.csv";
    pub const PLOT_ECDF: &str = "plot_entropy_ecdf.csv";
    pub const PLOT_LOSS_ENTROPY: &str = "plot_loss_entropy.csv";
    pub const CLUSTERS_CSV: &str = "clusters.csv";
    pub const CLUSTERS_JSON: &str = "clusters.json";
    pub const SWEEP_CSV: &str = "cluster_sweep.csv";
    pub const SWEEP_JSON: &str = "cluster_sweep.json";
    pub const PLOT_CLUSTER_SCATTER: &str = "plot_cluster_scatter.csv";
    pub const SIMULATION_CSV: &str = "simulation.csv";
    pub const SIMULATION_RAW_CSV: &str = "simulation_raw.csv";
    pub const SIMULATION_JSON: &str = "simulation.json";
    pub const SIMULATION_TOTALS: &str = "simulation_totals.csv";
    pub const SIMULATION_ERRORS: &str = "simulation_errors.csv";
    pub const SYNTH_CLAIMS: &str = "claims.csv";
    pub const SYNTH_MANIFEST: &str = "manifest.json";
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| PipelineError::format(path, e))
}

fn require<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path, PipelineError> {
    path.as_deref().ok_or_else(|| PipelineError::MissingInput(format!("no {what} file given")))
}

fn require_stage_output(out: &OutDir, name: &str, stage: &str) -> Result<(), PipelineError> {
    if out.path(name).is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput(format!("{name} not found in the output directory; run `{stage}` first")))
    }
}

fn load_registry(path: &Path) -> Result<PrizeRegistry, PipelineError> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(load_prize_tables(BufReader::new(file))?)
}

fn load_local_profiles(out: &OutDir) -> Result<Profiles, PipelineError> {
    let path = out.path(files::PROFILES);
    let file = fs::File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
    Ok(read_profiles(BufReader::new(file))?)
}

fn in_pool<T: Send>(cfg: &RunConfig, op: impl FnOnce() -> Result<T, PipelineError> + Send) -> Result<T, PipelineError> {
    cfg.validate()?;
    with_threads(cfg.threads, op)
}

#[derive(Serialize)]
struct IngestSummary {
    rows: usize,
    records: usize,
    row_errors: usize,
    players: usize,
}

/// Parses the claims file into per-player profiles.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    in_pool(cfg, || {
        let claims = require(&cfg.claims, "claims")?;
        let mut out = OutDir::create(&cfg.out)?;
        out.record_input("claims", claims)?;
        let file = fs::File::open(claims).map_err(|e| PipelineError::io(claims, e))?;
        let parsed = parse_claims(BufReader::new(file), &cfg.schema)?;
        let profiles = aggregate_players_by(&parsed.records, cfg.identity, Execution::Parallel);

        let mut buf = Vec::new();
        write_profiles(&mut buf, &profiles)?;
        out.write_with(files::PROFILES, |w| w.write_all(&buf))?;
        let errors: Vec<(usize, String)> = parsed.errors.iter().map(|e| (e.row, e.kind.to_string())).collect();
        out.write_csv(files::ROW_ERRORS, &["row", "error"], &errors)?;
        let summary = IngestSummary {
            rows: parsed.records.len() + parsed.errors.len(),
            records: parsed.records.len(),
            row_errors: parsed.errors.len(),
            players: profiles.len(),
        };
        out.write_json(files::INGEST_SUMMARY, &summary)?;

        let mut report = StageReport {
            row_errors: parsed.errors.len(),
            messages: vec![format!(
                "ingest: {} claims, {} players, {} row errors",
                summary.records, summary.players, summary.row_errors
            )],
            outputs: Vec::new(),
        };
        report.outputs = out.finish("ingest", cfg)?;
        Ok(report)
    })
}

/// One row of the screening table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRow {
    pub player_id: String,
    pub win_count: usize,
    pub store_count: usize,
    #[serde(with = "crate::money::serde_dollars")]
    pub total_reported_winnings: Cents,
    #[serde(with = "crate::money::serde_dollars")]
    pub mean_net_gain: Cents,
    pub entropy: f64,
    pub log_mean_net_loss: f64,
    pub flagged: bool,
}

impl From<&ScreeningResult> for ScreeningRow {
    fn from(r: &ScreeningResult) -> Self {
        Self {
            player_id: r.player_id.clone(),
            win_count: r.win_count,
            store_count: r.store_count,
            total_reported_winnings: r.total_reported_winnings,
            mean_net_gain: r.mean_net_gain,
            entropy: r.entropy,
            log_mean_net_loss: r.log_mean_net_loss,
            flagged: r.flagged,
        }
    }
}

const SCREENING_HEADER: [&str; 8] = [
    "player_id",
    "win_count",
    "store_count",
    "total_reported_winnings",
    "mean_net_gain",
    "entropy",
    "log_mean_net_loss",
    "flagged",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScreenSummary {
    players: usize,
    rule: FlagRule,
    /// Thresholds were chosen from the data rather than given.
    calibrated: bool,
    flagged: Vec<String>,
    /// Players with entropy above the big-player threshold.
    big_players: usize,
    big_player_entropy_threshold: f64,
    /// Floor on win count for the ECDF, correlation and zero-entropy share.
    min_wins: usize,
    players_at_floor: usize,
    zero_entropy_share: Option<f64>,
    loss_entropy_correlation: Option<f64>,
}

/// Analytic expected net gain, store entropy and the outlier rectangle.
pub fn cmd_screen(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    in_pool(cfg, || {
        let mut out = OutDir::create(&cfg.out)?;
        require_stage_output(&out, files::PROFILES, "ingest")?;
        out.record_local_input("profiles", files::PROFILES)?;
        let profiles = load_local_profiles(&out)?;
        let mut results = screen_all(&profiles, &cfg.constants, Execution::Parallel);

        let (rule, calibrated) = match (cfg.flag.entropy_threshold, cfg.flag.loss_threshold) {
            (Some(e), Some(l)) => (FlagRule { entropy_min: e, loss_min: l }, false),
            _ => {
                let rule = calibrate_top_k(&results, cfg.flag.calibrate_top_k)
                    .map(|c| c.rule)
                    .unwrap_or(FlagRule { entropy_min: f64::MAX, loss_min: f64::MAX });
                (rule, true)
            }
        };
        apply_flags(&mut results, &rule);
        let flagged: Vec<String> = flag_outliers(&results, &rule).into_iter().collect();

        let rows: Vec<ScreeningRow> = results.iter().map(ScreeningRow::from).collect();
        out.write_csv(files::SCREENING_CSV, &SCREENING_HEADER, &rows)?;
        out.write_json(files::SCREENING_JSON, &rows)?;

        let floor = cfg.cluster.min_wins;
        let at_floor: Vec<&ScreeningResult> = results.iter().filter(|r| r.win_count >= floor).collect();
        let zero_share = (!at_floor.is_empty())
            .then(|| at_floor.iter().filter(|r| r.entropy == 0.0).count() as f64 / at_floor.len() as f64);
        let summary = ScreenSummary {
            players: results.len(),
            rule,
            calibrated,
            flagged: flagged.clone(),
            big_players: count_big_players(&results, cfg.constants.big_player_entropy_threshold),
            big_player_entropy_threshold: cfg.constants.big_player_entropy_threshold,
            min_wins: floor,
            players_at_floor: at_floor.len(),
            zero_entropy_share: zero_share,
            loss_entropy_correlation: correlation_logloss_entropy(&results, floor).ok(),
        };
        out.write_json(files::SCREEN_SUMMARY, &summary)?;

        let wins = survival_counts(results.iter().map(|r| r.win_count));
        out.write_csv(files::PLOT_WINS, &["wins", "players_at_least"], &wins)?;
        let stores = survival_counts(results.iter().map(|r| r.store_count));
        out.write_csv(files::PLOT_STORES, &["stores", "players_at_least"], &stores)?;
        out.write_csv(files::PLOT_ECDF, &["entropy", "cdf"], &entropy_ecdf(&results, floor))?;
        let scatter: Vec<(&str, f64, f64, bool)> =
            results.iter().map(|r| (r.player_id.as_str(), r.entropy, r.log_mean_net_loss, r.flagged)).collect();
        out.write_csv(files::PLOT_LOSS_ENTROPY, &["player_id", "entropy", "log_mean_net_loss", "flagged"], &scatter)?;

        let mut messages = vec![format!(
            "screen: {} players, rule entropy >= {:.4} and log loss >= {:.4}{}, {} big players",
            summary.players,
            rule.entropy_min,
            rule.loss_min,
            if calibrated { " (calibrated)" } else { "" },
            summary.big_players
        )];
        messages.push(format!("flagged ({}): {}", flagged.len(), flagged.join(", ")));
        let mut report = StageReport { row_errors: 0, messages, outputs: Vec::new() };
        report.outputs = out.finish("screen", cfg)?;
        Ok(report)
    })
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    player_id: &'a str,
    cluster_index: usize,
    distance_to_centroid: f64,
    flagged: bool,
    in_expansion_set: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct ClusterSummary {
    k: usize,
    restarts: usize,
    min_wins: usize,
    clustered_players: usize,
    inertia: f64,
    centroids: Vec<[f64; FEATURE_DIM]>,
    /// Clusters holding at least one flagged player.
    co_clusters: BTreeMap<usize, CoCluster>,
    expansion: Vec<String>,
    /// Flagged players below the win-count floor.
    flagged_not_clustered: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SweepSummary {
    rows: Vec<SweepRow>,
    /// Requested k values larger than the number of distinct points.
    skipped_k: Vec<usize>,
    co_clustered: usize,
}

/// k-means on store-share features, co-cluster report, expansion set and
/// the k sweep.
pub fn cmd_cluster(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    in_pool(cfg, || {
        let mut out = OutDir::create(&cfg.out)?;
        require_stage_output(&out, files::PROFILES, "ingest")?;
        require_stage_output(&out, files::SCREEN_SUMMARY, "screen")?;
        out.record_local_input("profiles", files::PROFILES)?;
        out.record_local_input("screening", files::SCREENING_JSON)?;
        out.record_local_input("screen_summary", files::SCREEN_SUMMARY)?;
        let profiles = load_local_profiles(&out)?;
        let screen: ScreenSummary = read_json(&out.path(files::SCREEN_SUMMARY))?;
        let screening: Vec<ScreeningRow> = read_json(&out.path(files::SCREENING_JSON))?;
        let flagged: BTreeSet<String> = screen.flagged.iter().cloned().collect();
        let seeds = SeedSpec::new(cfg.master_seed);
        let k = cfg.constants.cluster_k;

        let vectors = feature_vectors(&profiles, cfg.cluster.min_wins);
        let mut summary = ClusterSummary {
            k,
            restarts: cfg.cluster.restarts,
            min_wins: cfg.cluster.min_wins,
            clustered_players: vectors.len(),
            ..ClusterSummary::default()
        };
        let mut assignments = Vec::new();
        let mut messages = Vec::new();
        let points: Vec<[f64; FEATURE_DIM]> = vectors.iter().map(|v| v.v).collect();
        let distinct = count_distinct(&points);
        if vectors.is_empty() {
            messages.push(format!("cluster: no players with at least {} wins", cfg.cluster.min_wins));
        } else {
            let clustering =
                cluster_players(&vectors, &KMeansConfig::new(k, cfg.cluster.restarts), &seeds, Execution::Parallel)?;
            summary.inertia = clustering.inertia;
            summary.centroids = clustering.centroids;
            assignments = clustering.assignments;
        }
        let report = co_cluster_report(&assignments, &flagged);
        let expansion = expansion_set(&report);
        let clustered: BTreeSet<&str> = assignments.iter().map(|a| a.player_id.as_str()).collect();
        summary.flagged_not_clustered = flagged.iter().filter(|f| !clustered.contains(f.as_str())).cloned().collect();
        summary.expansion = expansion.iter().cloned().collect();
        summary.co_clusters = report.clone();

        let rows: Vec<ClusterRow> = assignments
            .iter()
            .map(|a| ClusterRow {
                player_id: &a.player_id,
                cluster_index: a.cluster_index,
                distance_to_centroid: a.distance_to_centroid,
                flagged: flagged.contains(&a.player_id),
                in_expansion_set: expansion.contains(&a.player_id),
            })
            .collect();
        out.write_csv(
            files::CLUSTERS_CSV,
            &["player_id", "cluster_index", "distance_to_centroid", "flagged", "in_expansion_set"],
            &rows,
        )?;
        out.write_json(files::CLUSTERS_JSON, &summary)?;

        let exceptions: BTreeSet<String> = cfg.cluster.sweep_exceptions.iter().cloned().collect();
        let (ks, skipped): (Vec<usize>, Vec<usize>) = cfg.cluster.sweep_k.iter().partition(|&&k| k <= distinct);
        let sweep = if vectors.is_empty() {
            Vec::new()
        } else {
            stability_sweep(&vectors, &ks, cfg.cluster.restarts, &seeds, &flagged, &exceptions, Execution::Parallel)?
        };
        let sweep_rows: Vec<(usize, bool, usize, f64)> =
            sweep.iter().map(|r| (r.k, r.co_clustered, r.flagged_clusters, r.inertia)).collect();
        out.write_csv(files::SWEEP_CSV, &["k", "co_clustered", "flagged_clusters", "inertia"], &sweep_rows)?;
        let co = sweep.iter().filter(|r| r.co_clustered).count();
        out.write_json(
            files::SWEEP_JSON,
            &SweepSummary { rows: sweep.clone(), skipped_k: skipped.clone(), co_clustered: co },
        )?;

        let results: Vec<ScreeningResult> = screening
            .iter()
            .map(|r| ScreeningResult {
                player_id: r.player_id.clone(),
                win_count: r.win_count,
                store_count: r.store_count,
                total_reported_winnings: r.total_reported_winnings,
                mean_net_gain: r.mean_net_gain,
                per_win_gains: Vec::new(),
                entropy: r.entropy,
                log_mean_net_loss: r.log_mean_net_loss,
                flagged: r.flagged,
            })
            .collect();
        let scatter: Vec<(String, f64, f64, &'static str)> =
            cluster_scatter(&results, &assignments, &report, SCATTER_MIN_ENTROPY)
                .into_iter()
                .map(|r| (r.player_id, r.entropy, r.log_mean_net_loss, ClusterTag::as_str(r.tag)))
                .collect();
        out.write_csv(
            files::PLOT_CLUSTER_SCATTER,
            &["player_id", "entropy", "log_mean_net_loss", "cluster_tag"],
            &scatter,
        )?;

        messages.push(format!(
            "cluster: {} players at k = {}, {} flagged clusters, expansion set of {}",
            summary.clustered_players,
            k,
            report.len(),
            expansion.len()
        ));
        messages.push(format!("sweep: flagged players share one cluster for {co} of {} k values", sweep.len()));
        if !skipped.is_empty() {
            messages.push(format!("sweep: skipped k = {skipped:?} (only {distinct} distinct points)"));
        }
        let mut stage = StageReport { row_errors: 0, messages, outputs: Vec::new() };
        stage.outputs = out.finish("cluster", cfg)?;
        Ok(stage)
    })
}

/// One row of the simulation table; money in dollars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub player_id: String,
    pub group: String,
    pub win_count: usize,
    #[serde(with = "crate::money::serde_dollars")]
    pub total_reported_winnings: Cents,
    pub mean_net_gain: f64,
    #[serde(with = "crate::money::serde_dollars")]
    pub lower: Cents,
    #[serde(with = "crate::money::serde_dollars")]
    pub upper: Cents,
    pub replicates: usize,
    #[serde(rename = "B_used")]
    pub b_used: usize,
    pub master_seed: u64,
    pub lower_quantile_pct: f64,
    pub upper_quantile_pct: f64,
}

const SIMULATION_HEADER: [&str; 12] = [
    "player_id",
    "group",
    "win_count",
    "total_reported_winnings",
    "mean_net_gain",
    "lower",
    "upper",
    "replicates",
    "B_used",
    "master_seed",
    "lower_quantile_pct",
    "upper_quantile_pct",
];

const REPORT_UNIT: Cents = Cents(100_000);

impl SimulationRow {
    /// Money columns rounded to the nearest $1,000.
    pub fn rounded(&self) -> SimulationRow {
        SimulationRow {
            total_reported_winnings: self.total_reported_winnings.round_to(REPORT_UNIT),
            mean_net_gain: Cents::from_dollars(self.mean_net_gain).round_to(REPORT_UNIT).dollars(),
            lower: self.lower.round_to(REPORT_UNIT),
            upper: self.upper.round_to(REPORT_UNIT),
            ..self.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SimulationSummaryFile {
    level: f64,
    big_players: usize,
    b_used: usize,
    lower_quantile_pct: f64,
    upper_quantile_pct: f64,
    replicates: usize,
    engine: Engine,
    master_seed: u64,
    /// Unrounded rows.
    rows: Vec<SimulationRow>,
    skipped: Vec<(String, String)>,
}

fn selected_players(
    cfg: &RunConfig,
    out: &mut OutDir,
    screen: &ScreenSummary,
    profiles: &Profiles,
    messages: &mut Vec<String>,
) -> Result<Vec<(String, &'static str)>, PipelineError> {
    let mut chosen: Vec<(String, &'static str)> = Vec::new();
    let want_flagged = matches!(cfg.simulate.players, PlayerSelection::Flagged | PlayerSelection::FlaggedAndExpansion);
    let want_expansion =
        matches!(cfg.simulate.players, PlayerSelection::Expansion | PlayerSelection::FlaggedAndExpansion);
    if want_flagged {
        chosen.extend(screen.flagged.iter().map(|p| (p.clone(), "flagged")));
    }
    if want_expansion {
        if out.path(files::CLUSTERS_JSON).is_file() {
            out.record_local_input("clusters", files::CLUSTERS_JSON)?;
            let clusters: ClusterSummary = read_json(&out.path(files::CLUSTERS_JSON))?;
            chosen.extend(clusters.expansion.into_iter().map(|p| (p, "expansion")));
        } else if cfg.simulate.players == PlayerSelection::Expansion {
            return Err(PipelineError::MissingInput(format!(
                "{} not found in the output directory; run `cluster` first",
                files::CLUSTERS_JSON
            )));
        } else {
            messages.push("simulate: no cluster output, expansion set not simulated".into());
        }
    }
    if let PlayerSelection::List(ids) = &cfg.simulate.players {
        for id in ids {
            if !profiles.contains_key(id) {
                return Err(PipelineError::Config(format!("unknown player {id:?}")));
            }
            chosen.push((id.clone(), "listed"));
        }
    }
    let mut seen = BTreeSet::new();
    chosen.retain(|(p, _)| seen.insert(p.clone()));
    Ok(chosen)
}

/// Monte Carlo net-gain intervals for the selected players.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    in_pool(cfg, || {
        let mut out = OutDir::create(&cfg.out)?;
        require_stage_output(&out, files::PROFILES, "ingest")?;
        require_stage_output(&out, files::SCREEN_SUMMARY, "screen")?;
        let prizes = require(&cfg.prizes, "prize table")?;
        out.record_input("prizes", prizes)?;
        let registry = load_registry(prizes)?;
        let mapping = match &cfg.mapping {
            Some(path) => {
                out.record_input("mapping", path)?;
                let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
                MappingConfig::load(BufReader::new(file))?
            }
            None => MappingConfig::default(),
        };
        out.record_local_input("profiles", files::PROFILES)?;
        out.record_local_input("screen_summary", files::SCREEN_SUMMARY)?;
        let profiles = load_local_profiles(&out)?;
        let screen: ScreenSummary = read_json(&out.path(files::SCREEN_SUMMARY))?;

        let mut messages = Vec::new();
        let players = selected_players(cfg, &mut out, &screen, &profiles, &mut messages)?;
        let b_used = screen.big_players.max(1);
        let quantiles = bonferroni_quantiles(cfg.constants.interval_level, b_used)?;
        let resolver = Resolver::new(&registry, &mapping, cfg.constants.big_prize_threshold);
        let seeds = SeedSpec::new(cfg.master_seed);
        let opts =
            SimOptions { engine: cfg.simulate.engine, exec: Execution::Parallel, ticket_cap: cfg.simulate.ticket_cap };

        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        let mut totals_dump: Vec<(String, usize, Cents)> = Vec::new();
        for (id, group) in &players {
            let profile = match profiles.get(id) {
                Some(p) => p,
                None => {
                    skipped.push((id.clone(), "no such player in profiles".to_string()));
                    continue;
                }
            };
            let totals = match simulate_player(profile, &resolver, &cfg.constants, &seeds, &opts) {
                Ok(t) => t,
                Err(e) => {
                    skipped.push((id.clone(), e.to_string()));
                    continue;
                }
            };
            let s = summarize(&totals, quantiles, id, b_used)?;
            if cfg.simulate.dump_totals {
                totals_dump.extend(totals.iter().enumerate().map(|(k, &t)| (id.clone(), k, t)));
            }
            rows.push(SimulationRow {
                player_id: id.clone(),
                group: (*group).to_string(),
                win_count: profile.win_count(),
                total_reported_winnings: profile.total_reported_winnings,
                mean_net_gain: s.mean_net_gain,
                lower: s.lower,
                upper: s.upper,
                replicates: s.replicates,
                b_used,
                master_seed: cfg.master_seed,
                lower_quantile_pct: quantiles.lower_pct,
                upper_quantile_pct: quantiles.upper_pct,
            });
        }

        let rounded: Vec<SimulationRow> = rows.iter().map(SimulationRow::rounded).collect();
        out.write_csv(files::SIMULATION_CSV, &SIMULATION_HEADER, &rounded)?;
        out.write_csv(files::SIMULATION_RAW_CSV, &SIMULATION_HEADER, &rows)?;
        out.write_csv(files::SIMULATION_ERRORS, &["player_id", "error"], &skipped)?;
        if cfg.simulate.dump_totals {
            let dump: Vec<(&str, usize, String)> =
                totals_dump.iter().map(|(p, k, t)| (p.as_str(), *k, t.to_string())).collect();
            out.write_csv(files::SIMULATION_TOTALS, &["player_id", "replicate", "total_net_gain"], &dump)?;
        }
        out.write_json(
            files::SIMULATION_JSON,
            &SimulationSummaryFile {
                level: cfg.constants.interval_level,
                big_players: screen.big_players,
                b_used,
                lower_quantile_pct: quantiles.lower_pct,
                upper_quantile_pct: quantiles.upper_pct,
                replicates: cfg.constants.replicates,
                engine: cfg.simulate.engine,
                master_seed: cfg.master_seed,
                rows: rows.clone(),
                skipped: skipped.clone(),
            },
        )?;
        messages.push(format!(
            "simulate: {} players x {} replicates, B = {b_used}, quantiles {:.7}% / {:.7}%, {} skipped",
            rows.len(),
            cfg.constants.replicates,
            quantiles.lower_pct,
            quantiles.upper_pct,
            skipped.len()
        ));
        for (id, err) in &skipped {
            messages.push(format!("  skipped {id}: {err}"));
        }
        let mut report = StageReport { row_errors: skipped.len(), messages, outputs: Vec::new() };
        report.outputs = out.finish("simulate", cfg)?;
        Ok(report)
    })
}

/// Writes a synthetic claims file and its ground-truth manifest. The
/// population is drawn from `cfg.master_seed`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    in_pool(cfg, || {
        let prizes = require(&cfg.prizes, "prize table")?;
        let mut out = OutDir::create(&cfg.out)?;
        out.record_input("prizes", prizes)?;
        let registry = load_registry(prizes)?;
        let spec = PopulationSpec { master_seed: cfg.master_seed, ..cfg.synth.clone() };
        let corpus = generate_population(&spec, &registry, Execution::Parallel)?;
        let mut buf = Vec::new();
        write_claims(&mut buf, &corpus.records).map_err(|e| PipelineError::format(out.path(files::SYNTH_CLAIMS), e))?;
        out.write_with(files::SYNTH_CLAIMS, |w| w.write_all(&buf))?;
        out.write_json_compact(files::SYNTH_MANIFEST, &corpus.manifest)?;
        let discounters = corpus.manifest.players.iter().filter(|p| p.label == crate::synth::Label::Discounter).count();
        let mut report = StageReport {
            row_errors: 0,
            messages: vec![format!(
                "synth: {} claims, {} players ({} discounters)",
                corpus.records.len(),
                corpus.manifest.players.len(),
                discounters
            )],
            outputs: Vec::new(),
        };
        report.outputs = out.finish("synth", cfg)?;
        Ok(report)
    })
}

/// `ingest`, `screen`, `cluster` and `simulate` in sequence.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<StageReport, PipelineError> {
    let mut report = StageReport::default();
    for stage in [cmd_ingest, cmd_screen, cmd_cluster, cmd_simulate] {
        report.absorb(stage(cfg)?);
    }
    Ok(report)
}
