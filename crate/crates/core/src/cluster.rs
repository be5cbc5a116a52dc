//! Store-behavior features and k-means clustering.
//!
//! Each player is summarised by six proportions: the share of wins at each of
//! their five most-used stores (descending) and the share at all other
//! stores. Players sharing a cluster with flagged players form the expansion
//! set of second-stage suspects.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::ingest::{PlayerProfile, Profiles, StoreKey};
use crate::montecarlo::SeedSpec;
use crate::screen::ScreeningResult;

pub const FEATURE_DIM: usize = 6;
/// Players below this many wins are left out of clustering by default.
pub const DEFAULT_MIN_WINS: usize = 5;
/// Entropy floor for the cluster scatter plot data.
pub const SCATTER_MIN_ENTROPY: f64 = 2.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("restarts must be at least 1")]
    ZeroRestarts,
    #[error("k = {k} exceeds the {distinct} distinct points")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub player_id: String,
    pub v: [f64; FEATURE_DIM],
}

/// Top-five store shares in descending order (ties by store key), then the
/// share of all remaining stores.
pub fn feature_vector(profile: &PlayerProfile) -> FeatureVector {
    let mut counts: Vec<(&StoreKey, u32)> = profile.store_counts.iter().map(|(k, &c)| (k, c)).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let total: u32 = counts.iter().map(|c| c.1).sum();
    let mut v = [0.0; FEATURE_DIM];
    if total == 0 {
        return FeatureVector { player_id: profile.player_id.clone(), v };
    }
    let w = f64::from(total);
    let mut top = 0u32;
    for (slot, (_, c)) in v.iter_mut().zip(counts.iter().take(FEATURE_DIM - 1)) {
        *slot = f64::from(*c) / w;
        top += c;
    }
    // from integer counts, so (0.1 × 5, 0.5) comes out exact
    v[FEATURE_DIM - 1] = f64::from(total - top) / w;
    FeatureVector { player_id: profile.player_id.clone(), v }
}

/// Feature vectors of every player with at least `min_wins` wins, in player
/// id order.
pub fn feature_vectors(profiles: &Profiles, min_wins: usize) -> Vec<FeatureVector> {
    profiles.values().filter(|p| p.win_count() >= min_wins && p.win_count() > 0).map(feature_vector).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, restarts: usize) -> Self {
        Self { k, restarts, max_iter: 500, tol: 1e-8 }
    }
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self::new(25, 20)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit<const D: usize> {
    pub centroids: Vec<[f64; D]>,
    pub labels: Vec<usize>,
    /// Squared distance of each point to its centroid.
    pub sq_distances: Vec<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    /// Index of the restart that produced this fit.
    pub restart: usize,
}

pub fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid of every point (ties to the lowest index) and its
/// squared distance.
pub fn assign<const D: usize>(points: &[[f64; D]], centroids: &[[f64; D]], exec: Execution) -> Vec<(usize, f64)> {
    exec.map_slice(points, |p| nearest(p, centroids))
}

fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn count_distinct<const D: usize>(points: &[[f64; D]]) -> usize {
    let keys: BTreeSet<[u64; D]> = points.iter().map(|p| p.map(|x| if x == 0.0 { 0 } else { x.to_bits() })).collect();
    keys.len()
}

fn validate<const D: usize>(points: &[[f64; D]], k: usize) -> Result<(), ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if let Some(i) = points.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(ClusterError::NonFinite(i));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(ClusterError::TooFewDistinct { k, distinct });
    }
    Ok(())
}

/// Distance-weighted seeding: the first center is uniform over points, each
/// later one is drawn with probability proportional to its squared distance
/// from the nearest chosen center. Requires `k` ≤ distinct points.
pub fn kmeans_plus_plus<const D: usize, R: Rng + ?Sized>(points: &[[f64; D]], k: usize, rng: &mut R) -> Vec<[f64; D]> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let c = points[pick.expect("fewer distinct points than k")];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Means of the points in each cluster. An empty cluster is moved onto the
/// point farthest from its own centroid (lowest index on ties), each such
/// point used at most once.
fn update_centroids<const D: usize>(
    points: &[[f64; D]],
    assignment: &[(usize, f64)],
    old: &[[f64; D]],
) -> Vec<[f64; D]> {
    let k = old.len();
    let mut sums = vec![[0.0; D]; k];
    let mut counts = vec![0usize; k];
    // fixed point order keeps the sums reproducible
    for (p, &(j, _)) in points.iter().zip(assignment) {
        counts[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut dist: Vec<f64> = assignment.iter().map(|a| a.1).collect();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        if counts[j] > 0 {
            let n = counts[j] as f64;
            out.push(sums[j].map(|s| s / n));
        } else {
            let mut far = 0;
            for (i, &d) in dist.iter().enumerate() {
                if d > dist[far] {
                    far = i;
                }
            }
            dist[far] = -1.0;
            out.push(points[far]);
        }
    }
    out
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing, the relative inertia change drops below `cfg.tol`, or
/// `cfg.max_iter` assignment steps have run.
pub fn lloyd<const D: usize>(
    points: &[[f64; D]],
    init: Vec<[f64; D]>,
    cfg: &KMeansConfig,
    exec: Execution,
) -> KMeansFit<D> {
    let mut centroids = init;
    let mut labels: Vec<usize> = Vec::new();
    let mut sq_distances = Vec::new();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter.max(1) {
        iterations += 1;
        let a = assign(points, &centroids, exec);
        let inertia: f64 = a.iter().map(|x| x.1).sum();
        trace.push(inertia);
        let new_labels: Vec<usize> = a.iter().map(|x| x.0).collect();
        let fixpoint = new_labels == labels;
        labels = new_labels;
        sq_distances = a.iter().map(|x| x.1).collect();
        let small_change = prev.is_finite() && (prev - inertia).abs() <= cfg.tol * prev.max(f64::MIN_POSITIVE);
        if fixpoint || small_change || iterations == cfg.max_iter {
            break;
        }
        prev = inertia;
        centroids = update_centroids(points, &a, &centroids);
    }
    let inertia = *trace.last().expect("at least one iteration");
    KMeansFit { centroids, labels, sq_distances, inertia, iterations, inertia_trace: trace, restart: 0 }
}

/// Best of `cfg.restarts` seeded Lloyd runs (lowest inertia, then lowest
/// restart index). Restart `r` draws its seeding from the auxiliary stream
/// `("kmeans/k=<k>", r)`, so the result depends only on the points, `cfg`
/// and the master seed.
pub fn kmeans<const D: usize>(
    points: &[[f64; D]],
    cfg: &KMeansConfig,
    seeds: &SeedSpec,
    exec: Execution,
) -> Result<KMeansFit<D>, ClusterError> {
    validate(points, cfg.k)?;
    if cfg.restarts == 0 {
        return Err(ClusterError::ZeroRestarts);
    }
    let label = format!("kmeans/k={}", cfg.k);
    let fits = exec.map_range(cfg.restarts, |r| {
        let mut rng = seeds.aux_stream(&label, r as u64);
        let init = kmeans_plus_plus(points, cfg.k, &mut rng);
        // restarts already run in parallel; keep each one sequential
        let mut fit = lloyd(points, init, cfg, Execution::Sequential);
        fit.restart = r;
        fit
    });
    let best =
        fits.into_iter().reduce(|best, f| if f.inertia < best.inertia { f } else { best }).expect("restarts >= 1");
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub player_id: String,
    pub cluster_index: usize,
    pub distance_to_centroid: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayerClustering {
    pub k: usize,
    pub centroids: Vec<[f64; FEATURE_DIM]>,
    pub assignments: Vec<ClusterAssignment>,
    pub inertia: f64,
}

pub fn cluster_players(
    vectors: &[FeatureVector],
    cfg: &KMeansConfig,
    seeds: &SeedSpec,
    exec: Execution,
) -> Result<PlayerClustering, ClusterError> {
    let points: Vec<[f64; FEATURE_DIM]> = vectors.iter().map(|f| f.v).collect();
    let fit = kmeans(&points, cfg, seeds, exec)?;
    let assignments = vectors
        .iter()
        .zip(fit.labels.iter().zip(&fit.sq_distances))
        .map(|(f, (&c, &d))| ClusterAssignment {
            player_id: f.player_id.clone(),
            cluster_index: c,
            distance_to_centroid: d.sqrt(),
        })
        .collect();
    Ok(PlayerClustering { k: cfg.k, centroids: fit.centroids, assignments, inertia: fit.inertia })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoCluster {
    pub flagged: Vec<String>,
    pub unflagged: Vec<String>,
}

/// Members of every cluster that holds at least one flagged player.
pub fn co_cluster_report(assignments: &[ClusterAssignment], flagged: &BTreeSet<String>) -> BTreeMap<usize, CoCluster> {
    let hit: BTreeSet<usize> =
        assignments.iter().filter(|a| flagged.contains(&a.player_id)).map(|a| a.cluster_index).collect();
    let mut report: BTreeMap<usize, CoCluster> = hit.iter().map(|&c| (c, CoCluster::default())).collect();
    for a in assignments {
        if let Some(entry) = report.get_mut(&a.cluster_index) {
            if flagged.contains(&a.player_id) {
                entry.flagged.push(a.player_id.clone());
            } else {
                entry.unflagged.push(a.player_id.clone());
            }
        }
    }
    for entry in report.values_mut() {
        entry.flagged.sort();
        entry.unflagged.sort();
    }
    report
}

/// Unflagged members of clusters containing flagged players.
pub fn expansion_set(report: &BTreeMap<usize, CoCluster>) -> BTreeSet<String> {
    report.values().flat_map(|c| c.unflagged.iter().cloned()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// All considered flagged players share one cluster.
    pub co_clustered: bool,
    /// Number of distinct clusters holding considered flagged players.
    pub flagged_clusters: usize,
    pub inertia: f64,
    /// Cluster of each considered flagged player.
    pub membership: BTreeMap<String, usize>,
}

/// Clusters the vectors at each k and reports whether the flagged players
/// (minus `exceptions`, and ignoring any not among the vectors) land in a
/// single cluster.
pub fn stability_sweep(
    vectors: &[FeatureVector],
    k_values: &[usize],
    restarts: usize,
    seeds: &SeedSpec,
    flagged: &BTreeSet<String>,
    exceptions: &BTreeSet<String>,
    exec: Execution,
) -> Result<Vec<SweepRow>, ClusterError> {
    k_values
        .iter()
        .map(|&k| {
            let clustering = cluster_players(vectors, &KMeansConfig::new(k, restarts), seeds, exec)?;
            let membership: BTreeMap<String, usize> = clustering
                .assignments
                .iter()
                .filter(|a| flagged.contains(&a.player_id) && !exceptions.contains(&a.player_id))
                .map(|a| (a.player_id.clone(), a.cluster_index))
                .collect();
            let distinct: BTreeSet<usize> = membership.values().copied().collect();
            Ok(SweepRow {
                k,
                co_clustered: distinct.len() <= 1,
                flagged_clusters: distinct.len(),
                inertia: clustering.inertia,
                membership,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterTag {
    FlagCluster,
    OtherCluster,
    None,
}

impl ClusterTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterTag::FlagCluster => "flag-cluster",
            ClusterTag::OtherCluster => "other-cluster",
            ClusterTag::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub player_id: String,
    pub entropy: f64,
    pub log_mean_net_loss: f64,
    pub tag: ClusterTag,
}

/// Entropy against log loss for players with entropy ≥ `min_entropy`,
/// tagged by whether they share a cluster with a flagged player. Players
/// that were not clustered are tagged `none`.
pub fn cluster_scatter(
    results: &[ScreeningResult],
    assignments: &[ClusterAssignment],
    report: &BTreeMap<usize, CoCluster>,
    min_entropy: f64,
) -> Vec<ScatterRow> {
    let cluster_of: BTreeMap<&str, usize> =
        assignments.iter().map(|a| (a.player_id.as_str(), a.cluster_index)).collect();
    results
        .iter()
        .filter(|r| r.entropy >= min_entropy)
        .map(|r| {
            let tag = match cluster_of.get(r.player_id.as_str()) {
                Some(c) if report.contains_key(c) => ClusterTag::FlagCluster,
                Some(_) => ClusterTag::OtherCluster,
                None => ClusterTag::None,
            };
            ScatterRow {
                player_id: r.player_id.clone(),
                entropy: r.entropy,
                log_mean_net_loss: r.log_mean_net_loss,
                tag,
            }
        })
        .collect()
}
