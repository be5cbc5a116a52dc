//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lotto_audit::ingest::{ClaimRecord, GameType, PlayerProfile};
use lotto_audit::pipeline::RunConfig;
use lotto_audit::prizes::{load_prize_tables, MappingConfig, PrizeEntry, PrizeRegistry};
use lotto_audit::Cents;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn shipped_claims() -> PathBuf {
    data_dir().join("synthetic/claims.csv")
}

pub fn shipped_manifest() -> PathBuf {
    data_dir().join("synthetic/manifest.json")
}

pub fn shipped_registry() -> PrizeRegistry {
    load_prize_tables(fs::File::open(data_dir().join("prize_tables.json")).unwrap()).unwrap()
}

pub fn shipped_mapping() -> MappingConfig {
    MappingConfig::load(fs::File::open(data_dir().join("mapping.json")).unwrap()).unwrap()
}

/// Run configuration over the shipped corpus, writing into `out`.
pub fn shipped_config(out: &Path) -> RunConfig {
    RunConfig {
        claims: Some(shipped_claims()),
        prizes: Some(data_dir().join("prize_tables.json")),
        mapping: Some(data_dir().join("mapping.json")),
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

pub fn entry(dollars: f64, probability: f64) -> PrizeEntry {
    PrizeEntry { value: Cents::from_dollars(dollars), probability }
}

pub fn claim(player: &str, lottery: &str, dollars: i64, store: &str) -> ClaimRecord {
    claim_on(player, lottery, dollars, store, NaiveDate::from_ymd_opt(2015, 6, 1).unwrap())
}

pub fn claim_on(player: &str, lottery: &str, dollars: i64, store: &str, date: NaiveDate) -> ClaimRecord {
    ClaimRecord {
        paid_date: date,
        winner_id: player.to_string(),
        lottery_name: lottery.to_string(),
        game_type: if lottery.starts_with("Pick") || lottery.contains("Ball") {
            GameType::Online
        } else {
            GameType::ScratchOff
        },
        prize_amount: Cents::from_whole_dollars(dollars),
        retailer_name: store.to_string(),
        retailer_address: format!("{} Main St", store.len()),
        city: "Springfield".into(),
        county: "Clark".into(),
        claim_center: "Central".into(),
    }
}

/// A player with `per_store` wins at each of `stores` distinct stores.
pub fn spread_profile(player: &str, stores: usize, per_store: usize, dollars: i64) -> PlayerProfile {
    let wins = (0..stores)
        .flat_map(|s| (0..per_store).map(move |_| claim(player, "Pick 4 Day", dollars, &format!("Store {s}"))))
        .collect();
    PlayerProfile::from_wins(player, wins)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Central fourth moment.
pub fn m4(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64
}

/// Two-sample Kolmogorov-Smirnov statistic; handles ties by stepping over
/// equal values in both samples at once.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Smallest within-cluster sum of squares over every partition of `points`
/// into exactly `k` non-empty groups.
pub fn brute_force_inertia<const D: usize>(points: &[[f64; D]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    // restricted growth strings enumerate each partition once
    fn rec<const D: usize>(
        i: usize,
        used: usize,
        k: usize,
        points: &[[f64; D]],
        labels: &mut Vec<usize>,
        best: &mut f64,
    ) {
        let n = points.len();
        if n - i < k - used {
            return;
        }
        if i == n {
            *best = best.min(partition_sse(points, labels, k));
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels[i] = l;
            rec(i + 1, used.max(l + 1), k, points, labels, best);
        }
    }
    rec(0, 0, k, points, &mut labels, &mut best);
    best
}

fn partition_sse<const D: usize>(points: &[[f64; D]], labels: &[usize], k: usize) -> f64 {
    let mut sums = vec![[0f64; D]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for d in 0..D {
            sums[l][d] += p[d];
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| (0..D).map(|d| (p[d] - sums[l][d] / counts[l] as f64).powi(2)).sum::<f64>())
        .sum()
}

/// Relative path to contents of every file below `root`.
pub fn read_tree(root: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}
