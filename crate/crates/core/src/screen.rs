//! First-stage screen: expected net gain under the geometric purchase model,
//! store entropy, the log loss transform and the rectangle outlier rule.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::ingest::{PlayerProfile, Profiles};
use crate::money::Cents;
use crate::prizes::ModelConstants;

#[derive(Debug, Error, PartialEq)]
pub enum ScreenError {
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
}

/// Per-player screening statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub player_id: String,
    pub win_count: usize,
    pub store_count: usize,
    pub total_reported_winnings: Cents,
    pub mean_net_gain: Cents,
    pub per_win_gains: Vec<Cents>,
    /// Store entropy in nats.
    pub entropy: f64,
    pub log_mean_net_loss: f64,
    pub flagged: bool,
}

/// Expected spend net of small prizes needed to land one recorded win:
/// `E[N] · C̄ · (1 − E[Rs])` with `E[N] = 1/p`.
pub fn expected_cost_per_win(constants: &ModelConstants) -> f64 {
    (1.0 / constants.p_big_default) * constants.mean_ticket_cost * (1.0 - constants.small_return_rate)
}

/// Expected net gain attached to one recorded prize, rounded to the cent.
pub fn mean_net_gain_per_win(prize_amount: Cents, constants: &ModelConstants) -> Cents {
    Cents::from_dollars(prize_amount.dollars() - expected_cost_per_win(constants))
}

/// Sum of the per-win expected net gains of a player, with the per-win terms.
pub fn total_mean_net_gain(profile: &PlayerProfile, constants: &ModelConstants) -> (Cents, Vec<Cents>) {
    let per_win: Vec<Cents> = profile.wins.iter().map(|w| mean_net_gain_per_win(w.prize_amount, constants)).collect();
    (per_win.iter().sum(), per_win)
}

/// `log10` of the expected loss; players expected to lose less than a dollar
/// (or to come out ahead) map to 0.
pub fn log_mean_net_loss(mean_net_gain: Cents) -> f64 {
    let dollars = mean_net_gain.dollars();
    if dollars < -1.0 {
        (-dollars).log10()
    } else {
        0.0
    }
}

/// Shannon entropy (nats) of a count distribution.
///
/// Evaluated as `ln W − Σ c·ln c / W`, which is exact for single-store and
/// one-win-per-store players, then clamped into `[0, ln N]`.
pub fn entropy_of_counts<I: IntoIterator<Item = u32>>(counts: I) -> f64 {
    let mut total = 0u64;
    let mut n = 0usize;
    let mut c_ln_c = 0.0;
    for c in counts.into_iter().filter(|&c| c > 0) {
        total += u64::from(c);
        n += 1;
        let c = f64::from(c);
        c_ln_c += c * c.ln();
    }
    if n <= 1 {
        return 0.0;
    }
    let w = total as f64;
    let h = w.ln() - c_ln_c / w;
    h.clamp(0.0, (n as f64).ln())
}

/// Entropy of a player's store distribution, natural log.
pub fn entropy(profile: &PlayerProfile) -> f64 {
    entropy_of_counts(profile.store_counts.values().copied())
}

/// Entropy in an arbitrary logarithm base.
pub fn entropy_in_base(profile: &PlayerProfile, base: f64) -> f64 {
    entropy(profile) / base.ln()
}

/// Screens one player; `flagged` is left false.
pub fn screen_profile(profile: &PlayerProfile, constants: &ModelConstants) -> ScreeningResult {
    let (mean_net_gain, per_win_gains) = total_mean_net_gain(profile, constants);
    ScreeningResult {
        player_id: profile.player_id.clone(),
        win_count: profile.win_count(),
        store_count: profile.store_count(),
        total_reported_winnings: profile.total_reported_winnings,
        mean_net_gain,
        per_win_gains,
        entropy: entropy(profile),
        log_mean_net_loss: log_mean_net_loss(mean_net_gain),
        flagged: false,
    }
}

/// Screens all players, ordered by player id.
pub fn screen_all(profiles: &Profiles, constants: &ModelConstants, exec: Execution) -> Vec<ScreeningResult> {
    let list: Vec<&PlayerProfile> = profiles.values().collect();
    exec.map_slice(&list, |p| screen_profile(p, constants))
}

/// Step-function ECDF of entropy over players with at least `min_wins` wins:
/// one point per distinct entropy value with the fraction of players at or
/// below it.
pub fn entropy_ecdf(results: &[ScreeningResult], min_wins: usize) -> Vec<(f64, f64)> {
    let mut values: Vec<f64> = results.iter().filter(|r| r.win_count >= min_wins).map(|r| r.entropy).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

/// Pearson correlation between log loss and entropy over players with at
/// least `min_wins` wins.
pub fn correlation_logloss_entropy(results: &[ScreeningResult], min_wins: usize) -> Result<f64, ScreenError> {
    let pairs: Vec<(f64, f64)> =
        results.iter().filter(|r| r.win_count >= min_wins).map(|r| (r.log_mean_net_loss, r.entropy)).collect();
    pearson(&pairs)
}

/// Pearson correlation using running co-moments.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64, ScreenError> {
    if pairs.len() < 2 {
        return Err(ScreenError::UndefinedCorrelation("fewer than two points"));
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let n = (i + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(ScreenError::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Rectangle rule: flag players at or beyond both thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagRule {
    pub entropy_min: f64,
    pub loss_min: f64,
}

impl FlagRule {
    pub fn contains(&self, r: &ScreeningResult) -> bool {
        r.entropy >= self.entropy_min && r.log_mean_net_loss >= self.loss_min
    }
}

pub fn flag_outliers(results: &[ScreeningResult], rule: &FlagRule) -> BTreeSet<String> {
    results.iter().filter(|r| rule.contains(r)).map(|r| r.player_id.clone()).collect()
}

/// Sets `flagged` on every result according to `rule`.
pub fn apply_flags(results: &mut [ScreeningResult], rule: &FlagRule) {
    for r in results {
        r.flagged = rule.contains(r);
    }
}

/// A rectangle chosen from the data to hold the joint top-k players.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rule: FlagRule,
    pub inside: usize,
}

/// Picks a rectangle whose corner sits on data values and which holds exactly
/// `k` players.
///
/// Every distinct entropy value `e` is a candidate left edge; the bottom edge
/// is the k-th largest loss among players with entropy ≥ `e`. Among
/// candidates holding exactly `k` players, the corner that is most extreme in
/// its weaker coordinate wins (largest `min(entropy rank, loss rank)`, ties
/// to higher entropy). If ties in the data make exactly `k` impossible, the
/// smallest achievable count above `k` is used.
pub fn calibrate_top_k(results: &[ScreeningResult], k: usize) -> Option<Calibration> {
    if k == 0 || results.len() < k {
        return None;
    }
    let mut entropies: Vec<f64> = results.iter().map(|r| r.entropy).collect();
    entropies.sort_by(f64::total_cmp);
    let mut losses: Vec<f64> = results.iter().map(|r| r.log_mean_net_loss).collect();
    losses.sort_by(f64::total_cmp);
    let rank = |sorted: &[f64], v: f64| sorted.partition_point(|x| *x < v) as f64 / sorted.len() as f64;

    let mut candidates: Vec<f64> = entropies.clone();
    candidates.dedup();

    let mut best: Option<(usize, f64, f64, Calibration)> = None;
    for &e in candidates.iter().rev() {
        let mut right: Vec<f64> = results.iter().filter(|r| r.entropy >= e).map(|r| r.log_mean_net_loss).collect();
        if right.len() < k {
            continue;
        }
        right.sort_by(|a, b| b.total_cmp(a));
        let l = right[k - 1];
        let rule = FlagRule { entropy_min: e, loss_min: l };
        let inside = results.iter().filter(|r| rule.contains(r)).count();
        let score = rank(&entropies, e).min(rank(&losses, l));
        let excess = inside - k;
        let better = match &best {
            None => true,
            Some((bx, bs, be, _)) => excess < *bx || (excess == *bx && (score > *bs || (score == *bs && e > *be))),
        };
        if better {
            best = Some((excess, score, e, Calibration { rule, inside }));
        }
    }
    best.map(|(_, _, _, c)| c)
}

/// Number of players whose entropy is strictly above `threshold`.
pub fn count_big_players(results: &[ScreeningResult], threshold: f64) -> usize {
    results.iter().filter(|r| r.entropy > threshold).count()
}

/// Points `(x, number of values ≥ x)` for x = 1..=max.
pub fn survival_counts<I: IntoIterator<Item = usize>>(values: I) -> Vec<(usize, usize)> {
    let mut hist: Vec<usize> = Vec::new();
    for v in values {
        if v >= hist.len() {
            hist.resize(v + 1, 0);
        }
        hist[v] += 1;
    }
    let mut out = Vec::new();
    let mut at_least = 0;
    for x in (1..hist.len()).rev() {
        at_least += hist[x];
        out.push((x, at_least));
    }
    out.reverse();
    out
}
