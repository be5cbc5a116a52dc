use serde::{Deserialize, Serialize};

use super::SimError;
use crate::money::Cents;

/// Lower and upper interval quantiles, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePair {
    pub lower_pct: f64,
    pub upper_pct: f64,
}

impl QuantilePair {
    pub fn lower_fraction(&self) -> f64 {
        self.lower_pct / 100.0
    }

    pub fn upper_fraction(&self) -> f64 {
        self.upper_pct / 100.0
    }
}

/// Bonferroni-adjusted tail quantiles of a central `level` interval shared by
/// `b` simultaneous players: each tail of `(1 − level)/2` is divided by `b`.
pub fn bonferroni_quantiles(level: f64, b: usize) -> Result<QuantilePair, SimError> {
    if b == 0 {
        return Err(SimError::ZeroComparisons);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(SimError::BadLevel(level));
    }
    let tail_pct = (1.0 - level) / 2.0 * 100.0;
    let adjusted = tail_pct / b as f64;
    Ok(QuantilePair { lower_pct: adjusted, upper_pct: 100.0 - adjusted })
}

/// 1-based nearest-rank order statistic index for quantile `q` (a fraction)
/// of `n` sorted values: `⌈q·n⌉` clamped to `[1, n]`.
pub fn nearest_rank(q: f64, n: usize) -> usize {
    // shave representation error so that e.g. 0.1 * 10 selects rank 1
    let r = (q * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

/// Per-player summary of simulated total net gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub player_id: String,
    pub replicates: usize,
    /// Dollars.
    pub mean_net_gain: f64,
    pub lower: Cents,
    pub upper: Cents,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub b_used: usize,
}

impl SimulationSummary {
    pub fn mean_cents(&self) -> Cents {
        Cents::from_dollars(self.mean_net_gain)
    }
}

/// Mean and nearest-rank interval of per-replicate totals (in cents).
/// Quantiles in `quantiles` are percentages.
pub fn summarize(
    totals: &[Cents],
    quantiles: QuantilePair,
    player_id: &str,
    b: usize,
) -> Result<SimulationSummary, SimError> {
    if totals.is_empty() {
        return Err(SimError::EmptyTotals);
    }
    let n = totals.len();
    let sum: i128 = totals.iter().map(|t| i128::from(t.0)).sum();
    let mean = sum as f64 / n as f64 / 100.0;
    let mut sorted = totals.to_vec();
    sorted.sort_unstable();
    let lo = sorted[nearest_rank(quantiles.lower_fraction(), n) - 1];
    let hi = sorted[nearest_rank(quantiles.upper_fraction(), n) - 1];
    Ok(SimulationSummary {
        player_id: player_id.to_string(),
        replicates: n,
        mean_net_gain: mean,
        lower: lo,
        upper: hi,
        lower_quantile: quantiles.lower_pct,
        upper_quantile: quantiles.upper_pct,
        b_used: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        let q = bonferroni_quantiles(0.80, 1).unwrap();
        assert!((q.lower_pct - 10.0).abs() < 1e-12 && (q.upper_pct - 90.0).abs() < 1e-12);
        let q = bonferroni_quantiles(0.90, 2).unwrap();
        assert!((q.lower_pct - 2.5).abs() < 1e-12 && (q.upper_pct - 97.5).abs() < 1e-12);
        assert_eq!(bonferroni_quantiles(0.8, 0), Err(SimError::ZeroComparisons));
        assert!(bonferroni_quantiles(1.0, 3).is_err());
    }

    #[test]
    fn nearest_rank_rule() {
        assert_eq!(nearest_rank(0.000023148, 60_000), 2);
        let q = bonferroni_quantiles(0.80, 4320).unwrap();
        assert_eq!(nearest_rank(q.lower_fraction(), 60_000), 2);
        assert_eq!(nearest_rank(q.upper_fraction(), 60_000), 59_999);
        assert_eq!(nearest_rank(0.1, 10), 1);
        assert_eq!(nearest_rank(0.0, 10), 1);
        assert_eq!(nearest_rank(1.0, 10), 10);
    }

    #[test]
    fn constant_totals() {
        let s = summarize(&[Cents(-500); 3], bonferroni_quantiles(0.8, 1).unwrap(), "p", 1).unwrap();
        assert_eq!(s.mean_net_gain, -5.0);
        assert_eq!((s.lower, s.upper), (Cents(-500), Cents(-500)));
        assert_eq!(summarize(&[], bonferroni_quantiles(0.8, 1).unwrap(), "p", 1), Err(SimError::EmptyTotals));
    }

    #[test]
    fn symmetric_totals_give_symmetric_interval() {
        let totals: Vec<Cents> = (-500..=500).map(Cents).collect();
        let s = summarize(&totals, bonferroni_quantiles(0.8, 1).unwrap(), "p", 1).unwrap();
        assert_eq!(s.mean_net_gain, 0.0);
        assert_eq!(s.lower.0, -s.upper.0);
    }
}
