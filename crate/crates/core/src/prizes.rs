//! Lottery games as discrete prize tables, return rates, model constants and
//! mapping claim records onto representative games.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ClaimRecord, GameType};
use crate::money::{serde_dollars, Cents};

/// Slack allowed on the `Σ probability ≤ 1` check.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PrizeError {
    #[error("game {game:?}: prize probabilities sum to {sum}, more than 1")]
    ProbabilitySum { game: String, sum: f64 },
    #[error("game {game:?}: ticket cost must be positive")]
    NonPositiveCost { game: String },
    #[error("game {game:?}: prize values must be positive")]
    NonPositiveValue { game: String },
    #[error("game {game:?}: prize value {value} listed twice")]
    DuplicateValue { game: String, value: Cents },
    #[error("game {game:?}: probability {probability} outside (0, 1]")]
    BadProbability { game: String, probability: f64 },
    #[error("game {0:?} defined twice")]
    DuplicateGame(String),
    #[error("mapping rule {index}: {message}")]
    BadRule { index: usize, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid model constants: {0}")]
    Constants(String),
    #[error("invalid return-rate inputs: {0}")]
    ReturnRates(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrizeEntry {
    #[serde(with = "serde_dollars")]
    pub value: Cents,
    pub probability: f64,
}

/// One game: a ticket price and a categorical distribution over prizes.
/// Whatever probability mass the entries leave over is "no prize".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrizeTable", into = "RawPrizeTable")]
pub struct PrizeTable {
    game_name: String,
    game_type: Option<GameType>,
    ticket_cost: Cents,
    entries: Vec<PrizeEntry>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawPrizeTable {
    game_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    game_type: Option<GameType>,
    #[serde(with = "serde_dollars")]
    ticket_cost: Cents,
    entries: Vec<PrizeEntry>,
}

impl TryFrom<RawPrizeTable> for PrizeTable {
    type Error = PrizeError;
    fn try_from(raw: RawPrizeTable) -> Result<Self, PrizeError> {
        PrizeTable::new(raw.game_name, raw.game_type, raw.ticket_cost, raw.entries)
    }
}

impl From<PrizeTable> for RawPrizeTable {
    fn from(t: PrizeTable) -> Self {
        RawPrizeTable { game_name: t.game_name, game_type: t.game_type, ticket_cost: t.ticket_cost, entries: t.entries }
    }
}

impl PrizeTable {
    pub fn new(
        game_name: impl Into<String>,
        game_type: Option<GameType>,
        ticket_cost: Cents,
        mut entries: Vec<PrizeEntry>,
    ) -> Result<Self, PrizeError> {
        let game = game_name.into();
        if !ticket_cost.is_positive() {
            return Err(PrizeError::NonPositiveCost { game });
        }
        let mut sum = 0.0;
        for e in &entries {
            if !e.value.is_positive() {
                return Err(PrizeError::NonPositiveValue { game });
            }
            if !(e.probability > 0.0 && e.probability <= 1.0) {
                return Err(PrizeError::BadProbability { game, probability: e.probability });
            }
            sum += e.probability;
        }
        if sum > 1.0 + PROBABILITY_SUM_TOLERANCE {
            return Err(PrizeError::ProbabilitySum { game, sum });
        }
        entries.sort_by_key(|e| e.value);
        if let Some(w) = entries.windows(2).find(|w| w[0].value == w[1].value) {
            return Err(PrizeError::DuplicateValue { game, value: w[0].value });
        }
        Ok(Self { game_name: game, game_type, ticket_cost, entries })
    }

    pub fn game_name(&self) -> &str {
        &self.game_name
    }

    pub fn game_type(&self) -> Option<GameType> {
        self.game_type
    }

    pub fn ticket_cost(&self) -> Cents {
        self.ticket_cost
    }

    /// Prize entries sorted by value.
    pub fn entries(&self) -> &[PrizeEntry] {
        &self.entries
    }

    /// Probability that one ticket wins a recorded (> $600) prize.
    pub fn p_big(&self) -> f64 {
        self.p_big_above(Cents::from_whole_dollars(600))
    }

    /// Probability that one ticket wins strictly more than `threshold`.
    pub fn p_big_above(&self, threshold: Cents) -> f64 {
        self.entries.iter().filter(|e| e.value > threshold).map(|e| e.probability).sum()
    }

    /// Expected small-prize (≤ $600) winnings per dollar spent.
    pub fn small_return_rate(&self) -> f64 {
        self.small_return_rate_below(Cents::from_whole_dollars(600))
    }

    pub fn small_return_rate_below(&self, threshold: Cents) -> f64 {
        let ev: f64 =
            self.entries.iter().filter(|e| e.value <= threshold).map(|e| e.value.dollars() * e.probability).sum();
        ev / self.ticket_cost.dollars()
    }

    /// Expected winnings of all sizes per dollar spent.
    pub fn total_return_rate(&self) -> f64 {
        let ev: f64 = self.entries.iter().map(|e| e.value.dollars() * e.probability).sum();
        ev / self.ticket_cost.dollars()
    }

    /// Recorded-prize entries, for drawing a recorded win amount.
    pub fn big_entries(&self, threshold: Cents) -> impl Iterator<Item = &PrizeEntry> {
        self.entries.iter().filter(move |e| e.value > threshold)
    }
}

/// Games keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegistryFile", into = "RegistryFile")]
pub struct PrizeRegistry {
    pub source: Option<String>,
    tables: BTreeMap<String, PrizeTable>,
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    tables: Vec<PrizeTable>,
}

impl TryFrom<RegistryFile> for PrizeRegistry {
    type Error = PrizeError;
    fn try_from(f: RegistryFile) -> Result<Self, PrizeError> {
        let mut reg = PrizeRegistry { source: f.source, tables: BTreeMap::new() };
        for t in f.tables {
            reg.insert(t)?;
        }
        Ok(reg)
    }
}

impl From<PrizeRegistry> for RegistryFile {
    fn from(r: PrizeRegistry) -> Self {
        RegistryFile { source: r.source, tables: r.tables.into_values().collect() }
    }
}

impl PrizeRegistry {
    pub fn from_tables(tables: impl IntoIterator<Item = PrizeTable>) -> Result<Self, PrizeError> {
        let mut reg = PrizeRegistry::default();
        for t in tables {
            reg.insert(t)?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, table: PrizeTable) -> Result<(), PrizeError> {
        if self.tables.contains_key(table.game_name()) {
            return Err(PrizeError::DuplicateGame(table.game_name.clone()));
        }
        self.tables.insert(table.game_name.clone(), table);
        Ok(())
    }

    pub fn get(&self, game: &str) -> Option<&PrizeTable> {
        self.tables.get(game)
    }

    pub fn tables(&self) -> impl Iterator<Item = &PrizeTable> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

/// Loads a prize-table file (`{"source": ..., "tables": [...]}`), validating
/// every table.
pub fn load_prize_tables<R: Read>(source: R) -> Result<PrizeRegistry, PrizeError> {
    serde_json::from_reader(source).map_err(|e| PrizeError::Parse(e.to_string()))
}

/// Yearly aggregate return rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnRates {
    pub year: i32,
    pub g_all: f64,
    pub g_big: f64,
    pub s_all: f64,
    /// Share of spend returned as prizes of any size.
    pub r: f64,
    /// Share of spend returned as small (unrecorded) prizes.
    pub r_small: f64,
}

impl ReturnRates {
    pub fn g_small(&self) -> f64 {
        self.g_all - self.g_big
    }
}

/// Derives return rates from yearly totals of all prizes paid, recorded
/// prizes paid and ticket sales.
pub fn return_rates_from_totals(year: i32, g_all: f64, g_big: f64, s_all: f64) -> Result<ReturnRates, PrizeError> {
    if !(s_all > 0.0) {
        return Err(PrizeError::ReturnRates(format!("sales must be positive, got {s_all}")));
    }
    if !(g_big >= 0.0 && g_big <= g_all) {
        return Err(PrizeError::ReturnRates(format!("need 0 <= g_big <= g_all, got g_big={g_big}, g_all={g_all}")));
    }
    Ok(ReturnRates { year, g_all, g_big, s_all, r: g_all / s_all, r_small: (g_all - g_big) / s_all })
}

/// Global constants of the expected net-gain model and run defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConstants {
    /// Average chance that a scratch-off ticket wins a recorded prize.
    pub p_big_default: f64,
    /// Average scratch-off ticket price, dollars.
    pub mean_ticket_cost: f64,
    /// Average small-prize return rate.
    pub small_return_rate: f64,
    #[serde(with = "serde_dollars")]
    pub big_prize_threshold: Cents,
    pub replicates: usize,
    pub cluster_k: usize,
    /// Entropy (nats) above which a player counts toward the Bonferroni B.
    pub big_player_entropy_threshold: f64,
    pub interval_level: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            p_big_default: 0.001226816,
            mean_ticket_cost: 14.32653,
            small_return_rate: 0.5677,
            big_prize_threshold: Cents::from_whole_dollars(600),
            replicates: 60_000,
            cluster_k: 25,
            big_player_entropy_threshold: 5f64.ln(),
            interval_level: 0.80,
        }
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<(), PrizeError> {
        let bad = |m: &str| Err(PrizeError::Constants(m.to_string()));
        if !(self.p_big_default > 0.0 && self.p_big_default <= 1.0) {
            return bad("p_big_default must lie in (0, 1]");
        }
        if !(self.mean_ticket_cost > 0.0) {
            return bad("mean_ticket_cost must be positive");
        }
        if !(self.small_return_rate > 0.0 && self.small_return_rate < 1.0) {
            return bad("small_return_rate must lie in (0, 1)");
        }
        if !self.big_prize_threshold.is_positive() {
            return bad("big_prize_threshold must be positive");
        }
        if self.replicates == 0 || self.cluster_k == 0 {
            return bad("replicates and cluster_k must be positive");
        }
        if !(self.big_player_entropy_threshold > 0.0) {
            return bad("big_player_entropy_threshold must be positive");
        }
        if !(self.interval_level > 0.0 && self.interval_level < 1.0) {
            return bad("interval_level must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One mapping rule. Exactly one of `name` or `game_type` must be present;
/// `ticket_cost` narrows a `game_type` rule to one price point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_type: Option<GameType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticket_cost: Option<f64>,
    pub game: String,
}

/// Ordered mapping rules; the first match wins.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub rules: Vec<MappingRule>,
}

impl MappingConfig {
    pub fn load<R: Read>(source: R) -> Result<Self, PrizeError> {
        let cfg: MappingConfig = serde_json::from_reader(source).map_err(|e| PrizeError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PrizeError> {
        for (index, r) in self.rules.iter().enumerate() {
            let msg = match (&r.name, r.game_type, r.ticket_cost) {
                (Some(_), None, None) | (None, Some(_), _) => continue,
                (Some(_), _, _) => "a name rule cannot also match on game_type/ticket_cost",
                (None, None, _) => "rule needs either name or game_type",
            };
            return Err(PrizeError::BadRule { index, message: msg.into() });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("no prize table or mapping rule for lottery {0:?}")]
    NoMapping(String),
    #[error("lottery {lottery:?} maps to unknown game {game:?}")]
    UnknownGame { lottery: String, game: String },
    #[error("game {0:?} has no recorded-prize probability and cannot be simulated")]
    Unusable(String),
}

/// Ticket price embedded in a lottery name such as `"$10 Cash Blast"`.
pub fn ticket_price_from_name(lottery_name: &str) -> Option<Cents> {
    static PRICE: OnceLock<Regex> = OnceLock::new();
    let re = PRICE.get_or_init(|| Regex::new(r"\$\s*(\d+(?:\.\d{1,2})?)").unwrap());
    let caps = re.captures(lottery_name)?;
    Cents::parse(&caps[1]).ok()
}

/// Maps claim records to prize tables.
#[derive(Clone, Copy, Debug)]
pub struct Resolver<'a> {
    pub registry: &'a PrizeRegistry,
    pub mapping: &'a MappingConfig,
    pub threshold: Cents,
}

impl<'a> Resolver<'a> {
    pub fn new(registry: &'a PrizeRegistry, mapping: &'a MappingConfig, threshold: Cents) -> Self {
        Self { registry, mapping, threshold }
    }

    /// Table for a record, rejecting tables with no recorded-prize mass.
    pub fn resolve(&self, record: &ClaimRecord) -> Result<&'a PrizeTable, ResolveError> {
        resolve_game(record, self.registry, self.mapping, self.threshold)
    }
}

/// Exact registry name first, then the mapping rules in order.
pub fn resolve_game<'a>(
    record: &ClaimRecord,
    registry: &'a PrizeRegistry,
    mapping: &MappingConfig,
    threshold: Cents,
) -> Result<&'a PrizeTable, ResolveError> {
    let lottery = record.lottery_name.trim();
    let table = match registry.get(lottery) {
        Some(t) => t,
        None => {
            let price = ticket_price_from_name(lottery);
            let rule = mapping
                .rules
                .iter()
                .find(|r| rule_matches(r, lottery, record.game_type, price))
                .ok_or_else(|| ResolveError::NoMapping(lottery.to_string()))?;
            registry
                .get(&rule.game)
                .ok_or_else(|| ResolveError::UnknownGame { lottery: lottery.to_string(), game: rule.game.clone() })?
        }
    };
    if table.p_big_above(threshold) > 0.0 {
        Ok(table)
    } else {
        Err(ResolveError::Unusable(table.game_name.clone()))
    }
}

fn rule_matches(rule: &MappingRule, lottery: &str, game_type: GameType, price: Option<Cents>) -> bool {
    if let Some(name) = &rule.name {
        return name.trim() == lottery;
    }
    if rule.game_type != Some(game_type) {
        return false;
    }
    match rule.ticket_cost {
        None => true,
        Some(cost) => price == Some(Cents::from_dollars(cost)),
    }
}
