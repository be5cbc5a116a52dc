//! Synthetic claim populations with known ground truth.
//!
//! Honest players win at a small personal set of stores with a heavy-head
//! preference. Discounters claim tickets bought by many different people,
//! so their wins are spread near-uniformly over many stores. Both draw games
//! and prize amounts the same way, so a detector can only separate them by
//! behavior.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::ingest::{normalize_store, ClaimRecord, GameType, StoreKey};
use crate::money::Cents;
use crate::montecarlo::SeedSpec;
use crate::prizes::PrizeRegistry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("prize registry is empty")]
    EmptyRegistry,
    #[error("game {0:?} is not in the prize registry")]
    UnknownGame(String),
    #[error("game {0:?} has no prize above the recorded-prize threshold")]
    NoRecordedPrizes(String),
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
}

/// Integer range `[min, max]` with a mixture weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountBand {
    pub min: u32,
    pub max: u32,
    pub weight: f64,
}

impl CountBand {
    pub const fn new(min: u32, max: u32, weight: f64) -> Self {
        Self { min, max, weight }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameShare {
    /// Registry game name.
    pub game: String,
    pub weight: f64,
    /// Lottery names written to the claims file for this game, picked
    /// uniformly. Empty means the registry name itself.
    #[serde(default)]
    pub lottery_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub master_seed: u64,
    pub n_honest: usize,
    pub n_discounters: usize,
    /// Win counts of honest players (band mixture).
    pub honest_wins: Vec<CountBand>,
    /// Win counts of discounters.
    pub discounter_wins: Vec<CountBand>,
    /// Size of an honest player's personal store set.
    pub honest_store_set: Vec<CountBand>,
    /// Rank-decay exponent `a` of honest store preference: the store of rank
    /// `r` (1-based) gets weight `r^-a`.
    pub honest_store_concentration: f64,
    /// Number of distinct stores a discounter's tickets come from.
    pub discounter_store_spread: CountBand,
    /// Discounter store weights are uniform on `[1 - j, 1 + j]`.
    pub discounter_weight_jitter: f64,
    pub store_pool: usize,
    pub games_mix: Vec<GameShare>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// Prizes strictly above this are recorded.
    #[serde(with = "crate::money::serde_dollars")]
    pub recorded_threshold: Cents,
    /// Chance that a claim row spells its retailer differently (case,
    /// spacing, trailing punctuation) from the canonical form.
    pub retailer_variation_rate: f64,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Default for PopulationSpec {
    fn default() -> Self {
        let scratch = |price: u32, weight: f64| GameShare {
            game: format!("${price} Representative Scratch-Off"),
            weight,
            lottery_names: (1..=4).map(|s| format!("${price} Scratch-Off Series {s}")).collect(),
        };
        Self {
            master_seed: 20200131,
            n_honest: 1956,
            n_discounters: 23,
            honest_wins: vec![
                CountBand::new(1, 1, 0.854),
                CountBand::new(2, 2, 0.065),
                CountBand::new(3, 4, 0.015),
                CountBand::new(5, 9, 0.045),
                CountBand::new(10, 20, 0.020),
                CountBand::new(21, 40, 0.006),
            ],
            discounter_wins: vec![CountBand::new(55, 65, 1.0)],
            honest_store_set: vec![
                CountBand::new(1, 1, 0.10),
                CountBand::new(2, 2, 0.13),
                CountBand::new(3, 3, 0.20),
                CountBand::new(4, 4, 0.20),
                CountBand::new(5, 6, 0.22),
                CountBand::new(7, 8, 0.15),
            ],
            honest_store_concentration: 1.0,
            discounter_store_spread: CountBand::new(1500, 2500, 1.0),
            discounter_weight_jitter: 0.25,
            store_pool: 3000,
            games_mix: vec![
                GameShare {
                    game: "Pick 4".into(),
                    weight: 0.25,
                    lottery_names: names(&["Pick 4 Day", "Pick 4 Evening"]),
                },
                scratch(1, 0.05),
                scratch(2, 0.14),
                scratch(3, 0.05),
                scratch(5, 0.15),
                scratch(10, 0.15),
                scratch(20, 0.12),
                scratch(30, 0.08),
                GameShare {
                    game: "Powerball".into(),
                    weight: 0.01,
                    lottery_names: names(&["Powerball", "Power Ball"]),
                },
            ],
            first_date: NaiveDate::from_ymd_opt(2006, 3, 31).expect("valid date"),
            last_date: NaiveDate::from_ymd_opt(2020, 1, 31).expect("valid date"),
            recorded_threshold: Cents::from_whole_dollars(600),
            retailer_variation_rate: 0.15,
        }
    }
}

fn check_bands(what: &str, bands: &[CountBand], allow_zero: bool) -> Result<(), SynthError> {
    if bands.is_empty() {
        return Err(SynthError::InvalidSpec(format!("{what}: no bands")));
    }
    for b in bands {
        if b.min > b.max || !(b.weight >= 0.0 && b.weight.is_finite()) || (!allow_zero && b.min == 0) {
            return Err(SynthError::InvalidSpec(format!("{what}: bad band {b:?}")));
        }
    }
    if bands.iter().all(|b| b.weight == 0.0) {
        return Err(SynthError::InvalidSpec(format!("{what}: all weights zero")));
    }
    Ok(())
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_bands("honest_wins", &self.honest_wins, false)?;
        check_bands("discounter_wins", &self.discounter_wins, false)?;
        check_bands("honest_store_set", &self.honest_store_set, false)?;
        check_bands("discounter_store_spread", std::slice::from_ref(&self.discounter_store_spread), false)?;
        let largest_set =
            self.honest_store_set.iter().map(|b| b.max).chain([self.discounter_store_spread.max]).max().unwrap_or(0);
        if (largest_set as usize) > self.store_pool {
            return Err(SynthError::InvalidSpec(format!(
                "store pool of {} is smaller than a store set of {largest_set}",
                self.store_pool
            )));
        }
        if !(self.honest_store_concentration >= 0.0 && self.honest_store_concentration.is_finite()) {
            return Err(SynthError::InvalidSpec("honest_store_concentration must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.discounter_weight_jitter) {
            return Err(SynthError::InvalidSpec("discounter_weight_jitter must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.retailer_variation_rate) {
            return Err(SynthError::InvalidSpec("retailer_variation_rate must be in [0, 1]".into()));
        }
        if self.games_mix.is_empty() || self.games_mix.iter().any(|g| !(g.weight >= 0.0 && g.weight.is_finite())) {
            return Err(SynthError::InvalidSpec("games_mix needs nonnegative weights".into()));
        }
        if self.games_mix.iter().all(|g| g.weight == 0.0) {
            return Err(SynthError::InvalidSpec("games_mix weights are all zero".into()));
        }
        if self.first_date > self.last_date {
            return Err(SynthError::InvalidSpec("first_date after last_date".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Honest,
    Discounter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreWeight {
    /// Index into [`GroundTruthManifest::stores`].
    pub store: usize,
    /// Probability that one of the player's wins comes from this store.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestWin {
    pub paid_date: NaiveDate,
    pub lottery_name: String,
    /// Registry game the win was drawn from.
    pub game: String,
    #[serde(with = "crate::money::serde_dollars")]
    pub prize_amount: Cents,
    /// Index into [`GroundTruthManifest::stores`].
    pub store: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestPlayer {
    pub player_id: String,
    pub label: Label,
    pub store_distribution: Vec<StoreWeight>,
    pub wins: Vec<ManifestWin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub spec: PopulationSpec,
    pub claim_count: usize,
    /// Normalized key of every store in the pool.
    pub stores: Vec<StoreKey>,
    pub players: Vec<ManifestPlayer>,
}

impl GroundTruthManifest {
    pub fn ids_with(&self, label: Label) -> BTreeSet<String> {
        self.players.iter().filter(|p| p.label == label).map(|p| p.player_id.clone()).collect()
    }

    pub fn store(&self, index: usize) -> &StoreKey {
        &self.stores[index]
    }

    pub fn label_of(&self) -> BTreeMap<String, Label> {
        self.players.iter().map(|p| (p.player_id.clone(), p.label)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    /// Claim rows in file order.
    pub records: Vec<ClaimRecord>,
    pub manifest: GroundTruthManifest,
}

#[derive(Clone, Debug)]
struct Store {
    name: String,
    address: String,
    city: String,
    county: String,
}

const BRANDS: &[&str] = &[
    "Quick Stop",
    "Corner Market",
    "Gas N Go",
    "Food Mart",
    "Liquor Depot",
    "Super Saver",
    "Mini Mart",
    "Express Fuel",
    "Fresh Foods",
    "Village Pantry",
    "Smoke Shop",
    "Shell Station",
];
const STREETS: &[&str] = &[
    "Main",
    "Oak",
    "Maple",
    "Lake",
    "Cedar",
    "Pine",
    "Elm",
    "Washington",
    "Lincoln",
    "Park",
    "Hill",
    "River",
    "Western",
    "Central",
    "Madison",
    "Jefferson",
];
const SUFFIXES: &[&str] = &["St", "Ave", "Rd", "Blvd", "Dr"];
const CITIES: &[(&str, &str)] = &[
    ("Springfield", "Sangamon"),
    ("Riverton", "Sangamon"),
    ("Lakeside", "Cook"),
    ("Fairview", "Cook"),
    ("Oak Grove", "Lake"),
    ("Millbrook", "Will"),
    ("Cedar Falls", "Will"),
    ("Brookfield", "DuPage"),
];
const CLAIM_CENTERS: &[&str] = &["Central Claims Office", "North Claims Office", "South Claims Office"];
const FIRST_NAMES: &[&str] = &[
    "James",
    "Mary",
    "Robert",
    "Patricia",
    "John",
    "Jennifer",
    "Michael",
    "Linda",
    "David",
    "Elizabeth",
    "William",
    "Barbara",
    "Richard",
    "Susan",
    "Joseph",
    "Jessica",
    "Thomas",
    "Sarah",
    "Charles",
    "Karen",
    "Daniel",
    "Lisa",
    "Matthew",
    "Nancy",
    "Anthony",
    "Betty",
    "Mark",
    "Sandra",
    "Donald",
    "Ashley",
    "Steven",
    "Kimberly",
    "Paul",
    "Emily",
    "Andrew",
    "Donna",
    "Joshua",
    "Michelle",
    "Kenneth",
    "Carol",
];
const LAST_NAMES: &[&str] = &[
    "Smith",
    "Johnson",
    "Williams",
    "Brown",
    "Jones",
    "Garcia",
    "Miller",
    "Davis",
    "Rodriguez",
    "Martinez",
    "Hernandez",
    "Lopez",
    "Gonzalez",
    "Wilson",
    "Anderson",
    "Thomas",
    "Taylor",
    "Moore",
    "Jackson",
    "Martin",
    "Lee",
    "Perez",
    "Thompson",
    "White",
    "Harris",
    "Sanchez",
    "Clark",
    "Ramirez",
    "Lewis",
    "Robinson",
    "Walker",
    "Young",
    "Allen",
    "King",
    "Wright",
    "Scott",
    "Torres",
    "Nguyen",
    "Hill",
    "Flores",
];

fn store_pool<R: Rng>(n: usize, rng: &mut R) -> Vec<Store> {
    (0..n)
        .map(|i| {
            let brand = BRANDS[rng.random_range(0..BRANDS.len())];
            let (city, county) = CITIES[rng.random_range(0..CITIES.len())];
            let number = rng.random_range(100..10_000);
            let street = STREETS[rng.random_range(0..STREETS.len())];
            let suffix = SUFFIXES[rng.random_range(0..SUFFIXES.len())];
            Store {
                // the store number keeps every normalized key unique
                name: format!("{brand} #{}", 1000 + i),
                address: format!("{number} {street} {suffix}"),
                city: city.into(),
                county: county.into(),
            }
        })
        .collect()
}

/// A spelling of `raw` that normalizes to the same text.
fn vary<R: Rng>(raw: &str, rng: &mut R) -> String {
    match rng.random_range(0..4) {
        0 => raw.to_uppercase(),
        1 => raw.replacen(' ', "  ", 1),
        2 => format!("{raw}."),
        _ => format!(" {}", raw.to_lowercase()),
    }
}

fn distinct_names<R: Rng>(n: usize, rng: &mut R) -> Result<Vec<String>, SynthError> {
    let mut all = Vec::with_capacity(FIRST_NAMES.len() * LAST_NAMES.len() * 26);
    for f in FIRST_NAMES {
        for l in LAST_NAMES {
            for m in 'A'..='Z' {
                all.push(format!("{f} {m} {l}"));
            }
        }
    }
    if n > all.len() {
        return Err(SynthError::InvalidSpec(format!("at most {} players supported", all.len())));
    }
    all.shuffle(rng);
    all.truncate(n);
    Ok(all)
}

fn draw_count<R: Rng>(bands: &[CountBand], rng: &mut R) -> u32 {
    let idx = WeightedIndex::new(bands.iter().map(|b| b.weight)).expect("validated weights").sample(rng);
    let b = &bands[idx];
    rng.random_range(b.min..=b.max)
}

struct GamePlan {
    game: String,
    game_type: GameType,
    lottery_names: Vec<String>,
    prizes: Vec<Cents>,
    prize_dist: WeightedIndex<f64>,
}

fn game_plans(
    spec: &PopulationSpec,
    registry: &PrizeRegistry,
) -> Result<(Vec<GamePlan>, WeightedIndex<f64>), SynthError> {
    let mut plans = Vec::new();
    for share in &spec.games_mix {
        let table = registry.get(&share.game).ok_or_else(|| SynthError::UnknownGame(share.game.clone()))?;
        let big: Vec<_> = table.big_entries(spec.recorded_threshold).collect();
        if big.is_empty() || big.iter().all(|e| e.probability == 0.0) {
            return Err(SynthError::NoRecordedPrizes(share.game.clone()));
        }
        plans.push(GamePlan {
            game: share.game.clone(),
            game_type: table.game_type().unwrap_or(GameType::Online),
            lottery_names: if share.lottery_names.is_empty() {
                vec![share.game.clone()]
            } else {
                share.lottery_names.clone()
            },
            prizes: big.iter().map(|e| e.value).collect(),
            prize_dist: WeightedIndex::new(big.iter().map(|e| e.probability)).expect("positive mass"),
        });
    }
    let mix = WeightedIndex::new(spec.games_mix.iter().map(|g| g.weight)).expect("validated weights");
    Ok((plans, mix))
}

struct PlayerDraft {
    manifest: ManifestPlayer,
    records: Vec<ClaimRecord>,
}

#[allow(clippy::too_many_arguments)]
fn generate_player(
    index: usize,
    player_id: &str,
    label: Label,
    spec: &PopulationSpec,
    stores: &[Store],
    plans: &[GamePlan],
    mix: &WeightedIndex<f64>,
    seeds: &SeedSpec,
) -> PlayerDraft {
    let mut rng = seeds.aux_stream("synth/player", index as u64);
    let (wins, set_size) = match label {
        Label::Honest => (draw_count(&spec.honest_wins, &mut rng), draw_count(&spec.honest_store_set, &mut rng)),
        Label::Discounter => (
            draw_count(&spec.discounter_wins, &mut rng),
            draw_count(std::slice::from_ref(&spec.discounter_store_spread), &mut rng),
        ),
    };
    let chosen: Vec<usize> = rand::seq::index::sample(&mut rng, stores.len(), set_size as usize).into_vec();
    let raw_weights: Vec<f64> = match label {
        Label::Honest => (1..=chosen.len()).map(|r| (r as f64).powf(-spec.honest_store_concentration)).collect(),
        Label::Discounter => {
            let j = spec.discounter_weight_jitter;
            (0..chosen.len()).map(|_| rng.random_range(1.0 - j..=1.0 + j)).collect()
        }
    };
    let total: f64 = raw_weights.iter().sum();
    let store_dist = WeightedIndex::new(&raw_weights).expect("positive weights");
    let days = (spec.last_date - spec.first_date).num_days();

    let mut records = Vec::with_capacity(wins as usize);
    let mut manifest_wins = Vec::with_capacity(wins as usize);
    for _ in 0..wins {
        let store_index = chosen[store_dist.sample(&mut rng)];
        let store = &stores[store_index];
        let plan = &plans[mix.sample(&mut rng)];
        let prize = plan.prizes[plan.prize_dist.sample(&mut rng)];
        let lottery_name = plan.lottery_names[rng.random_range(0..plan.lottery_names.len())].clone();
        let paid_date = spec.first_date + Duration::days(rng.random_range(0..=days));
        let (name, address) = if rng.random::<f64>() < spec.retailer_variation_rate {
            (vary(&store.name, &mut rng), vary(&store.address, &mut rng))
        } else {
            (store.name.clone(), store.address.clone())
        };
        let claim_center = CLAIM_CENTERS[rng.random_range(0..CLAIM_CENTERS.len())];
        manifest_wins.push(ManifestWin {
            paid_date,
            lottery_name: lottery_name.clone(),
            game: plan.game.clone(),
            prize_amount: prize,
            store: store_index,
        });
        records.push(ClaimRecord {
            paid_date,
            winner_id: player_id.to_string(),
            lottery_name,
            game_type: plan.game_type,
            prize_amount: prize,
            retailer_name: name,
            retailer_address: address,
            city: store.city.clone(),
            county: store.county.clone(),
            claim_center: claim_center.into(),
        });
    }
    manifest_wins.sort_by(|a, b| {
        (a.paid_date, &a.lottery_name, a.prize_amount, &a.store).cmp(&(
            b.paid_date,
            &b.lottery_name,
            b.prize_amount,
            &b.store,
        ))
    });
    let store_distribution =
        chosen.iter().zip(&raw_weights).map(|(&s, &w)| StoreWeight { store: s, weight: w / total }).collect();
    PlayerDraft {
        manifest: ManifestPlayer { player_id: player_id.to_string(), label, store_distribution, wins: manifest_wins },
        records,
    }
}

/// Generates a labeled claim corpus. Every random choice derives from
/// `spec.master_seed`: player `i` uses its own auxiliary stream, so the
/// output does not depend on how generation is scheduled.
pub fn generate_population(
    spec: &PopulationSpec,
    registry: &PrizeRegistry,
    exec: Execution,
) -> Result<SyntheticCorpus, SynthError> {
    if registry.is_empty() {
        return Err(SynthError::EmptyRegistry);
    }
    spec.validate()?;
    let (plans, mix) = game_plans(spec, registry)?;
    let seeds = SeedSpec::new(spec.master_seed);
    let stores = store_pool(spec.store_pool, &mut seeds.aux_stream("synth/stores", 0));
    let n = spec.n_honest + spec.n_discounters;
    let ids = distinct_names(n, &mut seeds.aux_stream("synth/names", 0))?;
    // labels are assigned by index; the shuffled names hide the split
    let label = |i: usize| if i < spec.n_discounters { Label::Discounter } else { Label::Honest };
    let drafts = exec.map_range(n, |i| generate_player(i, &ids[i], label(i), spec, &stores, &plans, &mix, &seeds));

    let mut records = Vec::new();
    let mut players = Vec::with_capacity(n);
    for d in drafts {
        records.extend(d.records);
        players.push(d.manifest);
    }
    records.shuffle(&mut seeds.aux_stream("synth/rows", 0));
    players.sort_by(|a, b| a.player_id.cmp(&b.player_id));
    Ok(SyntheticCorpus {
        manifest: GroundTruthManifest {
            spec: spec.clone(),
            claim_count: records.len(),
            stores: stores.iter().map(|s| normalize_store(&s.name, &s.address)).collect(),
            players,
        },
        records,
    })
}
