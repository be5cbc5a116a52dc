//! Per-win purchase simulation and per-player net-gain distributions.
//!
//! Each recorded win is replayed as a run of ticket purchases from its game
//! until a recorded prize comes up. Replicates are independent and run in
//! parallel; every (player, win, replicate) triple draws from its own
//! counter-keyed stream (see [`SeedSpec`]), so totals are bit-identical for
//! any thread count.

mod engine;
mod seeds;
mod summary;

use std::collections::BTreeMap;

use thiserror::Error;

pub use engine::{
    simulate_win, simulate_win_fast, simulate_win_ticket_loop, Engine, RandomTickets, ScriptedTickets, TicketDraw,
    TicketModel, TicketSource, WinSimOutcome, WinSimSpec, DEFAULT_TICKET_CAP,
};
pub use seeds::{player_key, SeedSpec};
pub use summary::{bonferroni_quantiles, nearest_rank, summarize, QuantilePair, SimulationSummary};

use crate::exec::Execution;
use crate::ingest::PlayerProfile;
use crate::money::Cents;
use crate::prizes::{ModelConstants, ResolveError, Resolver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("ticket cap of {cap} exceeded before a recorded prize")]
    CapExceeded { cap: u64 },
    #[error("scripted ticket source ran out before a recorded prize")]
    SourceExhausted,
    #[error("win {win_index}: {source}")]
    Resolve {
        win_index: usize,
        #[source]
        source: ResolveError,
    },
    #[error("invalid simulation input: {0}")]
    InvalidSpec(String),
    #[error("cannot summarize an empty set of totals")]
    EmptyTotals,
    #[error("Bonferroni adjustment needs at least one comparison")]
    ZeroComparisons,
    #[error("interval level {0} outside (0, 1)")]
    BadLevel(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub engine: Engine,
    pub exec: Execution,
    pub ticket_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { engine: Engine::Fast, exec: Execution::default(), ticket_cap: DEFAULT_TICKET_CAP }
    }
}

/// Ticket models for a player's wins, in win order.
pub struct PreparedPlayer {
    pub player_id: String,
    pub prizes: Vec<Cents>,
    /// Index into `models` for each win.
    pub model_of_win: Vec<usize>,
    pub models: Vec<TicketModel>,
}

impl PreparedPlayer {
    /// Resolves every win of `profile` to a ticket model.
    pub fn new(profile: &PlayerProfile, resolver: &Resolver<'_>) -> Result<Self, SimError> {
        let mut by_game: BTreeMap<String, usize> = BTreeMap::new();
        let mut models = Vec::new();
        let mut model_of_win = Vec::with_capacity(profile.wins.len());
        for (j, w) in profile.wins.iter().enumerate() {
            let table = resolver.resolve(w).map_err(|source| SimError::Resolve { win_index: j, source })?;
            let idx = match by_game.get(table.game_name()) {
                Some(&i) => i,
                None => {
                    models.push(TicketModel::new(table, resolver.threshold)?);
                    by_game.insert(table.game_name().to_string(), models.len() - 1);
                    models.len() - 1
                }
            };
            model_of_win.push(idx);
        }
        Ok(Self {
            player_id: profile.player_id.clone(),
            prizes: profile.wins.iter().map(|w| w.prize_amount).collect(),
            model_of_win,
            models,
        })
    }

    pub fn win_count(&self) -> usize {
        self.prizes.len()
    }

    pub fn spec(&self, win_index: usize) -> WinSimSpec<'_> {
        WinSimSpec::new(self.prizes[win_index], &self.models[self.model_of_win[win_index]])
    }

    /// Total net gain of one replicate.
    pub fn replicate_total(
        &self,
        seeds: &SeedSpec,
        player: u64,
        replicate: usize,
        opts: &SimOptions,
    ) -> Result<Cents, SimError> {
        let mut total = Cents::ZERO;
        for j in 0..self.win_count() {
            let mut rng = seeds.stream_for_key(player, j, replicate);
            total += simulate_win(&self.spec(j), opts.engine, &mut rng, opts.ticket_cap)?.net_gain;
        }
        Ok(total)
    }

    /// Per-replicate totals for `replicates` replicates.
    pub fn simulate(&self, replicates: usize, seeds: &SeedSpec, opts: &SimOptions) -> Result<Vec<Cents>, SimError> {
        let player = player_key(&self.player_id);
        opts.exec.try_map_range(replicates, |k| self.replicate_total(seeds, player, k, opts))
    }
}

/// Simulated total net gain of every replicate for one player
/// (`constants.replicates` of them).
pub fn simulate_player(
    profile: &PlayerProfile,
    resolver: &Resolver<'_>,
    constants: &ModelConstants,
    seeds: &SeedSpec,
    opts: &SimOptions,
) -> Result<Vec<Cents>, SimError> {
    if profile.wins.is_empty() {
        return Err(SimError::InvalidSpec(format!("player {} has no wins", profile.player_id)));
    }
    PreparedPlayer::new(profile, resolver)?.simulate(constants.replicates, seeds, opts)
}
