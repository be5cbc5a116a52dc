use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::money::Cents;
use crate::prizes::PrizeTable;

/// Guard against tables whose recorded-prize probability is so small that a
/// single win would need an absurd number of tickets.
pub const DEFAULT_TICKET_CAP: u64 = 1_000_000_000;

/// Which sampler produces per-win outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Geometric stopping time plus multinomial small-prize counts.
    #[default]
    Fast,
    /// Draws every ticket. Exact but O(1/p) per win.
    TicketLoop,
}

/// A prize table prepared for sampling one ticket after another.
#[derive(Clone, Debug)]
pub struct TicketModel {
    game_name: String,
    cost: Cents,
    p_big: f64,
    /// Small prizes with their probability given "not a recorded prize".
    small: Vec<(Cents, f64)>,
    /// Index layout: small prizes, then recorded, then nothing.
    categorical: WeightedIndex<f64>,
    stopping: Geometric,
}

impl TicketModel {
    /// Fails when the table has no recorded-prize mass above `threshold`.
    pub fn new(table: &PrizeTable, threshold: Cents) -> Result<Self, SimError> {
        let p_big = table.p_big_above(threshold);
        if !(p_big > 0.0) {
            return Err(SimError::InvalidSpec(format!(
                "game {:?} has no recorded-prize probability",
                table.game_name()
            )));
        }
        let small_raw: Vec<(Cents, f64)> =
            table.entries().iter().filter(|e| e.value <= threshold).map(|e| (e.value, e.probability)).collect();
        let small_mass: f64 = small_raw.iter().map(|s| s.1).sum();
        let nothing = (1.0 - p_big - small_mass).max(0.0);
        let mut weights: Vec<f64> = small_raw.iter().map(|s| s.1).collect();
        weights.push(p_big);
        weights.push(nothing);
        let categorical =
            WeightedIndex::new(&weights).map_err(|e| SimError::InvalidSpec(format!("bad ticket weights: {e}")))?;
        let stopping = Geometric::new(p_big.min(1.0))
            .map_err(|e| SimError::InvalidSpec(format!("bad stopping probability: {e}")))?;
        let not_big = 1.0 - p_big;
        let small = small_raw.into_iter().map(|(v, q)| (v, if not_big > 0.0 { q / not_big } else { 0.0 })).collect();
        Ok(Self {
            game_name: table.game_name().to_string(),
            cost: table.ticket_cost(),
            p_big,
            small,
            categorical,
            stopping,
        })
    }

    pub fn game_name(&self) -> &str {
        &self.game_name
    }

    pub fn ticket_cost(&self) -> Cents {
        self.cost
    }

    pub fn p_big(&self) -> f64 {
        self.p_big
    }

    /// Draws the outcome of one ticket.
    pub fn draw_ticket<R: Rng + ?Sized>(&self, rng: &mut R) -> TicketDraw {
        let i = self.categorical.sample(rng);
        match i.cmp(&self.small.len()) {
            std::cmp::Ordering::Less => TicketDraw::Small(self.small[i].0),
            std::cmp::Ordering::Equal => TicketDraw::Recorded,
            std::cmp::Ordering::Greater => TicketDraw::Nothing,
        }
    }
}

/// One recorded win to be simulated.
#[derive(Clone, Copy, Debug)]
pub struct WinSimSpec<'a> {
    pub prize_amount: Cents,
    pub model: &'a TicketModel,
}

impl<'a> WinSimSpec<'a> {
    pub fn new(prize_amount: Cents, model: &'a TicketModel) -> Self {
        Self { prize_amount, model }
    }
}

/// Simulated purchase history behind one recorded win.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinSimOutcome {
    pub tickets_bought: u64,
    pub small_prize_total: Cents,
    pub net_gain: Cents,
}

impl WinSimOutcome {
    fn settle(spec: &WinSimSpec<'_>, tickets_bought: u64, small_prize_total: Cents) -> Self {
        let spend = Cents(spec.model.cost.0 * tickets_bought as i64);
        Self { tickets_bought, small_prize_total, net_gain: spec.prize_amount + small_prize_total - spend }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TicketDraw {
    Nothing,
    Small(Cents),
    /// A prize above the recording threshold; ends the purchase run.
    Recorded,
}

/// Supplies ticket outcomes to the ticket-by-ticket simulator.
pub trait TicketSource {
    /// `None` means the source has run dry.
    fn next_ticket(&mut self, model: &TicketModel) -> Option<TicketDraw>;
}

/// Tickets drawn from the model's prize distribution.
pub struct RandomTickets<'r, R: Rng + ?Sized>(pub &'r mut R);

impl<R: Rng + ?Sized> TicketSource for RandomTickets<'_, R> {
    fn next_ticket(&mut self, model: &TicketModel) -> Option<TicketDraw> {
        Some(model.draw_ticket(self.0))
    }
}

/// A fixed sequence of ticket outcomes, for replaying a known history.
#[derive(Clone, Debug, Default)]
pub struct ScriptedTickets(VecDeque<TicketDraw>);

impl ScriptedTickets {
    pub fn new(draws: impl IntoIterator<Item = TicketDraw>) -> Self {
        Self(draws.into_iter().collect())
    }
}

impl TicketSource for ScriptedTickets {
    fn next_ticket(&mut self, _model: &TicketModel) -> Option<TicketDraw> {
        self.0.pop_front()
    }
}

/// Buys tickets one at a time until a recorded prize comes up. The final
/// ticket pays the known recorded prize, not a resampled one.
pub fn simulate_win_ticket_loop<S: TicketSource + ?Sized>(
    spec: &WinSimSpec<'_>,
    source: &mut S,
    ticket_cap: u64,
) -> Result<WinSimOutcome, SimError> {
    let mut tickets = 0u64;
    let mut small = Cents::ZERO;
    loop {
        tickets += 1;
        if tickets > ticket_cap {
            return Err(SimError::CapExceeded { cap: ticket_cap });
        }
        match source.next_ticket(spec.model).ok_or(SimError::SourceExhausted)? {
            TicketDraw::Nothing => {}
            TicketDraw::Small(v) => small += v,
            TicketDraw::Recorded => break,
        }
    }
    Ok(WinSimOutcome::settle(spec, tickets, small))
}

/// Same distribution as [`simulate_win_ticket_loop`] in O(#small prizes):
/// the ticket count is Geometric(p_big) on {1, 2, ...}, and the non-recorded
/// tickets split over small-prize categories as a multinomial, drawn as a
/// chain of conditional binomials.
pub fn simulate_win_fast<R: Rng + ?Sized>(
    spec: &WinSimSpec<'_>,
    rng: &mut R,
    ticket_cap: u64,
) -> Result<WinSimOutcome, SimError> {
    let model = spec.model;
    let failures = model.stopping.sample(rng);
    if failures >= ticket_cap {
        return Err(SimError::CapExceeded { cap: ticket_cap });
    }
    let mut remaining = failures;
    let mut mass_left = 1.0;
    let mut small = Cents::ZERO;
    for &(value, q) in &model.small {
        if remaining == 0 {
            break;
        }
        let p = if mass_left > 0.0 { (q / mass_left).min(1.0) } else { 1.0 };
        let count = Binomial::new(remaining, p)
            .map_err(|e| SimError::InvalidSpec(format!("binomial({remaining}, {p}): {e}")))?
            .sample(rng);
        small += Cents(value.0 * count as i64);
        remaining -= count;
        mass_left -= q;
    }
    Ok(WinSimOutcome::settle(spec, failures + 1, small))
}

/// Simulates one win with the chosen engine.
pub fn simulate_win<R: Rng + ?Sized>(
    spec: &WinSimSpec<'_>,
    engine: Engine,
    rng: &mut R,
    ticket_cap: u64,
) -> Result<WinSimOutcome, SimError> {
    match engine {
        Engine::Fast => simulate_win_fast(spec, rng, ticket_cap),
        Engine::TicketLoop => simulate_win_ticket_loop(spec, &mut RandomTickets(rng), ticket_cap),
    }
}
