use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ClaimRecord, IngestError, StoreKey};
use crate::exec::Execution;
use crate::money::Cents;

/// How claim rows are grouped into players.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerIdentity {
    /// The (pseudonymized) full name alone. Distinct people sharing a name
    /// are merged.
    #[default]
    Name,
    /// Name plus city, separating same-named winners in different towns.
    NameAndCity,
}

impl PlayerIdentity {
    pub fn key(self, record: &ClaimRecord) -> String {
        match self {
            PlayerIdentity::Name => record.winner_id.clone(),
            PlayerIdentity::NameAndCity => format!("{}|{}", record.winner_id, record.city),
        }
    }
}

/// All recorded wins of one player.
///
/// `wins` is kept in canonical (sorted) order, so a profile depends only on
/// the multiset of its claim records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayerProfile {
    pub player_id: String,
    pub wins: Vec<ClaimRecord>,
    pub store_counts: BTreeMap<StoreKey, u32>,
    pub total_reported_winnings: Cents,
}

impl PlayerProfile {
    fn empty(player_id: String) -> Self {
        Self { player_id, wins: Vec::new(), store_counts: BTreeMap::new(), total_reported_winnings: Cents::ZERO }
    }

    /// Builds a profile from a player's records, in any order.
    pub fn from_wins(player_id: impl Into<String>, mut wins: Vec<ClaimRecord>) -> Self {
        let mut p = Self::empty(player_id.into());
        for w in &wins {
            *p.store_counts.entry(w.store()).or_default() += 1;
            p.total_reported_winnings += w.prize_amount;
        }
        wins.sort();
        p.wins = wins;
        p
    }

    pub fn win_count(&self) -> usize {
        self.wins.len()
    }

    pub fn store_count(&self) -> usize {
        self.store_counts.len()
    }

    /// Combines two partial profiles of the same player. Associative and
    /// commutative.
    pub fn merge(mut self, other: PlayerProfile) -> PlayerProfile {
        debug_assert_eq!(self.player_id, other.player_id);
        for (k, c) in other.store_counts {
            *self.store_counts.entry(k).or_default() += c;
        }
        self.total_reported_winnings += other.total_reported_winnings;
        let mut wins = self.wins;
        wins.extend(other.wins);
        wins.sort();
        self.wins = wins;
        self
    }

    /// Checks the profile's bookkeeping against its win list.
    pub fn check(&self) -> Result<(), String> {
        if self.wins.is_empty() {
            return Err(format!("player {} has no wins", self.player_id));
        }
        let counted: u64 = self.store_counts.values().map(|&c| u64::from(c)).sum();
        if counted != self.wins.len() as u64 {
            return Err(format!(
                "player {}: store counts sum to {counted}, expected {}",
                self.player_id,
                self.wins.len()
            ));
        }
        let total: Cents = self.wins.iter().map(|w| w.prize_amount).sum();
        if total != self.total_reported_winnings {
            return Err(format!(
                "player {}: total winnings {} does not match wins ({total})",
                self.player_id, self.total_reported_winnings
            ));
        }
        let rebuilt = Self::from_wins(self.player_id.clone(), self.wins.clone());
        if rebuilt.store_counts != self.store_counts {
            return Err(format!("player {}: store counts disagree with win retailers", self.player_id));
        }
        Ok(())
    }
}

pub type Profiles = BTreeMap<String, PlayerProfile>;

/// Groups records by winner name.
pub fn aggregate_players(records: &[ClaimRecord]) -> Profiles {
    aggregate_players_by(records, PlayerIdentity::Name, Execution::default())
}

const CHUNK: usize = 4096;

/// Groups records into profiles. Chunks are aggregated independently and
/// merged, so the result is the same for any execution mode or row order.
pub fn aggregate_players_by(records: &[ClaimRecord], identity: PlayerIdentity, exec: Execution) -> Profiles {
    let chunks: Vec<&[ClaimRecord]> = records.chunks(CHUNK).collect();
    let partials = exec.map_slice(&chunks, |chunk| {
        let mut grouped: BTreeMap<String, Vec<ClaimRecord>> = BTreeMap::new();
        for r in chunk.iter() {
            grouped.entry(identity.key(r)).or_default().push(r.clone());
        }
        grouped.into_iter().map(|(id, wins)| (id.clone(), PlayerProfile::from_wins(id, wins))).collect::<Profiles>()
    });
    partials.into_iter().fold(Profiles::new(), merge_profiles)
}

/// Merges two partial profile maps.
pub fn merge_profiles(mut a: Profiles, b: Profiles) -> Profiles {
    for (id, p) in b {
        let merged = match a.remove(&id) {
            Some(existing) => existing.merge(p),
            None => p,
        };
        a.insert(id, merged);
    }
    a
}

#[derive(Serialize, Deserialize)]
struct StoreCountLine {
    name: String,
    address: String,
    count: u32,
}

#[derive(Serialize, Deserialize)]
struct ProfileLine {
    player_id: String,
    win_count: usize,
    store_count: usize,
    total_reported_winnings_cents: i64,
    store_counts: Vec<StoreCountLine>,
    wins: Vec<ClaimRecord>,
}

/// Writes one JSON object per player, ordered by player id.
pub fn write_profiles<W: Write>(mut out: W, profiles: &Profiles) -> Result<(), IngestError> {
    for p in profiles.values() {
        let line = ProfileLine {
            player_id: p.player_id.clone(),
            win_count: p.win_count(),
            store_count: p.store_count(),
            total_reported_winnings_cents: p.total_reported_winnings.0,
            store_counts: p
                .store_counts
                .iter()
                .map(|(k, &count)| StoreCountLine { name: k.name.clone(), address: k.address.clone(), count })
                .collect(),
            wins: p.wins.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads profiles written by [`write_profiles`], validating each one.
pub fn read_profiles<R: BufRead>(input: R) -> Result<Profiles, IngestError> {
    let mut profiles = Profiles::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProfileLine = serde_json::from_str(&line)?;
        let p = PlayerProfile {
            player_id: rec.player_id,
            store_counts: rec
                .store_counts
                .into_iter()
                .map(|s| (StoreKey { name: s.name, address: s.address }, s.count))
                .collect(),
            total_reported_winnings: Cents(rec.total_reported_winnings_cents),
            wins: rec.wins,
        };
        let bad = |msg: String| IngestError::Profile { line: i + 1, message: msg };
        p.check().map_err(bad)?;
        if rec.win_count != p.win_count() || rec.store_count != p.store_count() {
            return Err(bad("win_count/store_count fields disagree with contents".into()));
        }
        if profiles.insert(p.player_id.clone(), p).is_some() {
            return Err(bad("duplicate player id".into()));
        }
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::GameType;
    use chrono::NaiveDate;

    fn rec(winner: &str, store: &str, amount: i64) -> ClaimRecord {
        ClaimRecord {
            paid_date: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            winner_id: winner.into(),
            lottery_name: "Pick 4".into(),
            game_type: GameType::Online,
            prize_amount: Cents::from_whole_dollars(amount),
            retailer_name: store.into(),
            retailer_address: "1 Main St".into(),
            city: "Raleigh".into(),
            county: "Wake".into(),
            claim_center: "Raleigh".into(),
        }
    }

    #[test]
    fn two_stores_one_player() {
        let p = aggregate_players(&[rec("ann", "A", 700), rec("ann", "B", 900)]);
        assert_eq!(p.len(), 1);
        let ann = &p["ann"];
        assert_eq!(ann.win_count(), 2);
        assert_eq!(ann.store_counts.len(), 2);
        assert!(ann.store_counts.values().all(|&c| c == 1));
        assert_eq!(ann.total_reported_winnings, Cents::from_whole_dollars(1600));
    }

    #[test]
    fn single_store_player() {
        let p = aggregate_players(&[rec("bo", "A", 700), rec("bo", "a.", 800), rec("bo", " A ", 900)]);
        let bo = &p["bo"];
        assert_eq!(bo.store_counts.len(), 1);
        assert_eq!(*bo.store_counts.values().next().unwrap(), 3);
        bo.check().unwrap();
    }

    #[test]
    fn name_and_city_identity_splits() {
        let mut other = rec("ann", "A", 700);
        other.city = "Durham".into();
        let records = [rec("ann", "A", 700), other];
        assert_eq!(aggregate_players(&records).len(), 1);
        let split = aggregate_players_by(&records, PlayerIdentity::NameAndCity, Execution::Sequential);
        assert_eq!(split.len(), 2);
    }

    #[test]
    fn profiles_round_trip() {
        let p = aggregate_players(&[rec("ann", "A", 700), rec("bob", "B", 900), rec("ann", "C", 601)]);
        let mut buf = Vec::new();
        write_profiles(&mut buf, &p).unwrap();
        let back = read_profiles(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn tampered_profile_is_rejected() {
        let p = aggregate_players(&[rec("ann", "A", 700)]);
        let mut buf = Vec::new();
        write_profiles(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"win_count\":1", "\"win_count\":2");
        assert!(read_profiles(text.as_bytes()).is_err());
    }
}
