use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{IngestError, StoreKey};
use crate::money::Cents;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameType {
    ScratchOff,
    Online,
}

impl GameType {
    pub fn as_str(self) -> &'static str {
        match self {
            GameType::ScratchOff => "scratch_off",
            GameType::Online => "online",
        }
    }
}

impl fmt::Display for GameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameType {
    type Err = String;

    /// Accepts the spellings seen in claim exports: `scratch_off`,
    /// `Scratch-Off`, `instant`, `online`, `draw`, ...
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect();
        match folded.as_str() {
            "scratchoff" | "scratch" | "instant" | "instantticket" => Ok(GameType::ScratchOff),
            "online" | "draw" | "drawgame" | "terminal" => Ok(GameType::Online),
            _ => Err(s.to_string()),
        }
    }
}

/// One recorded prize from the winner-claim export.
///
/// Field order matters: the derived ordering is the canonical order of a
/// player's wins.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub paid_date: NaiveDate,
    pub winner_id: String,
    pub lottery_name: String,
    pub game_type: GameType,
    pub prize_amount: Cents,
    pub retailer_name: String,
    pub retailer_address: String,
    pub city: String,
    pub county: String,
    pub claim_center: String,
}

impl ClaimRecord {
    pub fn store(&self) -> StoreKey {
        StoreKey::new(&self.retailer_name, &self.retailer_address)
    }
}

/// Header names for each claim field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnNames {
    pub winner_name: String,
    pub city: String,
    pub county: String,
    pub game_type: String,
    pub prize_amount: String,
    pub lottery_name: String,
    pub claim_center: String,
    pub paid_date: String,
    pub retailer_name: String,
    pub retailer_address: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        Self {
            winner_name: "winner_name".into(),
            city: "city".into(),
            county: "county".into(),
            game_type: "game_type".into(),
            prize_amount: "prize_amount".into(),
            lottery_name: "lottery_name".into(),
            claim_center: "claim_center".into(),
            paid_date: "paid_date".into(),
            retailer_name: "retailer_name".into(),
            retailer_address: "retailer_address".into(),
        }
    }
}

/// How to read a claims file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub delimiter: char,
    pub columns: ColumnNames,
    /// `chrono` format strings, tried in order.
    pub date_formats: Vec<String>,
    pub min_date: NaiveDate,
    pub max_date: NaiveDate,
    /// Prizes at or below this amount are not recorded prizes.
    #[serde(with = "crate::money::serde_dollars")]
    pub recorded_prize_threshold: Cents,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            delimiter: ',',
            columns: ColumnNames::default(),
            date_formats: vec!["%Y-%m-%d".into(), "%m/%d/%Y".into()],
            min_date: NaiveDate::from_ymd_opt(2006, 3, 31).unwrap(),
            max_date: NaiveDate::from_ymd_opt(2020, 1, 31).unwrap(),
            recorded_prize_threshold: Cents::from_whole_dollars(600),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowErrorKind {
    Malformed(String),
    MissingValue(String),
    BadAmount(String),
    BadDate(String),
    BadGameType(String),
    BelowThreshold(Cents),
    DateOutOfRange(NaiveDate),
}

impl fmt::Display for RowErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowErrorKind::Malformed(e) => write!(f, "malformed row: {e}"),
            RowErrorKind::MissingValue(col) => write!(f, "missing value for column {col}"),
            RowErrorKind::BadAmount(v) => write!(f, "unparseable prize amount {v:?}"),
            RowErrorKind::BadDate(v) => write!(f, "unparseable date {v:?}"),
            RowErrorKind::BadGameType(v) => write!(f, "unknown game type {v:?}"),
            RowErrorKind::BelowThreshold(c) => {
                write!(f, "below recorded-prize threshold ({c})")
            }
            RowErrorKind::DateOutOfRange(d) => write!(f, "paid date {d} outside dataset range"),
        }
    }
}

/// A quarantined input row. `row` counts data rows from 1, header excluded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub row: usize,
    pub kind: RowErrorKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedClaims {
    pub records: Vec<ClaimRecord>,
    pub errors: Vec<RowError>,
}

struct ColumnIndex {
    winner_name: usize,
    city: usize,
    county: usize,
    game_type: usize,
    prize_amount: usize,
    lottery_name: usize,
    claim_center: usize,
    paid_date: usize,
    retailer_name: usize,
    retailer_address: usize,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, names: &ColumnNames) -> Result<Self, IngestError> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        Ok(Self {
            winner_name: find(&names.winner_name)?,
            city: find(&names.city)?,
            county: find(&names.county)?,
            game_type: find(&names.game_type)?,
            prize_amount: find(&names.prize_amount)?,
            lottery_name: find(&names.lottery_name)?,
            claim_center: find(&names.claim_center)?,
            paid_date: find(&names.paid_date)?,
            retailer_name: find(&names.retailer_name)?,
            retailer_address: find(&names.retailer_address)?,
        })
    }
}

/// Reads delimited claim rows. Schema problems (missing columns, unreadable
/// header) are fatal; bad rows are collected in [`ParsedClaims::errors`].
pub fn parse_claims<R: Read>(source: R, schema: &SchemaConfig) -> Result<ParsedClaims, IngestError> {
    let delimiter = u8::try_from(schema.delimiter)
        .map_err(|_| IngestError::Schema(format!("delimiter {:?} is not ASCII", schema.delimiter)))?;
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).flexible(true).from_reader(source);
    let headers = reader.headers().map_err(|e| IngestError::Schema(format!("cannot read header row: {e}")))?.clone();
    // a file with no header row at all holds no claims
    if headers.iter().all(|h| h.trim().is_empty()) && reader.records().next().is_none() {
        return Ok(ParsedClaims::default());
    }
    let idx = ColumnIndex::resolve(&headers, &schema.columns)?;

    let mut out = ParsedClaims::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let parsed = match row {
            Ok(row) => parse_row(&row, &idx, schema),
            Err(e) => Err(RowErrorKind::Malformed(e.to_string())),
        };
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(kind) => out.errors.push(RowError { row: row_no, kind }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, idx: &ColumnIndex, schema: &SchemaConfig) -> Result<ClaimRecord, RowErrorKind> {
    let get = |i: usize| row.get(i).map(str::trim).unwrap_or("");
    let required = |i: usize, name: &str| {
        let v = get(i);
        if v.is_empty() {
            Err(RowErrorKind::MissingValue(name.to_string()))
        } else {
            Ok(v)
        }
    };
    let cols = &schema.columns;

    let winner_id = required(idx.winner_name, &cols.winner_name)?.to_string();
    let raw_amount = required(idx.prize_amount, &cols.prize_amount)?;
    let prize_amount = Cents::parse(raw_amount).map_err(|_| RowErrorKind::BadAmount(raw_amount.to_string()))?;
    let raw_date = required(idx.paid_date, &cols.paid_date)?;
    let paid_date =
        parse_date(raw_date, &schema.date_formats).ok_or_else(|| RowErrorKind::BadDate(raw_date.to_string()))?;
    let raw_game = required(idx.game_type, &cols.game_type)?;
    let game_type = raw_game.parse().map_err(RowErrorKind::BadGameType)?;
    let lottery_name = required(idx.lottery_name, &cols.lottery_name)?.to_string();

    if prize_amount <= schema.recorded_prize_threshold {
        return Err(RowErrorKind::BelowThreshold(prize_amount));
    }
    if paid_date < schema.min_date || paid_date > schema.max_date {
        return Err(RowErrorKind::DateOutOfRange(paid_date));
    }

    Ok(ClaimRecord {
        paid_date,
        winner_id,
        lottery_name,
        game_type,
        prize_amount,
        retailer_name: get(idx.retailer_name).to_string(),
        retailer_address: get(idx.retailer_address).to_string(),
        city: get(idx.city).to_string(),
        county: get(idx.county).to_string(),
        claim_center: get(idx.claim_center).to_string(),
    })
}

fn parse_date(raw: &str, formats: &[String]) -> Option<NaiveDate> {
    formats.iter().find_map(|f| NaiveDate::parse_from_str(raw, f).ok())
}

/// Writes records in the default column layout.
pub fn write_claims<W: std::io::Write>(writer: W, records: &[ClaimRecord]) -> csv::Result<()> {
    let cols = ColumnNames::default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        &cols.winner_name,
        &cols.city,
        &cols.county,
        &cols.game_type,
        &cols.prize_amount,
        &cols.lottery_name,
        &cols.claim_center,
        &cols.paid_date,
        &cols.retailer_name,
        &cols.retailer_address,
    ])?;
    for r in records {
        w.write_record([
            r.winner_id.as_str(),
            &r.city,
            &r.county,
            r.game_type.as_str(),
            &r.prize_amount.to_string(),
            &r.lottery_name,
            &r.claim_center,
            &r.paid_date.format("%Y-%m-%d").to_string(),
            &r.retailer_name,
            &r.retailer_address,
        ])?;
    }
    w.flush()?;
    Ok(())
}
