//! Winner-claim ingestion: parsing, store identity and per-player profiles.

mod claims;
mod profile;
mod store;

use thiserror::Error;

pub use claims::{
    parse_claims, write_claims, ClaimRecord, ColumnNames, GameType, ParsedClaims, RowError, RowErrorKind, SchemaConfig,
};
pub use profile::{
    aggregate_players, aggregate_players_by, merge_profiles, read_profiles, write_profiles, PlayerIdentity,
    PlayerProfile, Profiles,
};
pub use store::{normalize_store, normalize_text, StoreKey};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("claims file is missing required column {0:?}")]
    MissingColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid profile on line {line}: {message}")]
    Profile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
