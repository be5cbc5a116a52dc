use serde::{Deserialize, Serialize};

/// Identity of a selling retailer: its normalized name and address.
///
/// Both parts are needed. Chains share names and strip malls share addresses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StoreKey {
    pub name: String,
    pub address: String,
}

impl StoreKey {
    pub fn new(raw_name: &str, raw_address: &str) -> Self {
        normalize_store(raw_name, raw_address)
    }
}

/// Builds the store identity for a raw retailer name and address.
pub fn normalize_store(raw_name: &str, raw_address: &str) -> StoreKey {
    StoreKey { name: normalize_text(raw_name), address: normalize_text(raw_address) }
}

/// Lower-cases, collapses whitespace runs to one space and strips trailing
/// punctuation. Repeated until stable so the result is a fixpoint even for
/// characters whose lowercase form lowercases again.
pub fn normalize_text(raw: &str) -> String {
    let mut current = fold_once(raw);
    loop {
        let next = fold_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn fold_once(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut out = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let trimmed = out.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '#').trim_end();
        if trimmed.len() == out.len() {
            break;
        }
        out.truncate(trimmed.len());
    }
    out
}
