//! Reference benchmarks for the CUBE kit.
//!
//! * `treasure-grid`: deterministic and seeded grid navigation.
//! * `key-vault`: secrets held by a vault service shared across tasks.
//! * `broken-reset`, `broken-isolation`, `broken-schema`: treasure grid
//!   variants that each violate one conformance property on purpose.
//!
//! All seeded behaviour goes through [`splitmix::SplitMix64`].

pub mod grid;
pub mod splitmix;
pub mod vault;

use std::sync::Arc;

use cube_kit::BenchmarkImpl;

pub use grid::{GridAgent, TreasureGrid};
pub use splitmix::{vault_secret, SplitMix64};
pub use vault::{KeyVault, VaultAgent, VaultService};

use grid::Flavor;

pub const REFERENCE_IDS: [&str; 2] = ["treasure-grid", "key-vault"];
pub const BROKEN_IDS: [&str; 3] = ["broken-reset", "broken-isolation", "broken-schema"];

pub fn treasure_grid() -> Arc<dyn BenchmarkImpl> {
    Arc::new(TreasureGrid::new())
}

pub fn key_vault() -> Arc<dyn BenchmarkImpl> {
    Arc::new(KeyVault::new())
}

/// The three broken fixtures, in `BROKEN_IDS` order.
pub fn broken_fixtures() -> Vec<Arc<dyn BenchmarkImpl>> {
    [Flavor::BrokenReset, Flavor::BrokenIsolation, Flavor::BrokenSchema]
        .into_iter()
        .map(|f| Arc::new(TreasureGrid::flavored(f)) as Arc<dyn BenchmarkImpl>)
        .collect()
}

/// Every benchmark id this crate can build.
pub fn catalog() -> Vec<&'static str> {
    REFERENCE_IDS.iter().chain(BROKEN_IDS.iter()).copied().collect()
}

/// A fresh instance of the benchmark registered under `id`.
pub fn by_id(id: &str) -> Option<Arc<dyn BenchmarkImpl>> {
    match id {
        "treasure-grid" => Some(treasure_grid()),
        "key-vault" => Some(key_vault()),
        _ => BROKEN_IDS.iter().position(|b| *b == id).map(|i| broken_fixtures().swap_remove(i)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_match_metadata() {
        for id in catalog() {
            assert_eq!(by_id(id).unwrap().meta().name, id);
        }
        assert!(by_id("nope").is_none());
    }
}
