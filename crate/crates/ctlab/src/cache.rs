//! On-disk cache of Monte-Carlo PER tables keyed by a content hash.

use std::path::{Path, PathBuf};

use ctlab_core::flood::{PerGrid, PerTable};
use ctlab_core::phy::{PhyConfig, PhyMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{from_core_run, CliError, Result};

/// Bump when the link model changes in a way that invalidates old tables.
const MODEL_VERSION: u32 = 1;

pub const CACHE_ENV: &str = "CTLAB_CACHE_DIR";

/// `$CTLAB_CACHE_DIR`, or `ctlab-cache` under the system temp directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ctlab-cache"))
}

#[derive(Serialize)]
struct Key<'a> {
    model_version: u32,
    phy: String,
    snr_db: &'a [f64],
    delta_p_db: &'a [f64],
    rfo_hz: &'a [f64],
    payload_bytes: &'a [usize],
    packets_per_cell: u64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    mode: PhyMode,
    values: Vec<f64>,
}

pub fn table_key(phy: &PhyConfig, grid: &PerGrid, seed: u64) -> String {
    let key = Key {
        model_version: MODEL_VERSION,
        phy: format!("{phy:?}"),
        snr_db: &grid.snr_db,
        delta_p_db: &grid.delta_p_db,
        rfo_hz: &grid.rfo_hz,
        payload_bytes: &grid.payload_bytes,
        packets_per_cell: grid.packets_per_cell,
        seed,
    };
    let text = serde_json::to_string(&key).expect("key serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Simulates all cells in parallel; values do not depend on the pool size.
pub fn build_table(phy: &PhyConfig, grid: &PerGrid, seed: u64) -> Result<PerTable> {
    grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| grid.simulate_cell(phy, i, seed))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(from_core_run)?;
    PerTable::from_values(phy.mode, grid.clone(), values).map_err(from_core_run)
}

/// Loads the table from `dir` or builds and stores it. Unreadable or
/// mismatching entries are rebuilt.
pub fn load_or_build(dir: &Path, phy: &PhyConfig, grid: &PerGrid, seed: u64) -> Result<PerTable> {
    let key = table_key(phy, grid, seed);
    let path = dir.join(format!("per-{key}.json"));
    if let Some(t) = read_entry(&path, &key, phy, grid) {
        return Ok(t);
    }
    let table = build_table(phy, grid, seed)?;
    let entry = Entry { key, mode: phy.mode, values: table.values().to_vec() };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string(&entry).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(table)
}

fn read_entry(path: &Path, key: &str, phy: &PhyConfig, grid: &PerGrid) -> Option<PerTable> {
    let text = std::fs::read_to_string(path).ok()?;
    let entry: Entry = serde_json::from_str(&text).ok()?;
    if entry.key != key || entry.mode != phy.mode {
        return None;
    }
    PerTable::from_values(phy.mode, grid.clone(), entry.values).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PerGrid {
        PerGrid {
            snr_db: vec![0.0, 20.0],
            delta_p_db: vec![0.0],
            rfo_hz: vec![1e3],
            payload_bytes: vec![4],
            packets_per_cell: 8,
        }
    }

    #[test]
    fn keys_depend_on_content() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let g = grid();
        assert_eq!(table_key(&phy, &g, 1), table_key(&phy, &g, 1));
        assert_ne!(table_key(&phy, &g, 1), table_key(&phy, &g, 2));
        let mut g2 = g.clone();
        g2.packets_per_cell = 9;
        assert_ne!(table_key(&phy, &g, 1), table_key(&phy, &g2, 1));
        assert_ne!(table_key(&phy, &g, 1), table_key(&PhyConfig::new(PhyMode::Ble2M), &g, 1));
    }

    #[test]
    fn corrupt_entries_are_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let g = grid();
        let fresh = load_or_build(dir.path(), &phy, &g, 3).unwrap();
        let path = dir.path().join(format!("per-{}.json", table_key(&phy, &g, 3)));
        assert!(path.exists());
        assert_eq!(load_or_build(dir.path(), &phy, &g, 3).unwrap(), fresh);
        std::fs::write(&path, "{ not json").unwrap();
        assert_eq!(load_or_build(dir.path(), &phy, &g, 3).unwrap(), fresh);
        let repaired: Entry = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(repaired.values, fresh.values());
    }
}
