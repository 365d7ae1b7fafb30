//! Link-level packet error lookup for the slot simulator.
//!
//! Here "PER" means the probability that a packet is not delivered intact,
//! i.e. `1 − PRR`, so lost preambles count as failures.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::ChannelScenario;
use crate::link::LinkScenario;
use crate::math::bracket;
use crate::phy::{PhyConfig, PhyMode, MAX_PAYLOAD};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// One reception as seen by the slot simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuery {
    /// Strongest signal over noise plus interference, dB.
    pub snr_db: f64,
    /// Strongest vs. the sum of the other same-data signals; `None` when
    /// the strongest is alone.
    pub delta_p_db: Option<f64>,
    /// Offset between the two strongest carriers, Hz.
    pub rfo_hz: f64,
    pub payload_bytes: usize,
}

/// Anything that maps a reception to a failure probability.
pub trait PerModel {
    fn per(&self, q: &LinkQuery) -> f64;
}

/// Hard threshold on SNR with no beating loss. Useful for idealized runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPer {
    pub snr_db: f64,
}

impl PerModel for ThresholdPer {
    fn per(&self, q: &LinkQuery) -> f64 {
        if q.snr_db >= self.snr_db {
            0.0
        } else {
            1.0
        }
    }
}

/// Axes of a Monte-Carlo PER table.
#[derive(Debug, Clone, PartialEq)]
pub struct PerGrid {
    pub snr_db: Vec<f64>,
    pub delta_p_db: Vec<f64>,
    pub rfo_hz: Vec<f64>,
    pub payload_bytes: Vec<usize>,
    pub packets_per_cell: u64,
}

impl PerGrid {
    /// A grid covering the ranges the flood simulator visits, for the given
    /// payload lengths.
    pub fn standard(payload_bytes: Vec<usize>) -> Self {
        PerGrid {
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 30.0],
            delta_p_db: vec![0.0, 1.0, 2.0, 3.0, 6.0],
            rfo_hz: vec![100.0, 300.0, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5],
            payload_bytes,
            packets_per_cell: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ascending = |name: &str, v: &[f64]| {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
                Err(Error::config(format!("{name} axis must be non-empty, finite and strictly ascending")))
            } else {
                Ok(())
            }
        };
        ascending("snr", &self.snr_db)?;
        ascending("delta_p", &self.delta_p_db)?;
        ascending("rfo", &self.rfo_hz)?;
        if self.rfo_hz[0] <= 0.0 {
            return Err(Error::config("rfo axis must be positive"));
        }
        let p: Vec<f64> = self.payload_bytes.iter().map(|&b| b as f64).collect();
        ascending("payload", &p)?;
        if self.payload_bytes.iter().any(|&b| b == 0 || b > MAX_PAYLOAD) {
            return Err(Error::config("payload axis must lie in 1..=255"));
        }
        if self.packets_per_cell == 0 {
            return Err(Error::config("packets_per_cell must be positive"));
        }
        Ok(())
    }

    fn per_payload(&self) -> usize {
        self.snr_db.len() * (1 + self.delta_p_db.len() * self.rfo_hz.len())
    }

    /// Number of cells; cell `i` is simulated by [`PerGrid::cell`].
    pub fn len(&self) -> usize {
        self.payload_bytes.len() * self.per_payload()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Link scenario of cell `index`. Cells are ordered by payload, then
    /// single-transmitter cells by SNR, then two-transmitter cells by SNR,
    /// ΔP and RFO.
    pub fn cell(&self, phy: &PhyConfig, index: usize) -> Result<LinkScenario> {
        if index >= self.len() {
            return Err(Error::invalid(format!("cell {index} out of range")));
        }
        let per = self.per_payload();
        let payload = self.payload_bytes[index / per];
        let mut k = index % per;
        let ns = self.snr_db.len();
        let channel = if k < ns {
            ChannelScenario::single(self.snr_db[k])
        } else {
            k -= ns;
            let nr = self.rfo_hz.len();
            let nd = self.delta_p_db.len();
            let (s, d, r) = (k / (nd * nr), (k / nr) % nd, k % nr);
            ChannelScenario::ct2(self.rfo_hz[r], self.delta_p_db[d], self.snr_db[s])
        };
        Ok(LinkScenario::new(phy.clone(), channel, payload))
    }

    /// Monte-Carlo `1 − PRR` of cell `index`.
    pub fn simulate_cell(&self, phy: &PhyConfig, index: usize, seed: u64) -> Result<f64> {
        let scenario = self.cell(phy, index)?;
        let r = scenario.run(derive_seed(seed, index as u64), 0..self.packets_per_cell, false)?;
        Ok(1.0 - r.tally.metrics()?.prr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerTable {
    pub mode: PhyMode,
    pub grid: PerGrid,
    values: Vec<f64>,
}

impl PerTable {
    /// Builds a table from cell values in [`PerGrid::cell`] order.
    pub fn from_values(mode: PhyMode, grid: PerGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::invalid(format!("expected {} cell values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("cell values must lie in [0, 1]"));
        }
        Ok(PerTable { mode, grid, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn single(&self, p: usize, snr_db: f64) -> f64 {
        let base = p * self.grid.per_payload();
        let (i, w) = bracket(&self.grid.snr_db, snr_db);
        let at = |k: usize| self.values[base + k.min(self.grid.snr_db.len() - 1)];
        (1.0 - w) * at(i) + w * at(i + 1)
    }

    fn beating(&self, p: usize, snr_db: f64, dp: f64, rfo: f64) -> f64 {
        let g = &self.grid;
        let (nd, nr) = (g.delta_p_db.len(), g.rfo_hz.len());
        let base = p * g.per_payload() + g.snr_db.len();
        let clamp = |k: usize, n: usize| k.min(n - 1);
        let (si, sw) = bracket(&g.snr_db, snr_db);
        let (di, dw) = bracket(&g.delta_p_db, dp);
        let log_rfo: Vec<f64> = g.rfo_hz.iter().map(|&r| libm::log10(r)).collect();
        let (ri, rw) = bracket(&log_rfo, libm::log10(rfo.max(1e-3)));
        let mut acc = 0.0;
        for (ds, ws) in [(0, 1.0 - sw), (1, sw)] {
            for (dd, wd) in [(0, 1.0 - dw), (1, dw)] {
                for (dr, wr) in [(0, 1.0 - rw), (1, rw)] {
                    let w = ws * wd * wr;
                    if w == 0.0 {
                        continue;
                    }
                    let s = clamp(si + ds, g.snr_db.len());
                    let d = clamp(di + dd, nd);
                    let r = clamp(ri + dr, nr);
                    acc += w * self.values[base + (s * nd + d) * nr + r];
                }
            }
        }
        acc
    }
}

impl PerModel for PerTable {
    fn per(&self, q: &LinkQuery) -> f64 {
        let axis: Vec<f64> = self.grid.payload_bytes.iter().map(|&b| b as f64).collect();
        let (p, w) = bracket(&axis, q.payload_bytes as f64);
        let p_hi = (p + 1).min(axis.len() - 1);
        let eval = |p: usize| match q.delta_p_db {
            None => self.single(p, q.snr_db),
            Some(dp) => self.beating(p, q.snr_db, dp, q.rfo_hz),
        };
        let v = if w == 0.0 { eval(p) } else { (1.0 - w) * eval(p) + w * eval(p_hi) };
        v.clamp(0.0, 1.0)
    }
}

/// Simulates every cell in order on the calling thread.
pub fn derive_per_table(phy: &PhyConfig, grid: &PerGrid, seed: u64) -> Result<PerTable> {
    grid.validate()?;
    let values = (0..grid.len()).map(|i| grid.simulate_cell(phy, i, seed)).collect::<Result<Vec<_>>>()?;
    PerTable::from_values(phy.mode, grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PerGrid {
        PerGrid {
            snr_db: vec![0.0, 10.0],
            delta_p_db: vec![0.0, 6.0],
            rfo_hz: vec![100.0, 1e4],
            payload_bytes: vec![8, 64],
            packets_per_cell: 1,
        }
    }

    #[test]
    fn cell_layout() {
        let g = tiny();
        assert_eq!(g.len(), 2 * 2 * (1 + 4));
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let c = g.cell(&phy, 0).unwrap();
        assert_eq!((c.payload_bytes, c.channel.transmitters.len()), (8, 1));
        // payload 64, snr 10, dp 6, rfo 1e4 is the very last cell
        let c = g.cell(&phy, g.len() - 1).unwrap();
        assert_eq!(c.payload_bytes, 64);
        assert_eq!(c.channel.snr_db, 10.0);
        assert!((c.channel.rfo(0, 1).unwrap() - 1e4).abs() < 1e-9);
        assert!((c.channel.delta_p_db(0, 1).unwrap() - 6.0).abs() < 1e-9);
        assert!(g.cell(&phy, g.len()).is_err());
    }

    #[test]
    fn interpolates_and_clamps() {
        let g = tiny();
        let mut values = vec![0.0; g.len()];
        // single cells of payload 8: 1.0 at 0 dB, 0.0 at 10 dB
        values[0] = 1.0;
        // beating cells of payload 8 at snr 0: all 0.5
        for v in &mut values[2..6] {
            *v = 0.5;
        }
        let t = PerTable::from_values(PhyMode::Ble1M, g, values).unwrap();
        let q = |snr_db, dp| LinkQuery { snr_db, delta_p_db: dp, rfo_hz: 1e3, payload_bytes: 8 };
        assert!((t.per(&q(5.0, None)) - 0.5).abs() < 1e-12);
        assert_eq!(t.per(&q(-40.0, None)), 1.0);
        assert_eq!(t.per(&q(40.0, None)), 0.0);
        assert!((t.per(&q(0.0, Some(3.0))) - 0.5).abs() < 1e-12);
        assert!((t.per(&q(5.0, Some(3.0))) - 0.25).abs() < 1e-12);
        // halfway between the payload rows
        let mid = LinkQuery { payload_bytes: 36, ..q(5.0, None) };
        assert!((t.per(&mid) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut g = tiny();
        g.snr_db = vec![5.0, 5.0];
        assert!(g.validate().is_err());
        let mut g = tiny();
        g.payload_bytes = vec![0];
        assert!(g.validate().is_err());
        assert!(PerTable::from_values(PhyMode::Ble1M, tiny(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn clean_cells_are_lossless() {
        let mut g = tiny();
        g.snr_db = vec![25.0];
        g.payload_bytes = vec![8];
        g.packets_per_cell = 20;
        let t = derive_per_table(&PhyConfig::new(PhyMode::Ble1M), &g, 4).unwrap();
        assert_eq!(t.values()[0], 0.0);
    }
}
