//! Slotted flooding simulator.
//!
//! Time advances in slots of one frame airtime plus turnaround. In every slot
//! each listening node sums the powers of the nodes transmitting, adds the
//! noise floor and any jammer burst overlapping the frame on its channel,
//! and draws success from a [`PerModel`].

mod config;
mod engine;
mod per_table;
mod topology;

use alloc::vec::Vec;

pub use config::{
    ChannelPolicy, JamLevel, JammingProfile, ProtocolConfig, ProtocolKind, RadioParams, Trigger, HOP_CHANNELS_GHZ,
    SINGLE_CHANNEL_GHZ,
};
pub use per_table::{derive_per_table, LinkQuery, PerGrid, PerModel, PerTable, ThresholdPer};
pub use topology::{PathLoss, Topology};

use crate::phy::{PhyConfig, MAX_PAYLOAD};
use crate::{Error, Result};

/// Everything a flood run needs apart from the PER model.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodSetup {
    pub protocol: ProtocolConfig,
    pub topology: Topology,
    pub jamming: JammingProfile,
    pub phy: PhyConfig,
    pub payload_bytes: usize,
    pub radio: RadioParams,
}

impl FloodSetup {
    pub fn new(protocol: ProtocolConfig, topology: Topology, phy: PhyConfig, payload_bytes: usize) -> Self {
        FloodSetup {
            protocol,
            topology,
            jamming: JammingProfile::none(),
            phy,
            payload_bytes,
            radio: RadioParams::default(),
        }
    }

    pub fn with_jamming(mut self, jamming: JammingProfile) -> Self {
        self.jamming = jamming;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.phy.validate()?;
        if self.payload_bytes == 0 || self.payload_bytes > MAX_PAYLOAD {
            return Err(Error::config("payload_bytes must be 1..=255"));
        }
        self.topology.check_connected(self.radio.min_link_gain_db())?;
        self.jamming.validate(self.topology.len())?;
        if self.protocol.kind.is_collection() {
            if self.topology.sources.is_empty() {
                return Err(Error::config("collection needs at least one source"));
            }
        } else if self.topology.destinations.is_empty() {
            return Err(Error::config("dissemination needs at least one destination"));
        }
        Ok(())
    }

    /// Slot length in ms.
    pub fn slot_ms(&self) -> f64 {
        self.phy.frame_airtime(self.payload_bytes) * 1e3 + self.radio.turnaround_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodReport {
    pub rounds: usize,
    /// Message/destination pairs that should have been delivered.
    pub generated: u64,
    pub delivered: u64,
    pub reliability: f64,
    /// Mean over delivered messages only; `None` when nothing arrived.
    pub latency_ms: Option<f64>,
    /// Radio energy per node over the whole run, averaged over nodes.
    pub energy_mj: f64,
    /// Destinations (or sources, for collection) that were owed messages but
    /// received none.
    pub unreached: Vec<usize>,
}

impl FloodReport {
    pub fn lost(&self) -> u64 {
        self.generated - self.delivered
    }
}

/// Runs `n_rounds` rounds (dissemination periods or collection epochs).
pub fn simulate(setup: &FloodSetup, per: &dyn PerModel, n_rounds: usize, seed: u64) -> Result<FloodReport> {
    setup.validate()?;
    if n_rounds == 0 {
        return Err(Error::config("n_rounds must be positive"));
    }
    engine::run(setup, per, n_rounds, seed)
}
