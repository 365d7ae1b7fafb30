use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::phy::PhyMode;
use crate::{Error, Result};

/// Advertising-channel carriers used by the multi-channel protocols, GHz.
pub const HOP_CHANNELS_GHZ: [f64; 3] = [2.402, 2.426, 2.480];
/// Carrier of the single-channel protocols, GHz.
pub const SINGLE_CHANNEL_GHZ: f64 = 2.480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProtocolKind {
    Glossy,
    RoF,
    #[cfg_attr(feature = "serde", serde(rename = "RoF_SC"))]
    RoFSc,
    Crystal,
    #[cfg_attr(feature = "serde", serde(rename = "Crystal_CH"))]
    CrystalCh,
    #[cfg_attr(feature = "serde", serde(rename = "Crystal_CH_ND"))]
    CrystalChNd,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        ProtocolKind::Glossy,
        ProtocolKind::RoF,
        ProtocolKind::RoFSc,
        ProtocolKind::Crystal,
        ProtocolKind::CrystalCh,
        ProtocolKind::CrystalChNd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Glossy => "Glossy",
            ProtocolKind::RoF => "RoF",
            ProtocolKind::RoFSc => "RoF_SC",
            ProtocolKind::Crystal => "Crystal",
            ProtocolKind::CrystalCh => "Crystal_CH",
            ProtocolKind::CrystalChNd => "Crystal_CH_ND",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        ProtocolKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Many-to-one collection rather than one-to-many dissemination.
    pub fn is_collection(self) -> bool {
        matches!(self, ProtocolKind::Crystal | ProtocolKind::CrystalCh | ProtocolKind::CrystalChNd)
    }
}

impl core::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// How a node's transmissions are triggered within a flood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Trigger {
    /// Every transmission follows a reception.
    RxTx,
    /// The first transmission follows a reception; then fixed Tx, Tx, Rx
    /// cycles regardless of what is heard.
    RxTxTx,
}

/// Per-protocol timing and channel parameters. Durations are milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub tx_n: usize,
    /// Dissemination: longest a flood may run, and the round period.
    pub flood_duration_ms: f64,
    pub period_ms: f64,
    /// Collection: maximum flood durations of the S, T and A phases.
    pub crystal_durations_ms: [f64; 3],
    /// Collection: time reserved for each S, T and A phase.
    pub crystal_periods_ms: [f64; 3],
    pub epoch_ms: f64,
    /// Requested TA pairs per epoch; capped by what fits in the epoch.
    pub ta_pairs: usize,
    pub channels_ghz: Vec<f64>,
    pub trigger: Trigger,
    pub nd_threshold_dbm: f64,
    /// Consecutive empty T phases after which the sink ends the epoch.
    pub max_silent_t: usize,
    /// Messages generated per collection epoch, each at a distinct source.
    pub messages_per_epoch: usize,
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind) -> Self {
        let channels_ghz = match kind {
            ProtocolKind::RoF | ProtocolKind::CrystalCh | ProtocolKind::CrystalChNd => HOP_CHANNELS_GHZ.to_vec(),
            _ => vec![SINGLE_CHANNEL_GHZ],
        };
        let trigger = match kind {
            ProtocolKind::RoF | ProtocolKind::RoFSc => Trigger::RxTxTx,
            _ => Trigger::RxTx,
        };
        ProtocolConfig {
            kind,
            tx_n: 6,
            flood_duration_ms: 100.0,
            period_ms: 200.0,
            crystal_durations_ms: [20.0, 45.0, 15.0],
            crystal_periods_ms: [30.0, 57.0, 27.0],
            epoch_ms: 1000.0,
            ta_pairs: 12,
            channels_ghz,
            trigger,
            nd_threshold_dbm: -70.0,
            max_silent_t: 2,
            messages_per_epoch: 1,
        }
    }

    /// Noise detection is active.
    pub fn noise_detection(&self) -> bool {
        self.kind == ProtocolKind::CrystalChNd
    }

    /// TA pairs actually scheduled: the requested count, limited to what fits
    /// after the S phase.
    pub fn effective_ta_pairs(&self) -> usize {
        let [s, t, a] = self.crystal_periods_ms;
        let fit = libm::floor((self.epoch_ms - s) / (t + a)).max(0.0) as usize;
        self.ta_pairs.min(fit)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_n == 0 {
            return Err(Error::config("tx_n must be at least 1"));
        }
        if self.channels_ghz.is_empty() {
            return Err(Error::config("channels must not be empty"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive")))
            }
        };
        if self.kind.is_collection() {
            positive("epoch", self.epoch_ms)?;
            for k in 0..3 {
                positive("crystal duration", self.crystal_durations_ms[k])?;
                if self.crystal_durations_ms[k] > self.crystal_periods_ms[k] {
                    return Err(Error::config("crystal phase duration exceeds its period"));
                }
            }
            if self.effective_ta_pairs() == 0 {
                return Err(Error::config("no TA pair fits in the epoch"));
            }
            if self.max_silent_t == 0 {
                return Err(Error::config("max_silent_T must be at least 1"));
            }
        } else {
            positive("flood duration", self.flood_duration_ms)?;
            if self.flood_duration_ms > self.period_ms {
                return Err(Error::config("flood duration exceeds the period"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum JamLevel {
    None,
    Mild,
    Strong,
}

impl JamLevel {
    pub const ALL: [JamLevel; 3] = [JamLevel::None, JamLevel::Mild, JamLevel::Strong];

    pub fn name(self) -> &'static str {
        match self {
            JamLevel::None => "none",
            JamLevel::Mild => "mild",
            JamLevel::Strong => "strong",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        JamLevel::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChannelPolicy {
    /// Every jammer sits on the single-channel carrier.
    Single,
    /// Every site runs one burst train per hop channel, each with its own
    /// phase, so all channels are covered.
    PerJammerDistinct,
}

/// Periodic interference bursts from jammers co-located with nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct JammingProfile {
    pub level: JamLevel,
    pub power_mw: f64,
    pub burst_ms: f64,
    pub period_ms: f64,
    pub channel_policy: ChannelPolicy,
    /// Nodes hosting a jammer.
    pub sites: Vec<usize>,
}

impl JammingProfile {
    pub fn none() -> Self {
        JammingProfile {
            level: JamLevel::None,
            power_mw: 0.0,
            burst_ms: 0.0,
            period_ms: 13.0,
            channel_policy: ChannelPolicy::Single,
            sites: Vec::new(),
        }
    }

    pub fn mild(sites: Vec<usize>) -> Self {
        JammingProfile { level: JamLevel::Mild, power_mw: 30.0, burst_ms: 5.0, sites, ..JammingProfile::none() }
    }

    pub fn strong(sites: Vec<usize>) -> Self {
        JammingProfile {
            level: JamLevel::Strong,
            power_mw: 200.0,
            burst_ms: 8.0,
            channel_policy: ChannelPolicy::PerJammerDistinct,
            sites,
            ..JammingProfile::none()
        }
    }

    pub fn for_level(level: JamLevel, sites: Vec<usize>) -> Self {
        match level {
            JamLevel::None => JammingProfile::none(),
            JamLevel::Mild => JammingProfile::mild(sites),
            JamLevel::Strong => JammingProfile::strong(sites),
        }
    }

    pub fn is_active(&self) -> bool {
        self.level != JamLevel::None && self.power_mw > 0.0 && self.burst_ms > 0.0 && !self.sites.is_empty()
    }

    /// Carriers jammed from each site, GHz.
    pub fn channels(&self) -> &'static [f64] {
        match self.channel_policy {
            ChannelPolicy::Single => &[SINGLE_CHANNEL_GHZ],
            ChannelPolicy::PerJammerDistinct => &HOP_CHANNELS_GHZ,
        }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if !self.is_active() {
            return Ok(());
        }
        if !(self.period_ms > 0.0) || self.burst_ms > self.period_ms {
            return Err(Error::config("jamming burst must fit in a positive period"));
        }
        if let Some(&k) = self.sites.iter().find(|&&k| k >= n_nodes) {
            return Err(Error::config(format!("jammer site {k} is not a node")));
        }
        Ok(())
    }
}

/// Radio constants shared by all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    /// Noise power in the simulated receiver bandwidth, dBm.
    pub noise_floor_dbm: f64,
    /// Links at or above this SNR count for connectivity checks.
    pub link_snr_db: f64,
    /// Strongest-vs-rest margin for capture; `None` picks the per-PHY default.
    pub capture_threshold_db: Option<f64>,
    /// Coupling between a jammer and the node it sits on, dB.
    pub jammer_coupling_db: f64,
    /// Gap between slots for turnaround, ms.
    pub turnaround_ms: f64,
    pub tx_power_mw: f64,
    pub rx_power_mw: f64,
    /// Radio-on time of one noise-detection sample, ms.
    pub nd_sample_ms: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power_dbm: 0.0,
            noise_floor_dbm: -95.0,
            link_snr_db: 10.0,
            capture_threshold_db: None,
            jammer_coupling_db: -40.0,
            turnaround_ms: 0.15,
            tx_power_mw: 14.4,
            rx_power_mw: 13.8,
            nd_sample_ms: 0.01,
        }
    }
}

impl RadioParams {
    /// Capture margin for `mode`: 3 dB, or 6 dB for BLE 2M whose short
    /// symbols leave less room for the weaker signals.
    pub fn capture_threshold(&self, mode: PhyMode) -> f64 {
        self.capture_threshold_db.unwrap_or(if mode == PhyMode::Ble2M { 6.0 } else { 3.0 })
    }

    /// Minimum link gain for connectivity.
    pub fn min_link_gain_db(&self) -> f64 {
        self.noise_floor_dbm + self.link_snr_db - self.tx_power_dbm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let g = ProtocolConfig::new(ProtocolKind::Glossy);
        assert_eq!((g.tx_n, g.flood_duration_ms, g.period_ms), (6, 100.0, 200.0));
        assert_eq!(g.channels_ghz, vec![2.480]);
        assert_eq!(ProtocolConfig::new(ProtocolKind::RoF).channels_ghz, vec![2.402, 2.426, 2.480]);
        assert_eq!(ProtocolConfig::new(ProtocolKind::RoFSc).trigger, Trigger::RxTxTx);
        let c = ProtocolConfig::new(ProtocolKind::CrystalChNd);
        assert!(c.noise_detection());
        assert_eq!(c.nd_threshold_dbm, -70.0);
        // 30 + 11 * 84 ms fits in one second, a twelfth pair does not
        assert_eq!(c.effective_ta_pairs(), 11);
        for k in ProtocolKind::ALL {
            assert!(ProtocolConfig::new(k).validate().is_ok());
            assert_eq!(ProtocolKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn jamming_profiles() {
        let m = JammingProfile::mild(vec![1]);
        assert_eq!((m.power_mw, m.burst_ms, m.period_ms), (30.0, 5.0, 13.0));
        assert_eq!(m.channels(), &[2.480]);
        let s = JammingProfile::strong(vec![1, 2, 3]);
        assert_eq!((s.power_mw, s.burst_ms), (200.0, 8.0));
        assert_eq!(s.channels(), &HOP_CHANNELS_GHZ);
        assert!(!JammingProfile::none().is_active());
        assert!(s.validate(3).is_err());
    }
}
