//! JSON experiment specs. Unknown fields are rejected everywhere.

use std::path::Path;

use ctlab_core::flood::{JamLevel, PathLoss, ProtocolKind, RadioParams};
use ctlab_core::metrics::{RfoConfig, SIGNIFICANT_SHARE};
use ctlab_core::phy::{PhyMode, MAX_PAYLOAD};
use ctlab_core::receiver::{AdcConfig, ReceiverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Smallest Monte-Carlo batch accepted for any grid point.
pub const MIN_PACKETS: u64 = 100;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn bad(field: &str, msg: &str) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}

fn non_empty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(bad(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(bad(field, "values must be finite"))
    }
}

fn payloads(field: &str, v: &[usize]) -> Result<()> {
    non_empty(field, v)?;
    if v.iter().any(|&b| b == 0 || b > MAX_PAYLOAD) {
        return Err(bad(field, "payload lengths must lie in 1..=255"));
    }
    Ok(())
}

fn packets(field: &str, n: u64) -> Result<()> {
    if n < MIN_PACKETS {
        return Err(bad(field, &format!("must be at least {MIN_PACKETS}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcSpec {
    pub bits: u32,
    pub headroom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverSpec {
    pub power_fraction: f64,
    pub max_preamble_errors: usize,
    /// Quantize the frame after calibrating gain on the preamble.
    pub adc: Option<AdcSpec>,
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        let d = ReceiverConfig::default();
        ReceiverSpec { power_fraction: d.power_fraction, max_preamble_errors: d.max_preamble_errors, adc: None }
    }
}

impl ReceiverSpec {
    pub fn config(&self) -> Result<ReceiverConfig> {
        if !(self.power_fraction > 0.0 && self.power_fraction <= 1.0) {
            return Err(bad("receiver.power_fraction", "must lie in (0, 1]"));
        }
        if let Some(a) = self.adc {
            if !(1..=16).contains(&a.bits) || !(a.headroom > 0.0) {
                return Err(bad("receiver.adc", "bits must be 1..=16 and headroom positive"));
            }
        }
        Ok(ReceiverConfig {
            power_fraction: self.power_fraction,
            max_preamble_errors: self.max_preamble_errors,
            adc: self.adc.map(|a| AdcConfig { bits: a.bits, headroom: a.headroom }),
            ..ReceiverConfig::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    pub prominence: f64,
    pub min_errored_packets: u64,
    pub merge_bins: usize,
    pub max_harmonic: usize,
    /// Share of the strongest peak a peak needs to count as significant.
    pub significance: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        let d = RfoConfig::default();
        EstimatorSpec {
            prominence: d.prominence,
            min_errored_packets: d.min_errored_packets,
            merge_bins: d.merge_bins,
            max_harmonic: d.max_harmonic,
            significance: SIGNIFICANT_SHARE,
        }
    }
}

impl EstimatorSpec {
    pub fn config(&self) -> Result<RfoConfig> {
        if !(self.significance > 0.0 && self.significance <= 1.0) {
            return Err(bad("estimator.significance", "must lie in (0, 1]"));
        }
        Ok(RfoConfig {
            prominence: self.prominence,
            min_errored_packets: self.min_errored_packets,
            merge_bins: self.merge_bins,
            max_harmonic: self.max_harmonic,
            ..RfoConfig::default()
        })
    }
}

/// PER sweep over the cartesian product of its axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub phys: Vec<PhyMode>,
    pub snr_db: Vec<f64>,
    pub rfo_hz: Vec<f64>,
    pub delta_p_db: Vec<f64>,
    pub payload_bytes: Vec<usize>,
    pub packets_per_point: u64,
    /// Concurrent transmitters per point, 1..=12.
    #[serde(default = "default_n_tx")]
    pub n_tx: Vec<usize>,
    /// Temperature of the last transmitter, °C.
    #[serde(default = "default_temperature")]
    pub temperature_c: Vec<f64>,
    #[serde(default = "default_reference_temp")]
    pub reference_temp_c: f64,
    #[serde(default)]
    pub drift_ppm_per_c: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub receiver: ReceiverSpec,
}

fn default_n_tx() -> Vec<usize> {
    vec![2]
}

fn default_temperature() -> Vec<f64> {
    vec![25.0]
}

fn default_reference_temp() -> f64 {
    25.0
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        non_empty("phys", &self.phys)?;
        non_empty("snr_db", &self.snr_db)?;
        non_empty("rfo_hz", &self.rfo_hz)?;
        non_empty("delta_p_db", &self.delta_p_db)?;
        non_empty("temperature_c", &self.temperature_c)?;
        non_empty("n_tx", &self.n_tx)?;
        finite("snr_db", &self.snr_db)?;
        finite("rfo_hz", &self.rfo_hz)?;
        finite("delta_p_db", &self.delta_p_db)?;
        finite("temperature_c", &self.temperature_c)?;
        if self.rfo_hz.iter().any(|&r| r < 0.0) {
            return Err(bad("rfo_hz", "must be non-negative"));
        }
        if self.n_tx.iter().any(|&n| n == 0 || n > 12) {
            return Err(bad("n_tx", "must lie in 1..=12"));
        }
        payloads("payload_bytes", &self.payload_bytes)?;
        packets("packets_per_point", self.packets_per_point)?;
        if self.drift_ppm_per_c > 0.0 {
            return Err(bad("drift_ppm_per_c", "must not be positive"));
        }
        self.receiver.config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub cfo_hz: f64,
    /// Power relative to the strongest transmitter, dB (≤ 0).
    #[serde(default)]
    pub power_db: f64,
}

/// Error-histogram and RFO study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub phy: PhyMode,
    pub payload_bytes: usize,
    pub snr_db: f64,
    pub transmitters: Vec<TxSpec>,
    pub packets: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub same_data: bool,
    #[serde(default)]
    pub receiver: ReceiverSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
}

fn yes() -> bool {
    true
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        payloads("payload_bytes", &[self.payload_bytes])?;
        finite("snr_db", &[self.snr_db])?;
        if self.transmitters.is_empty() || self.transmitters.len() > 12 {
            return Err(bad("transmitters", "needs 1..=12 entries"));
        }
        for t in &self.transmitters {
            finite("transmitters.cfo_hz", &[t.cfo_hz, t.power_db])?;
            if t.cfo_hz.abs() > self.phy.cfo_limit_hz() {
                return Err(bad("transmitters.cfo_hz", "exceeds the PHY's carrier tolerance"));
            }
        }
        packets("packets", self.packets)?;
        self.receiver.config()?;
        self.estimator.config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TempRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// One transmitter heated across a temperature range next to a reference
/// transmitter at constant temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempSweepSpec {
    pub phy: PhyMode,
    pub payload_bytes: usize,
    pub snr_db: f64,
    /// Heated transmitter power below the reference, dB.
    pub delta_p_db: f64,
    pub reference_cfo_hz: f64,
    /// Heated transmitter offset at `reference_temp_c`.
    pub heated_cfo_hz: f64,
    pub slope_ppm_per_c: f64,
    pub temperatures_c: TempRange,
    pub packets_per_step: u64,
    #[serde(default = "default_reference_temp")]
    pub reference_temp_c: f64,
    #[serde(default)]
    pub allow_increasing_drift: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub receiver: ReceiverSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
}

impl TempSweepSpec {
    pub fn validate(&self) -> Result<()> {
        payloads("payload_bytes", &[self.payload_bytes])?;
        finite(
            "temperatures_c",
            &[self.temperatures_c.start, self.temperatures_c.stop, self.temperatures_c.step],
        )?;
        if !(self.temperatures_c.step > 0.0) || self.temperatures_c.stop < self.temperatures_c.start {
            return Err(bad("temperatures_c", "needs start ≤ stop and a positive step"));
        }
        if self.slope_ppm_per_c > 0.0 && !self.allow_increasing_drift {
            return Err(bad("slope_ppm_per_c", "must not be positive unless allow_increasing_drift is set"));
        }
        finite("snr_db", &[self.snr_db, self.delta_p_db, self.reference_cfo_hz, self.heated_cfo_hz])?;
        packets("packets_per_step", self.packets_per_step)?;
        self.receiver.config()?;
        self.estimator.config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Line { n: usize, spacing_m: f64 },
    Cluster { n: usize, radius_m: f64 },
    TwoRegion { n_dense: usize, n_sparse: usize },
    Gains { gains_db: Vec<Vec<f64>>, initiator: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossSpec {
    pub pl0_db: f64,
    pub exponent: f64,
    pub shadowing_db: f64,
}

impl Default for PathLossSpec {
    fn default() -> Self {
        let p = PathLoss::default();
        PathLossSpec { pl0_db: p.pl0_db, exponent: p.exponent, shadowing_db: p.shadowing_db }
    }
}

impl From<PathLossSpec> for PathLoss {
    fn from(p: PathLossSpec) -> Self {
        PathLoss { pl0_db: p.pl0_db, exponent: p.exponent, shadowing_db: p.shadowing_db }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSpec {
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub link_snr_db: f64,
    pub capture_threshold_db: Option<f64>,
    pub jammer_coupling_db: f64,
    pub turnaround_ms: f64,
    pub tx_power_mw: f64,
    pub rx_power_mw: f64,
    pub nd_sample_ms: f64,
}

impl Default for RadioSpec {
    fn default() -> Self {
        let r = RadioParams::default();
        RadioSpec {
            tx_power_dbm: r.tx_power_dbm,
            noise_floor_dbm: r.noise_floor_dbm,
            link_snr_db: r.link_snr_db,
            capture_threshold_db: r.capture_threshold_db,
            jammer_coupling_db: r.jammer_coupling_db,
            turnaround_ms: r.turnaround_ms,
            tx_power_mw: r.tx_power_mw,
            rx_power_mw: r.rx_power_mw,
            nd_sample_ms: r.nd_sample_ms,
        }
    }
}

impl From<&RadioSpec> for RadioParams {
    fn from(r: &RadioSpec) -> Self {
        RadioParams {
            tx_power_dbm: r.tx_power_dbm,
            noise_floor_dbm: r.noise_floor_dbm,
            link_snr_db: r.link_snr_db,
            capture_threshold_db: r.capture_threshold_db,
            jammer_coupling_db: r.jammer_coupling_db,
            turnaround_ms: r.turnaround_ms,
            tx_power_mw: r.tx_power_mw,
            rx_power_mw: r.rx_power_mw,
            nd_sample_ms: r.nd_sample_ms,
        }
    }
}

/// Overrides of the per-protocol defaults; absent fields keep them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolOverrides {
    pub tx_n: Option<usize>,
    pub max_silent_t: Option<usize>,
    pub messages_per_epoch: Option<usize>,
    pub ta_pairs: Option<usize>,
    pub nd_threshold_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerTableSpec {
    pub snr_db: Vec<f64>,
    pub delta_p_db: Vec<f64>,
    pub rfo_hz: Vec<f64>,
    pub packets_per_cell: u64,
    pub seed: u64,
}

impl Default for PerTableSpec {
    fn default() -> Self {
        let g = ctlab_core::flood::PerGrid::standard(Vec::new());
        PerTableSpec {
            snr_db: g.snr_db,
            delta_p_db: g.delta_p_db,
            rfo_hz: g.rfo_hz,
            packets_per_cell: g.packets_per_cell,
            seed: 1,
        }
    }
}

/// Flooding study over protocol × jamming × payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloodSpec {
    pub phy: PhyMode,
    pub protocols: Vec<ProtocolKind>,
    pub jamming: Vec<JamLevel>,
    pub payload_bytes: Vec<usize>,
    pub rounds: usize,
    /// Results are pooled over these seeds.
    pub seeds: Vec<u64>,
    pub topology: TopologySpec,
    pub jammer_sites: Vec<usize>,
    #[serde(default)]
    pub topology_seed: u64,
    #[serde(default)]
    pub path_loss: PathLossSpec,
    #[serde(default)]
    pub destinations: Option<Vec<usize>>,
    #[serde(default)]
    pub sources: Option<Vec<usize>>,
    #[serde(default)]
    pub radio: RadioSpec,
    #[serde(default)]
    pub protocol: ProtocolOverrides,
    #[serde(default)]
    pub per_table: PerTableSpec,
}

impl FloodSpec {
    pub fn validate(&self) -> Result<()> {
        non_empty("protocols", &self.protocols)?;
        non_empty("jamming", &self.jamming)?;
        non_empty("seeds", &self.seeds)?;
        payloads("payload_bytes", &self.payload_bytes)?;
        if self.rounds == 0 {
            return Err(bad("rounds", "must be positive"));
        }
        if self.jamming.iter().any(|&j| j != JamLevel::None) && self.jammer_sites.is_empty() {
            return Err(bad("jammer_sites", "must not be empty when jamming is enabled"));
        }
        if self.per_table.packets_per_cell == 0 {
            return Err(bad("per_table.packets_per_cell", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"{
        "phys": ["BLE_1M", "IEEE_802_15_4"],
        "snr_db": [25], "rfo_hz": [500], "delta_p_db": [0],
        "payload_bytes": [30], "packets_per_point": 200
    }"#;

    #[test]
    fn sweep_defaults() {
        let s: SweepSpec = parse(SWEEP).unwrap();
        assert_eq!(s.n_tx, vec![2]);
        assert_eq!(s.temperature_c, vec![25.0]);
        assert_eq!(s.phys[1], PhyMode::Ieee802154);
        s.validate().unwrap();
    }

    #[test]
    fn unknown_field_is_named() {
        let text = SWEEP.replace("\"snr_db\"", "\"snr\"");
        let e = parse::<SweepSpec>(&text).unwrap_err().to_string();
        assert!(e.contains("snr"), "{e}");
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn missing_field_is_named() {
        let text = SWEEP.replace("\"packets_per_point\": 200", "\"base_seed\": 1");
        let e = parse::<SweepSpec>(&text).unwrap_err().to_string();
        assert!(e.contains("packets_per_point"), "{e}");
    }

    #[test]
    fn too_few_packets() {
        let s: SweepSpec = parse(&SWEEP.replace("200", "50")).unwrap();
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("packets_per_point"), "{e}");
    }

    #[test]
    fn topology_kinds() {
        let t: TopologySpec = parse(r#"{"kind": "line", "n": 4, "spacing_m": 20}"#).unwrap();
        assert_eq!(t, TopologySpec::Line { n: 4, spacing_m: 20.0 });
        assert!(parse::<TopologySpec>(r#"{"kind": "line", "n": 4, "spacing": 20}"#).is_err());
    }

    #[test]
    fn temperature_range() {
        let r = TempRange { start: 30.0, stop: 75.0, step: 1.0 };
        let v = r.values();
        assert_eq!((v.len(), v[0], v[45]), (46, 30.0, 75.0));
    }
}
