//! PHY modes, packet coding and BFSK modulation.

pub mod conv;
pub mod dsss;
mod fsk;
pub mod pattern;

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use fsk::{modulate, tone_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhyMode {
    #[cfg_attr(feature = "serde", serde(rename = "BLE_2M"))]
    Ble2M,
    #[cfg_attr(feature = "serde", serde(rename = "BLE_1M"))]
    Ble1M,
    #[cfg_attr(feature = "serde", serde(rename = "BLE_500K"))]
    Ble500K,
    #[cfg_attr(feature = "serde", serde(rename = "BLE_125K"))]
    Ble125K,
    #[cfg_attr(feature = "serde", serde(rename = "IEEE_802_15_4"))]
    Ieee802154,
}

impl PhyMode {
    pub const ALL: [PhyMode; 5] = [
        PhyMode::Ble2M,
        PhyMode::Ble1M,
        PhyMode::Ble500K,
        PhyMode::Ble125K,
        PhyMode::Ieee802154,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhyMode::Ble2M => "BLE_2M",
            PhyMode::Ble1M => "BLE_1M",
            PhyMode::Ble500K => "BLE_500K",
            PhyMode::Ble125K => "BLE_125K",
            PhyMode::Ieee802154 => "IEEE_802_15_4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn is_ble(self) -> bool {
        self != PhyMode::Ieee802154
    }

    /// Largest carrier offset the standard tolerates, in Hz.
    pub fn cfo_limit_hz(self) -> f64 {
        if self.is_ble() {
            150e3
        } else {
            100e3
        }
    }
}

impl core::fmt::Display for PhyMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coding {
    Uncoded,
    ConvR12,
    ConvR12Manchester,
    Dsss32Chip,
}

/// Rates and framing of one PHY mode.
///
/// `symbol_rate` is the rate of the binary channel symbols that reach the
/// modulator (bits for the uncoded modes, coded bits for 500K, pattern chips
/// for 125K and DSSS chips for 802.15.4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub mode: PhyMode,
    pub symbol_rate: f64,
    pub data_rate: f64,
    pub samples_per_symbol: usize,
    pub preamble_bits: usize,
    pub coding: Coding,
    /// Peak frequency deviation of the BFSK tones, Hz.
    pub deviation_hz: f64,
}

pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 8;
pub const MAX_PAYLOAD: usize = 255;

impl PhyConfig {
    pub fn new(mode: PhyMode) -> Self {
        let (symbol_rate, data_rate, preamble_bits, coding) = match mode {
            PhyMode::Ble2M => (2e6, 2e6, 16, Coding::Uncoded),
            PhyMode::Ble1M => (1e6, 1e6, 8, Coding::Uncoded),
            PhyMode::Ble500K => (1e6, 500e3, 8, Coding::ConvR12),
            PhyMode::Ble125K => (1e6, 125e3, 8, Coding::ConvR12Manchester),
            PhyMode::Ieee802154 => (2e6, 250e3, 32, Coding::Dsss32Chip),
        };
        // Modulation index 0.5 everywhere: GFSK at h = 0.5 for BLE, and the
        // MSK view of O-QPSK (500 kHz = 1 MHz O-QPSK symbol rate / 2).
        let deviation_hz = symbol_rate / 4.0;
        PhyConfig {
            mode,
            symbol_rate,
            data_rate,
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
            preamble_bits,
            coding,
            deviation_hz,
        }
    }

    pub fn with_samples_per_symbol(mut self, sps: usize) -> Result<Self> {
        if sps < 2 {
            return Err(Error::invalid(format!("samples_per_symbol must be >= 2, got {sps}")));
        }
        self.samples_per_symbol = sps;
        Ok(self)
    }

    pub fn with_preamble_bits(mut self, n: usize) -> Self {
        self.preamble_bits = n;
        self
    }

    /// Overrides the tone deviation, e.g. `symbol_rate / 2` for orthogonal
    /// tones.
    pub fn with_deviation(mut self, hz: f64) -> Self {
        self.deviation_hz = hz;
        self
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol < 2 {
            return Err(Error::invalid("samples_per_symbol must be >= 2"));
        }
        if !(self.symbol_rate > 0.0 && self.data_rate > 0.0) {
            return Err(Error::invalid("rates must be positive"));
        }
        if !(self.deviation_hz > 0.0 && self.deviation_hz < self.sample_rate() / 2.0) {
            return Err(Error::invalid("deviation must lie in (0, sample_rate / 2)"));
        }
        Ok(())
    }

    /// Channel symbols carrying `payload_len` bytes, preamble excluded.
    pub fn coded_len(&self, payload_len: usize) -> usize {
        let bits = 8 * payload_len;
        match self.coding {
            Coding::Uncoded => bits,
            Coding::ConvR12 => 2 * (bits + conv::MEMORY),
            Coding::ConvR12Manchester => pattern::CHIPS_PER_BIT * 2 * (bits + conv::MEMORY),
            Coding::Dsss32Chip => bits / dsss::BITS_PER_SYMBOL * dsss::CHIPS_PER_SYMBOL,
        }
    }

    /// Channel symbols of a whole frame, preamble included.
    pub fn frame_len(&self, payload_len: usize) -> usize {
        self.preamble_bits + self.coded_len(payload_len)
    }

    /// Inverse of [`frame_len`](Self::frame_len).
    pub fn payload_len_for_frame(&self, frame_len: usize) -> Result<usize> {
        let coded = frame_len
            .checked_sub(self.preamble_bits)
            .ok_or_else(|| Error::framing("frame shorter than preamble"))?;
        let per_byte = self.coded_len(2) - self.coded_len(1);
        let fixed = self.coded_len(1) - per_byte;
        let len = coded
            .checked_sub(fixed)
            .filter(|n| n % per_byte == 0)
            .map(|n| n / per_byte)
            .filter(|&n| (1..=MAX_PAYLOAD).contains(&n))
            .ok_or_else(|| {
                Error::framing(format!(
                    "{} coded symbols do not match any {} payload length",
                    coded, self.mode
                ))
            })?;
        Ok(len)
    }

    /// Over-the-air time of the whole frame at the channel symbol rate.
    pub fn frame_airtime(&self, payload_len: usize) -> f64 {
        self.frame_len(payload_len) as f64 / self.symbol_rate
    }
}

/// Airtime of `total_bits` at the mode's effective data rate.
pub fn packet_airtime(total_bits: usize, phy: &PhyConfig) -> Result<f64> {
    if total_bits == 0 {
        return Err(Error::invalid("packet must contain at least one bit"));
    }
    Ok(total_bits as f64 / phy.data_rate)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    payload: Vec<u8>,
}

impl Packet {
    pub fn new(payload: Vec<u8>) -> Result<Self> {
        if payload.is_empty() || payload.len() > MAX_PAYLOAD {
            return Err(Error::invalid(format!(
                "payload length must be 1..={MAX_PAYLOAD}, got {}",
                payload.len()
            )));
        }
        Ok(Packet { payload })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }

    /// Payload bits, least significant bit of each byte first.
    pub fn bits(&self) -> Vec<u8> {
        bytes_to_bits(&self.payload)
    }
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (b >> i) & 1))
        .collect()
}

pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << i)))
        .collect()
}

/// Alternating 0101... preamble.
pub fn preamble(phy: &PhyConfig) -> Vec<u8> {
    (0..phy.preamble_bits).map(|i| (i % 2) as u8).collect()
}

/// Preamble followed by the coded payload, as binary channel symbols.
pub fn encode(packet: &Packet, phy: &PhyConfig) -> Result<Vec<u8>> {
    phy.validate()?;
    let bits = packet.bits();
    let mut frame = preamble(phy);
    frame.reserve(phy.coded_len(packet.payload_len()));
    match phy.coding {
        Coding::Uncoded => frame.extend_from_slice(&bits),
        Coding::ConvR12 => frame.extend(conv::BLE_CODED.encode(&bits)),
        Coding::ConvR12Manchester => frame.extend(pattern::map(&conv::BLE_CODED.encode(&bits))),
        Coding::Dsss32Chip => frame.extend(dsss::spread(&bits)),
    }
    Ok(frame)
}

/// Strips the preamble and decodes the payload bits of a frame.
pub fn decode(frame: &[u8], phy: &PhyConfig) -> Result<Vec<u8>> {
    phy.payload_len_for_frame(frame.len())?;
    Ok(decode_coded(&frame[phy.preamble_bits..], phy))
}

/// Decodes a coded payload whose length is already known to be consistent.
pub(crate) fn decode_coded(coded: &[u8], phy: &PhyConfig) -> Vec<u8> {
    match phy.coding {
        Coding::Uncoded => coded.to_vec(),
        Coding::ConvR12 => conv::BLE_CODED.decode(coded),
        Coding::ConvR12Manchester => conv::BLE_CODED.decode(&pattern::demap(coded)),
        Coding::Dsss32Chip => dsss::despread(coded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn packet(n: usize) -> Packet {
        Packet::new((0..n).map(|i| (i * 37 + 11) as u8).collect()).unwrap()
    }

    #[test]
    fn data_rates_per_mode() {
        let rates: Vec<f64> = PhyMode::ALL.iter().map(|&m| PhyConfig::new(m).data_rate).collect();
        assert_eq!(rates, [2e6, 1e6, 500e3, 125e3, 250e3]);
        assert_eq!(PhyConfig::new(PhyMode::Ble500K).symbol_rate, 1e6);
        assert_eq!(PhyConfig::new(PhyMode::Ble125K).symbol_rate, 1e6);
    }

    #[test]
    fn sps_below_two_rejected() {
        assert!(PhyConfig::new(PhyMode::Ble1M).with_samples_per_symbol(1).is_err());
    }

    #[test]
    fn payload_bounds() {
        assert!(Packet::new(vec![]).is_err());
        assert!(Packet::new(vec![0; 256]).is_err());
        assert!(Packet::new(vec![0; 255]).is_ok());
    }

    #[test]
    fn uncoded_is_preamble_plus_payload() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let p = packet(4);
        let mut expected = preamble(&phy);
        expected.extend(p.bits());
        assert_eq!(encode(&p, &phy).unwrap(), expected);
    }

    #[test]
    fn coded_lengths() {
        let bits = 8 * 30;
        let c500 = PhyConfig::new(PhyMode::Ble500K);
        let c125 = PhyConfig::new(PhyMode::Ble125K);
        let dsss = PhyConfig::new(PhyMode::Ieee802154);
        assert_eq!(c500.coded_len(30), 2 * (bits + 3));
        assert_eq!(c125.coded_len(30), 4 * c500.coded_len(30));
        assert_eq!(dsss.coded_len(30), 8 * bits);
        for m in PhyMode::ALL {
            let phy = PhyConfig::new(m);
            assert_eq!(encode(&packet(30), &phy).unwrap().len(), phy.frame_len(30));
        }
    }

    #[test]
    fn round_trip_every_mode() {
        for m in PhyMode::ALL {
            let phy = PhyConfig::new(m);
            let p = packet(17);
            let frame = encode(&p, &phy).unwrap();
            assert_eq!(bits_to_bytes(&decode(&frame, &phy).unwrap()), p.payload(), "{m}");
        }
    }

    #[test]
    fn bad_frame_length_is_framing_error() {
        let phy = PhyConfig::new(PhyMode::Ble500K);
        let mut frame = encode(&packet(3), &phy).unwrap();
        frame.pop();
        assert!(matches!(decode(&frame, &phy), Err(Error::Framing(_))));
        assert!(matches!(decode(&[0, 1], &phy), Err(Error::Framing(_))));
    }

    #[test]
    fn payload_len_inverse() {
        for m in PhyMode::ALL {
            let phy = PhyConfig::new(m);
            for n in [1, 2, 30, 255] {
                assert_eq!(phy.payload_len_for_frame(phy.frame_len(n)).unwrap(), n);
            }
        }
    }

    #[test]
    fn airtime_examples() {
        let p2m = PhyConfig::new(PhyMode::Ble2M);
        let p125 = PhyConfig::new(PhyMode::Ble125K);
        assert!((packet_airtime(240, &p2m).unwrap() - 120e-6).abs() < 1e-15);
        assert!((packet_airtime(1600, &p125).unwrap() - 12.8e-3).abs() < 1e-15);
        let ratio = packet_airtime(500, &p125).unwrap() / packet_airtime(500, &p2m).unwrap();
        assert!((ratio - 16.0).abs() < 1e-12);
        assert!(packet_airtime(0, &p2m).is_err());
    }
}
