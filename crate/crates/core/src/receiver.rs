//! Non-coherent BFSK receiver with preamble detection.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::SampleStream;
use crate::math::bessel_i0_scaled;
use crate::phy::{self, tone_table, Packet, PhyConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    /// Preamble power must reach this fraction of `reference_power`.
    pub power_fraction: f64,
    /// Largest number of wrong preamble symbols still accepted.
    pub max_preamble_errors: usize,
    /// Power of a lone transmitter at the receiver.
    pub reference_power: f64,
    /// Gain frozen on the preamble followed by a coarse converter; `None`
    /// demodulates the ideal samples.
    pub adc: Option<AdcConfig>,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig { power_fraction: 0.25, max_preamble_errors: 1, reference_power: 1.0, adc: None }
    }
}

/// Gain control calibrated on the preamble and a uniform I/Q quantizer.
///
/// Full scale is `headroom` times the preamble RMS amplitude. Once the gain is
/// frozen, parts of the packet much weaker than the preamble fall into the
/// quantizer's dead zone, so errors lock to the beating phase seen at the
/// preamble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    pub bits: u32,
    pub headroom: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig { bits: 4, headroom: 2.0 }
    }
}

impl AdcConfig {
    /// Quantizes `samples` for a gain calibrated on `calibration_power`.
    pub fn quantize(&self, samples: &[Complex64], calibration_power: f64) -> Vec<Complex64> {
        let full_scale = self.headroom * libm::sqrt(calibration_power);
        let levels = 1i64 << self.bits.clamp(1, 30);
        let step = 2.0 * full_scale / levels as f64;
        if !(step > 0.0) {
            return alloc::vec![Complex64::new(0.0, 0.0); samples.len()];
        }
        let (lo, hi) = (-(levels / 2) as f64, (levels / 2 - 1) as f64);
        let q = |x: f64| libm::round(x / step).clamp(lo, hi) * step;
        samples.iter().map(|z| Complex64::new(q(z.re), q(z.im))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreambleDetection {
    pub detected: bool,
    /// Sample index of the first preamble symbol.
    pub alignment: usize,
    pub preamble_errors: usize,
    pub mean_power: f64,
}

/// What the receiver made of one packet.
///
/// Lost packets have empty `rx_bits` and `error_positions`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReceptionOutcome {
    pub preamble_detected: bool,
    pub rx_bits: Vec<u8>,
    /// Indices into the payload bits that were decoded wrongly.
    pub error_positions: Vec<usize>,
    pub payload_bits: usize,
    /// Wrong channel symbols (coded bits or chips) before decoding.
    pub channel_errors: usize,
    pub channel_symbols: usize,
}

impl ReceptionOutcome {
    pub fn lost(payload_bits: usize) -> Self {
        ReceptionOutcome { payload_bits, ..Default::default() }
    }

    pub fn is_ok(&self) -> bool {
        self.preamble_detected && self.error_positions.is_empty()
    }
}

struct Demodulator {
    tones: [Vec<Complex64>; 2],
    sps: usize,
}

impl Demodulator {
    fn new(phy: &PhyConfig) -> Self {
        Demodulator { tones: tone_table(phy), sps: phy.samples_per_symbol }
    }

    /// Hard decision and decision margin `|c1|^2 - |c0|^2` for the symbol
    /// starting at `start`; samples past the end count as zero.
    fn decide(&self, samples: &[Complex64], start: usize) -> (u8, f64) {
        let end = (start + self.sps).min(samples.len());
        let window = samples.get(start..end).unwrap_or(&[]);
        let mut c0 = Complex64::new(0.0, 0.0);
        let mut c1 = Complex64::new(0.0, 0.0);
        for ((r, t0), t1) in window.iter().zip(&self.tones[0]).zip(&self.tones[1]) {
            c0 += r * t0.conj();
            c1 += r * t1.conj();
        }
        let d = c1.norm_sqr() - c0.norm_sqr();
        (u8::from(d > 0.0), d)
    }

    fn symbols(&self, samples: &[Complex64], start: usize, count: usize) -> Vec<u8> {
        (0..count).map(|k| self.decide(samples, start + k * self.sps).0).collect()
    }
}

/// Symbol-by-symbol energy detection from the first sample.
pub fn demodulate(stream: &SampleStream, phy: &PhyConfig) -> Result<Vec<u8>> {
    phy.validate()?;
    let n = stream.len() / phy.samples_per_symbol;
    if n == 0 {
        return Err(Error::framing("stream shorter than one symbol"));
    }
    Ok(Demodulator::new(phy).symbols(&stream.samples, 0, n))
}

/// Searches the first symbol period for the alignment with the fewest preamble
/// errors, then applies the power and error gates.
pub fn detect_preamble(stream: &SampleStream, phy: &PhyConfig, cfg: &ReceiverConfig) -> PreambleDetection {
    detect_with(&Demodulator::new(phy), stream, phy, cfg)
}

fn detect_with(
    demod: &Demodulator,
    stream: &SampleStream,
    phy: &PhyConfig,
    cfg: &ReceiverConfig,
) -> PreambleDetection {
    let sps = phy.samples_per_symbol;
    let pre = phy::preamble(phy);
    let window = pre.len() * sps;
    // Fewest preamble errors, then the widest decision margin.
    let mut best: Option<(usize, usize, f64)> = None;
    for offset in 0..sps {
        if offset + window > stream.len() {
            break;
        }
        let mut errors = 0;
        let mut margin = 0.0;
        for (k, &want) in pre.iter().enumerate() {
            let (bit, d) = demod.decide(&stream.samples, offset + k * sps);
            errors += usize::from(bit != want);
            margin += if want == 1 { d } else { -d };
        }
        let better = match best {
            None => true,
            Some((_, e, m)) => errors < e || (errors == e && margin > m),
        };
        if better {
            best = Some((offset, errors, margin));
        }
    }
    let best = best.map(|(o, e, _)| (o, e));
    let Some((alignment, preamble_errors)) = best else {
        return PreambleDetection { detected: false, alignment: 0, preamble_errors: pre.len(), mean_power: 0.0 };
    };
    let seg = &stream.samples[alignment..alignment + window];
    let mean_power = if window == 0 {
        0.0
    } else {
        seg.iter().map(|z| z.norm_sqr()).sum::<f64>() / window as f64
    };
    let detected = mean_power >= cfg.power_fraction * cfg.reference_power
        && preamble_errors <= cfg.max_preamble_errors;
    PreambleDetection { detected, alignment, preamble_errors, mean_power }
}

/// Detects, demodulates and decodes one frame carrying `packet`, and compares
/// the result with the transmitted payload.
pub fn receive(
    stream: &SampleStream,
    phy: &PhyConfig,
    cfg: &ReceiverConfig,
    packet: &Packet,
) -> Result<ReceptionOutcome> {
    let tx_frame = phy::encode(packet, phy)?;
    receive_frame(stream, phy, cfg, packet, &tx_frame)
}

pub(crate) fn receive_frame(
    stream: &SampleStream,
    phy: &PhyConfig,
    cfg: &ReceiverConfig,
    packet: &Packet,
    tx_frame: &[u8],
) -> Result<ReceptionOutcome> {
    let demod = Demodulator::new(phy);
    let tx_bits = packet.bits();
    let det = detect_with(&demod, stream, phy, cfg);
    if !det.detected {
        return Ok(ReceptionOutcome::lost(tx_bits.len()));
    }
    let frame = match cfg.adc {
        Some(adc) => {
            let quantized = adc.quantize(&stream.samples[det.alignment..], det.mean_power);
            demod.symbols(&quantized, 0, tx_frame.len())
        }
        None => demod.symbols(&stream.samples, det.alignment, tx_frame.len()),
    };
    let coded = &frame[phy.preamble_bits..];
    let tx_coded = &tx_frame[phy.preamble_bits..];
    let channel_errors = coded.iter().zip(tx_coded).filter(|(a, b)| a != b).count();
    let rx_bits = phy::decode_coded(coded, phy);
    if rx_bits.len() != tx_bits.len() {
        return Err(Error::framing(format!(
            "decoded {} bits, expected {}",
            rx_bits.len(),
            tx_bits.len()
        )));
    }
    let error_positions =
        rx_bits.iter().zip(&tx_bits).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i).collect();
    Ok(ReceptionOutcome {
        preamble_detected: true,
        rx_bits,
        error_positions,
        payload_bits: tx_bits.len(),
        channel_errors,
        channel_symbols: tx_coded.len(),
    })
}

/// Bit error rate of non-coherent BFSK with two equal-power same-data
/// transmitters and uniformly random beating phase: `exp(-x) I0(x) / 2`.
pub fn analytical_ber_ct2(ebn0_linear: f64) -> Result<f64> {
    if !(ebn0_linear >= 0.0) {
        return Err(Error::invalid(format!("Eb/N0 must be non-negative, got {ebn0_linear}")));
    }
    Ok(0.5 * bessel_i0_scaled(ebn0_linear))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, superpose, ChannelScenario};
    use crate::phy::{encode, modulate, PhyMode};
    use alloc::vec;

    fn packet() -> Packet {
        Packet::new((0..20u8).map(|i| i.wrapping_mul(73) ^ 0x5a).collect()).unwrap()
    }

    #[test]
    fn noiseless_loopback_every_mode() {
        for m in PhyMode::ALL {
            let phy = PhyConfig::new(m);
            let p = packet();
            let s = modulate(&encode(&p, &phy).unwrap(), &phy).unwrap();
            let out = receive(&s, &phy, &ReceiverConfig::default(), &p).unwrap();
            assert!(out.preamble_detected, "{m}");
            assert!(out.error_positions.is_empty(), "{m}");
            assert_eq!(out.channel_errors, 0);
            assert_eq!(phy::bits_to_bytes(&out.rx_bits), p.payload());
        }
    }

    #[test]
    fn alternating_and_constant_bits_loop_back() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        for bits in [vec![0u8; 32], (0..32).map(|i| (i % 2) as u8).collect()] {
            let s = modulate(&bits, &phy).unwrap();
            assert_eq!(demodulate(&s, &phy).unwrap(), bits);
        }
    }

    #[test]
    fn short_stream_is_framing_error() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let s = SampleStream::new(vec![Complex64::new(1.0, 0.0); 7], phy.sample_rate());
        assert!(matches!(demodulate(&s, &phy), Err(Error::Framing(_))));
    }

    #[test]
    fn noise_only_not_detected() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let silent = SampleStream::new(vec![Complex64::new(0.0, 0.0); 800], phy.sample_rate());
        let noisy = add_awgn(&silent, 20.0, 1.0, 3);
        assert!(!detect_preamble(&noisy, &phy, &ReceiverConfig::default()).detected);
    }

    #[test]
    fn finds_delayed_alignment() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let p = packet();
        let s = modulate(&encode(&p, &phy).unwrap(), &phy).unwrap();
        let mut shifted = vec![Complex64::new(0.0, 0.0); 3];
        shifted.extend(&s.samples);
        let s = SampleStream::new(shifted, s.sample_rate);
        let det = detect_preamble(&s, &phy, &ReceiverConfig::default());
        assert!(det.detected);
        assert_eq!(det.alignment, 3);
        assert!(receive(&s, &phy, &ReceiverConfig::default(), &p).unwrap().is_ok());
    }

    #[test]
    fn wide_null_over_preamble_loses_packet() {
        // Beating period of 10 ms; the null at 5 ms is far wider than the
        // 8 us preamble.
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let p = packet();
        let s = modulate(&encode(&p, &phy).unwrap(), &phy).unwrap();
        let rfo = 100.0;
        let mut sc = ChannelScenario::ct2(rfo, 0.0, 30.0);
        // Put the valley at the first sample.
        sc.transmitters[1].initial_phase = crate::math::PI;
        let rx = superpose(&[s.clone(), s], &sc).unwrap();
        let out = receive(&rx, &phy, &ReceiverConfig::default(), &p).unwrap();
        assert!(!out.preamble_detected);
        assert!(out.rx_bits.is_empty());
    }

    #[test]
    fn adc_dead_zone_and_clipping() {
        let adc = AdcConfig { bits: 3, headroom: 1.0 };
        let x = [Complex64::new(0.1, -0.1), Complex64::new(5.0, -5.0), Complex64::new(0.5, 0.26)];
        let q = adc.quantize(&x, 1.0);
        assert_eq!(q[0], Complex64::new(0.0, 0.0));
        assert_eq!(q[1], Complex64::new(0.75, -1.0));
        assert_eq!(q[2], Complex64::new(0.5, 0.25));
    }

    #[test]
    fn adc_keeps_clean_link_error_free() {
        let phy = PhyConfig::new(PhyMode::Ble500K);
        let p = packet();
        let s = modulate(&encode(&p, &phy).unwrap(), &phy).unwrap();
        let cfg = ReceiverConfig { adc: Some(AdcConfig::default()), ..Default::default() };
        assert!(receive(&s, &phy, &cfg, &p).unwrap().is_ok());
    }

    #[test]
    fn analytical_values() {
        assert_eq!(analytical_ber_ct2(0.0).unwrap(), 0.5);
        assert!(analytical_ber_ct2(-1.0).is_err());
        let mut prev = 0.5;
        for x in [0.5, 1.0, 2.0, 10.0, 100.0, 1000.0] {
            let b = analytical_ber_ct2(x).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let x = 1e4;
        let asym = 1.0 / (2.0 * libm::sqrt(2.0 * crate::math::PI * x));
        assert!((analytical_ber_ct2(x).unwrap() / asym - 1.0).abs() < 1e-4);
    }
}
