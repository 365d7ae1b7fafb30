use alloc::vec::Vec;

use num_complex::Complex64;

use super::PhyConfig;
use crate::channel::SampleStream;
use crate::math::PI;
use crate::{Error, Result};

/// One symbol of each tone, starting at phase zero: `[tone for 0, tone for 1]`.
///
/// Bit 0 sits at `-deviation`, bit 1 at `+deviation`.
pub fn tone_table(phy: &PhyConfig) -> [Vec<Complex64>; 2] {
    let fs = phy.sample_rate();
    let tone = |f: f64| {
        (0..phy.samples_per_symbol)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / fs))
            .collect::<Vec<_>>()
    };
    [tone(-phy.deviation_hz), tone(phy.deviation_hz)]
}

/// Continuous-phase BFSK with rectangular frequency pulses and unit amplitude.
pub fn modulate(bits: &[u8], phy: &PhyConfig) -> Result<SampleStream> {
    phy.validate()?;
    if bits.is_empty() {
        return Err(Error::invalid("cannot modulate an empty bit sequence"));
    }
    let sps = phy.samples_per_symbol;
    let tones = tone_table(phy);
    // Phase advance over one whole symbol, per tone.
    let advance = 2.0 * PI * phy.deviation_hz / phy.symbol_rate;
    let mut samples = Vec::with_capacity(bits.len() * sps);
    let mut phase = 0.0f64;
    for &b in bits {
        let start = Complex64::from_polar(1.0, phase);
        let bit = usize::from(b & 1);
        samples.extend(tones[bit].iter().map(|t| start * t));
        phase += if bit == 1 { advance } else { -advance };
        phase = libm::remainder(phase, 2.0 * PI);
    }
    Ok(SampleStream::new(samples, phy.sample_rate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::PhyMode;

    #[test]
    fn length_and_unit_amplitude() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let s = modulate(&[0, 1, 1, 0, 1], &phy).unwrap();
        assert_eq!(s.len(), 5 * 8);
        assert!(s.samples.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_eq!(s.sample_rate, 8e6);
    }

    #[test]
    fn phase_is_continuous() {
        let phy = PhyConfig::new(PhyMode::Ble2M);
        let bits = [1, 1, 0, 1, 0, 0, 0, 1, 1, 0];
        let s = modulate(&bits, &phy).unwrap();
        let step = 2.0 * PI * phy.deviation_hz / phy.sample_rate();
        for (n, w) in s.samples.windows(2).enumerate() {
            let f = if bits[n / 8] == 1 { step } else { -step };
            let d = (w[1] * w[0].conj()).arg();
            assert!((d - f).abs() < 1e-9, "sample {n}");
        }
    }

    #[test]
    fn all_zero_bits_give_constant_tone() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let s = modulate(&[0; 16], &phy).unwrap();
        let fs = phy.sample_rate();
        for (n, z) in s.samples.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, -2.0 * PI * phy.deviation_hz * n as f64 / fs);
            assert!((z - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn empty_bits_rejected() {
        assert!(modulate(&[], &PhyConfig::new(PhyMode::Ble1M)).is_err());
    }
}
