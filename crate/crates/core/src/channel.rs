//! Superposition of concurrent transmitters, AWGN and the temperature model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{db_to_linear, linear_to_db, PI};
use crate::phy::PhyMode;
use crate::rng::stream_rng;
use crate::{Error, Result};

pub const DEFAULT_CARRIER_HZ: f64 = 2.44e9;
pub const MAX_TRANSMITTERS: usize = 12;

/// Complex baseband samples at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SampleStream {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        SampleStream { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }
}

/// Frequency drift of a crystal with temperature, in ppm of the carrier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DriftModel {
    /// `slope_ppm_per_c * dT`.
    Linear { slope_ppm_per_c: f64 },
    /// `sum_k coeffs_ppm[k] * dT^(k+1)`.
    Polynomial { coeffs_ppm: Vec<f64> },
}

impl DriftModel {
    pub fn ppm(&self, dt: f64) -> f64 {
        match self {
            DriftModel::Linear { slope_ppm_per_c } => slope_ppm_per_c * dt,
            DriftModel::Polynomial { coeffs_ppm } => {
                coeffs_ppm.iter().rev().fold(0.0, |acc, c| (acc + c) * dt)
            }
        }
    }

    /// d(ppm)/dT at `dt`.
    pub fn slope(&self, dt: f64) -> f64 {
        match self {
            DriftModel::Linear { slope_ppm_per_c } => *slope_ppm_per_c,
            DriftModel::Polynomial { coeffs_ppm } => coeffs_ppm
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * dt + (k + 1) as f64 * c),
        }
    }
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel::Linear { slope_ppm_per_c: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterProfile {
    /// Carrier offset at `temp_ref`, Hz.
    pub cfo: f64,
    pub amplitude: f64,
    /// Seconds; realized as a whole number of samples.
    pub timing_offset: f64,
    pub temperature: f64,
    pub temp_ref: f64,
    pub drift: DriftModel,
    /// Accept drift models whose frequency rises with temperature.
    pub allow_increasing_drift: bool,
    pub carrier_hz: f64,
    /// Carrier phase at the first sample, radians.
    pub initial_phase: f64,
}

impl Default for TransmitterProfile {
    fn default() -> Self {
        TransmitterProfile {
            cfo: 0.0,
            amplitude: 1.0,
            timing_offset: 0.0,
            temperature: 25.0,
            temp_ref: 25.0,
            drift: DriftModel::default(),
            allow_increasing_drift: false,
            carrier_hz: DEFAULT_CARRIER_HZ,
            initial_phase: 0.0,
        }
    }
}

impl TransmitterProfile {
    pub fn new(cfo: f64, amplitude: f64) -> Self {
        TransmitterProfile { cfo, amplitude, ..Default::default() }
    }

    pub fn with_linear_drift(mut self, slope_ppm_per_c: f64) -> Self {
        self.drift = DriftModel::Linear { slope_ppm_per_c };
        self
    }

    pub fn at_temperature(mut self, celsius: f64) -> Self {
        self.temperature = celsius;
        self
    }

    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// Carrier offset after crystal drift at the profile's temperature.
pub fn cfo_at_temperature(profile: &TransmitterProfile) -> Result<f64> {
    let dt = profile.temperature - profile.temp_ref;
    if !profile.allow_increasing_drift && profile.drift.slope(dt) > 0.0 {
        return Err(Error::config(
            "drift model increases frequency with temperature; set allow_increasing_drift to accept it",
        ));
    }
    Ok(profile.cfo + profile.drift.ppm(dt) * 1e-6 * profile.carrier_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub transmitters: Vec<TransmitterProfile>,
    /// Relative to the strongest transmitter, at the simulation bandwidth.
    pub snr_db: f64,
    pub noise_enabled: bool,
    /// When set, carrier offsets are checked against this mode's limit.
    pub compliance: Option<PhyMode>,
}

impl ChannelScenario {
    pub fn new(transmitters: Vec<TransmitterProfile>, snr_db: f64) -> Self {
        ChannelScenario { transmitters, snr_db, noise_enabled: true, compliance: None }
    }

    pub fn single(snr_db: f64) -> Self {
        Self::new(vec![TransmitterProfile::new(0.0, 1.0)], snr_db)
    }

    /// Two transmitters with carriers at `-rfo/2` and `+rfo/2`, the second
    /// `delta_p_db` weaker.
    pub fn ct2(rfo: f64, delta_p_db: f64, snr_db: f64) -> Self {
        let a2 = libm::pow(10.0, -delta_p_db / 20.0);
        Self::new(
            vec![TransmitterProfile::new(-rfo / 2.0, 1.0), TransmitterProfile::new(rfo / 2.0, a2)],
            snr_db,
        )
    }

    /// Transmitters at the given carrier offsets and powers (dB relative to the
    /// first).
    pub fn ctn(cfos: &[f64], rel_power_db: &[f64], snr_db: f64) -> Result<Self> {
        if cfos.len() != rel_power_db.len() {
            return Err(Error::invalid("cfos and powers differ in length"));
        }
        let tx = cfos
            .iter()
            .zip(rel_power_db)
            .map(|(&c, &p)| TransmitterProfile::new(c, libm::pow(10.0, p / 20.0)))
            .collect();
        Ok(Self::new(tx, snr_db))
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.transmitters.len();
        if n == 0 || n > MAX_TRANSMITTERS {
            return Err(Error::config(format!(
                "scenario needs 1..={MAX_TRANSMITTERS} transmitters, got {n}"
            )));
        }
        for (i, t) in self.transmitters.iter().enumerate() {
            if !(t.amplitude > 0.0 && t.amplitude.is_finite()) {
                return Err(Error::config(format!("transmitter {i}: amplitude must be positive")));
            }
            if let Some(mode) = self.compliance {
                let cfo = cfo_at_temperature(t)?;
                if libm::fabs(cfo) > mode.cfo_limit_hz() {
                    return Err(Error::config(format!(
                        "transmitter {i}: cfo {cfo} Hz exceeds the {mode} limit"
                    )));
                }
            }
        }
        if self.noise_enabled && self.snr_db.is_nan() {
            return Err(Error::config("snr_db is NaN"));
        }
        Ok(())
    }

    pub fn strongest_power(&self) -> f64 {
        self.transmitters.iter().map(TransmitterProfile::power).fold(0.0, f64::max)
    }

    /// Noise power implied by `snr_db`, zero when noise is disabled.
    pub fn noise_power(&self) -> f64 {
        if self.noise_enabled {
            self.strongest_power() / db_to_linear(self.snr_db)
        } else {
            0.0
        }
    }

    /// `|cfo_i - cfo_j|` at the transmitters' current temperatures.
    pub fn rfo(&self, i: usize, j: usize) -> Result<f64> {
        let a = cfo_at_temperature(self.tx(i)?)?;
        let b = cfo_at_temperature(self.tx(j)?)?;
        Ok(libm::fabs(a - b))
    }

    /// `10 log10(P_i / P_j)`.
    pub fn delta_p_db(&self, i: usize, j: usize) -> Result<f64> {
        Ok(linear_to_db(self.tx(i)?.power() / self.tx(j)?.power()))
    }

    pub fn beating_period(&self, i: usize, j: usize) -> Result<f64> {
        Ok(1.0 / self.rfo(i, j)?)
    }

    fn tx(&self, i: usize) -> Result<&TransmitterProfile> {
        self.transmitters
            .get(i)
            .ok_or_else(|| Error::invalid(format!("no transmitter {i}")))
    }
}

/// Recompute the carrier phasor exactly every this many samples.
const PHASOR_REFRESH: usize = 512;

/// Sums the transmitters' streams with their amplitudes, carrier offsets,
/// initial phases and whole-sample delays. Delays are taken relative to the
/// earliest transmitter.
pub fn superpose(streams: &[SampleStream], scenario: &ChannelScenario) -> Result<SampleStream> {
    let refs: Vec<&SampleStream> = streams.iter().collect();
    superpose_refs(&refs, scenario)
}

/// [`superpose`] over borrowed streams, so one stream can feed several
/// transmitters.
pub fn superpose_refs(streams: &[&SampleStream], scenario: &ChannelScenario) -> Result<SampleStream> {
    scenario.validate()?;
    if streams.len() != scenario.transmitters.len() {
        return Err(Error::config(format!(
            "{} streams for {} transmitters",
            streams.len(),
            scenario.transmitters.len()
        )));
    }
    let fs = streams[0].sample_rate;
    if streams.iter().any(|s| s.sample_rate != fs) {
        return Err(Error::config("streams have different sample rates"));
    }
    let shifts: Vec<i64> = scenario
        .transmitters
        .iter()
        .map(|t| libm::round(t.timing_offset * fs) as i64)
        .collect();
    let earliest = shifts.iter().copied().min().unwrap_or(0);
    let len = streams
        .iter()
        .zip(&shifts)
        .map(|(s, &d)| s.len() + (d - earliest) as usize)
        .max()
        .unwrap_or(0);
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for ((stream, profile), &shift) in streams.iter().zip(&scenario.transmitters).zip(&shifts) {
        let delay = (shift - earliest) as usize;
        let w = 2.0 * PI * cfo_at_temperature(profile)? / fs;
        let step = Complex64::from_polar(1.0, w);
        for (block, chunk) in stream.samples.chunks(PHASOR_REFRESH).enumerate() {
            let n0 = delay + block * PHASOR_REFRESH;
            let mut rot = Complex64::from_polar(
                profile.amplitude,
                libm::remainder(w * n0 as f64, 2.0 * PI) + profile.initial_phase,
            );
            for (k, s) in chunk.iter().enumerate() {
                out[n0 + k] += s * rot;
                rot *= step;
            }
        }
    }
    Ok(SampleStream::new(out, fs))
}

/// Envelope gain of two same-data carriers as a function of time:
/// `1 - r + 2r|cos(pi t rfo)|` with `r = A2/A1`.
///
/// For `r = 1` this is exact. For `r < 1` it agrees with the exact magnitude
/// `sqrt(1 + r^2 + 2r cos(2 pi t rfo))` at the peaks and valleys only.
pub fn ct2_envelope(t: f64, rfo: f64, amp_ratio: f64) -> Result<f64> {
    if !(amp_ratio > 0.0 && amp_ratio <= 1.0) {
        return Err(Error::invalid(format!("amplitude ratio {amp_ratio} outside (0, 1]")));
    }
    if !(rfo > 0.0) {
        return Err(Error::invalid("rfo must be positive"));
    }
    Ok(1.0 - amp_ratio + 2.0 * amp_ratio * libm::fabs(libm::cos(PI * t * rfo)))
}

/// Adds circularly-symmetric complex Gaussian noise of total power
/// `strongest_power / 10^(snr_db/10)`.
pub fn add_awgn(stream: &SampleStream, snr_db: f64, strongest_power: f64, seed: u64) -> SampleStream {
    let mut out = stream.clone();
    add_awgn_in_place(&mut out, snr_db, strongest_power, seed);
    out
}

pub fn add_awgn_in_place(stream: &mut SampleStream, snr_db: f64, strongest_power: f64, seed: u64) {
    if snr_db == f64::INFINITY {
        return;
    }
    let sigma = libm::sqrt(strongest_power / db_to_linear(snr_db) / 2.0);
    let mut rng = stream_rng(seed, 0);
    add_noise_with(&mut stream.samples, sigma, &mut rng);
}

pub(crate) fn add_noise_with<R: Rng + ?Sized>(samples: &mut [Complex64], sigma: f64, rng: &mut R) {
    for z in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(sigma * re, sigma * im);
    }
}

/// Applies the scenario's noise, or returns the stream untouched when noise is
/// disabled.
pub fn apply_noise(stream: &SampleStream, scenario: &ChannelScenario, seed: u64) -> SampleStream {
    if scenario.noise_enabled {
        add_awgn(stream, scenario.snr_db, scenario.strongest_power(), seed)
    } else {
        stream.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{modulate, PhyConfig};

    fn tone(len: usize) -> SampleStream {
        SampleStream::new(vec![Complex64::new(1.0, 0.0); len], 8e6)
    }

    #[test]
    fn single_transmitter_scales() {
        let phy = PhyConfig::new(PhyMode::Ble1M);
        let s = modulate(&[0, 1, 1, 0], &phy).unwrap();
        let mut sc = ChannelScenario::single(20.0);
        sc.transmitters[0].amplitude = 0.7;
        let out = superpose(&[s.clone()], &sc).unwrap();
        for (a, b) in out.samples.iter().zip(&s.samples) {
            assert!((a - b * 0.7).norm() < 1e-12);
        }
    }

    #[test]
    fn equal_pair_has_null_at_half_period() {
        let rfo = 500.0;
        let fs = 8e6;
        let n_half = (fs / rfo / 2.0) as usize;
        let sc = ChannelScenario::ct2(rfo, 0.0, 30.0);
        let out = superpose(&[tone(n_half + 10), tone(n_half + 10)], &sc).unwrap();
        assert!(out.samples[n_half].norm() < 1e-9);
        assert!((out.samples[0].norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_ratio_for_half_amplitude() {
        let rfo = 2000.0;
        let fs = 8e6;
        let mut sc = ChannelScenario::ct2(rfo, 0.0, 30.0);
        sc.transmitters[1].amplitude = 0.5;
        let n = (fs / rfo) as usize;
        let env = superpose(&[tone(n), tone(n)], &sc).unwrap().envelope();
        let max = env.iter().copied().fold(0.0, f64::max);
        let min = env.iter().copied().fold(f64::MAX, f64::min);
        assert!((min / max - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_formula_examples() {
        assert_eq!(ct2_envelope(0.0, 123.0, 1.0).unwrap(), 2.0);
        assert!(ct2_envelope(1.0 / 500.0 / 2.0, 500.0, 1.0).unwrap().abs() < 1e-12);
        assert!((ct2_envelope(1.0 / 500.0 / 2.0, 500.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!(ct2_envelope(0.0, 1.0, 0.0).is_err());
        assert!(ct2_envelope(0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn timing_offsets_pad_and_shift() {
        let mut sc = ChannelScenario::ct2(0.0, 0.0, 30.0);
        sc.transmitters[1].timing_offset = 3.0 / 8e6;
        let out = superpose(&[tone(10), tone(10)], &sc).unwrap();
        assert_eq!(out.len(), 13);
        assert!((out.samples[0].re - 1.0).abs() < 1e-12);
        assert!((out.samples[5].re - 2.0).abs() < 1e-12);
        assert!((out.samples[12].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_rates_rejected() {
        let sc = ChannelScenario::ct2(100.0, 0.0, 30.0);
        let other = SampleStream::new(vec![Complex64::new(1.0, 0.0); 4], 16e6);
        assert!(matches!(superpose(&[tone(4), other], &sc), Err(Error::Configuration(_))));
        assert!(superpose(&[tone(4)], &sc).is_err());
    }

    #[test]
    fn derived_quantities() {
        let sc = ChannelScenario::ct2(10e3, 3.0, 20.0);
        assert!((sc.rfo(0, 1).unwrap() - 10e3).abs() < 1e-9);
        assert!((sc.delta_p_db(0, 1).unwrap() - 3.0).abs() < 1e-9);
        assert!((sc.noise_power() - 0.01).abs() < 1e-12);
        assert!((sc.beating_period(0, 1).unwrap() - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn compliance_limit() {
        let mut sc = ChannelScenario::ct2(250e3, 0.0, 20.0);
        sc.compliance = Some(PhyMode::Ieee802154);
        assert!(sc.validate().is_err());
        sc.compliance = Some(PhyMode::Ble1M);
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn awgn_is_seeded_and_scaled() {
        let s = SampleStream::new(vec![Complex64::new(0.0, 0.0); 200_000], 8e6);
        let a = add_awgn(&s, 10.0, 1.0, 7);
        assert_eq!(a, add_awgn(&s, 10.0, 1.0, 7));
        assert_ne!(a, add_awgn(&s, 10.0, 1.0, 8));
        assert!((a.mean_power() - 0.1).abs() < 0.1 * 0.02);
        let mut sc = ChannelScenario::single(10.0);
        sc.noise_enabled = false;
        assert_eq!(apply_noise(&s, &sc, 1), s);
    }

    #[test]
    fn temperature_shift() {
        let p = TransmitterProfile::new(1000.0, 1.0).with_linear_drift(-0.2);
        assert_eq!(cfo_at_temperature(&p).unwrap(), 1000.0);
        let hot = p.clone().at_temperature(p.temp_ref + 45.0);
        let shift = cfo_at_temperature(&hot).unwrap() - 1000.0;
        assert!((shift + 21_960.0).abs() < 1e-6);
        let rising = TransmitterProfile::new(0.0, 1.0).with_linear_drift(0.1).at_temperature(40.0);
        assert!(cfo_at_temperature(&rising).is_err());
        let allowed = TransmitterProfile { allow_increasing_drift: true, ..rising };
        assert!(cfo_at_temperature(&allowed).unwrap() > 0.0);
    }

    #[test]
    fn polynomial_drift() {
        let d = DriftModel::Polynomial { coeffs_ppm: vec![-0.2, -0.001] };
        assert!((d.ppm(10.0) - (-2.0 - 0.1)).abs() < 1e-12);
        assert!((d.slope(10.0) - (-0.2 - 0.02)).abs() < 1e-12);
    }
}
