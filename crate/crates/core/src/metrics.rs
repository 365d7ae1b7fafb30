//! Reception statistics, bit-error histograms and beating-frequency recovery.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{median, PI};
use crate::receiver::ReceptionOutcome;
use crate::{Error, Result};

/// Packet and bit counters. Merging is associative and commutative, so
/// batches can be split across workers in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchTally {
    pub n_packets: u64,
    pub ok: u64,
    pub errored: u64,
    pub lost: u64,
    pub bit_errors: u64,
    pub bits_received: u64,
    pub channel_errors: u64,
    pub channel_symbols: u64,
}

impl BatchTally {
    pub fn add(&mut self, o: &ReceptionOutcome) {
        self.n_packets += 1;
        if !o.preamble_detected {
            self.lost += 1;
            return;
        }
        if o.error_positions.is_empty() {
            self.ok += 1;
        } else {
            self.errored += 1;
        }
        self.bit_errors += o.error_positions.len() as u64;
        self.bits_received += o.payload_bits as u64;
        self.channel_errors += o.channel_errors as u64;
        self.channel_symbols += o.channel_symbols as u64;
    }

    pub fn merge(&mut self, other: &BatchTally) {
        self.n_packets += other.n_packets;
        self.ok += other.ok;
        self.errored += other.errored;
        self.lost += other.lost;
        self.bit_errors += other.bit_errors;
        self.bits_received += other.bits_received;
        self.channel_errors += other.channel_errors;
        self.channel_symbols += other.channel_symbols;
    }

    pub fn metrics(&self) -> Result<BatchMetrics> {
        if self.n_packets == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let n = self.n_packets as f64;
        let per = self.errored as f64 / n;
        let plr = self.lost as f64 / n;
        Ok(BatchMetrics {
            n_packets: self.n_packets,
            prr: 1.0 - (per + plr),
            per,
            plr,
            ber: (self.bits_received > 0).then(|| self.bit_errors as f64 / self.bits_received as f64),
        })
    }

    /// Error rate of channel symbols before decoding, over received packets.
    pub fn channel_error_rate(&self) -> Option<f64> {
        (self.channel_symbols > 0).then(|| self.channel_errors as f64 / self.channel_symbols as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMetrics {
    pub n_packets: u64,
    pub prr: f64,
    /// Received with bit errors, as a fraction of all packets.
    pub per: f64,
    pub plr: f64,
    /// Over the payload bits of received packets; `None` if none arrived.
    pub ber: Option<f64>,
}

pub fn classify(traces: &[ReceptionOutcome]) -> Result<BatchMetrics> {
    let mut t = BatchTally::default();
    traces.iter().for_each(|o| t.add(o));
    t.metrics()
}

/// Bit-error counts per decoded payload bit position, over received packets.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistogram {
    pub counts: Vec<u64>,
    pub n_received: u64,
    /// Received packets with at least one error.
    pub n_errored: u64,
    /// Positions per second, for converting indices to time.
    pub bit_rate: f64,
}

impl ErrorHistogram {
    pub fn new(len: usize, bit_rate: f64) -> Self {
        ErrorHistogram { counts: vec![0; len], n_received: 0, n_errored: 0, bit_rate }
    }

    pub fn add(&mut self, o: &ReceptionOutcome) -> Result<()> {
        if !o.preamble_detected {
            return Ok(());
        }
        if o.payload_bits != self.counts.len() {
            return Err(Error::invalid(format!(
                "trace has {} payload bits, histogram {}",
                o.payload_bits,
                self.counts.len()
            )));
        }
        self.n_received += 1;
        if !o.error_positions.is_empty() {
            self.n_errored += 1;
        }
        for &p in &o.error_positions {
            self.counts[p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorHistogram) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::invalid("histograms differ in length"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.n_received += other.n_received;
        self.n_errored += other.n_errored;
        Ok(())
    }

    pub fn accumulate(traces: &[ReceptionOutcome], bit_rate: f64) -> Result<Self> {
        let len = traces
            .iter()
            .find(|o| o.preamble_detected)
            .map_or(0, |o| o.payload_bits);
        let mut h = ErrorHistogram::new(len, bit_rate);
        for o in traces {
            h.add(o)?;
        }
        Ok(h)
    }

    pub fn resolution(&self) -> f64 {
        self.bit_rate / self.counts.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfoConfig {
    /// Peaks must exceed this multiple of the median spectral magnitude.
    pub prominence: f64,
    pub min_errored_packets: u64,
    pub min_len: usize,
    /// Weaker peaks this many bins or closer to a stronger one are dropped.
    pub merge_bins: usize,
    /// Drop peaks sitting on the 2nd..=this harmonic of a stronger peak.
    pub max_harmonic: usize,
}

impl Default for RfoConfig {
    fn default() -> Self {
        RfoConfig { prominence: 4.0, min_errored_packets: 100, min_len: 64, merge_bins: 2, max_harmonic: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfoPeak {
    pub freq_hz: f64,
    /// Relative to the strongest peak.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfoEstimate {
    /// Strongest first.
    pub peaks: Vec<RfoPeak>,
    pub resolution_hz: f64,
}

impl RfoEstimate {
    pub fn dominant(&self) -> Option<f64> {
        self.peaks.first().map(|p| p.freq_hz)
    }
}

/// Magnitude spectrum (bins `0..=len/2`) of the histogram after removing its
/// Hann-weighted mean and applying a Hann window.
pub fn histogram_spectrum(counts: &[u64]) -> Vec<f64> {
    let n = counts.len();
    if n < 2 {
        return vec![0.0; n / 2 + 1];
    }
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / (n - 1) as f64))
        .collect();
    let wsum: f64 = window.iter().sum();
    let mean = counts.iter().zip(&window).map(|(&c, w)| c as f64 * w).sum::<f64>() / wsum;
    let x: Vec<f64> = counts.iter().zip(&window).map(|(&c, w)| (c as f64 - mean) * w).collect();
    dft_magnitude(&x)
}

// Direct DFT; histograms are a few thousand bins at most.
fn dft_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let cos: Vec<f64> = (0..n).map(|m| libm::cos(2.0 * PI * m as f64 / n as f64)).collect();
    let sin: Vec<f64> = (0..n).map(|m| libm::sin(2.0 * PI * m as f64 / n as f64)).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            let mut idx = 0usize;
            for &v in x {
                re += v * cos[idx];
                im -= v * sin[idx];
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            libm::sqrt(re * re + im * im)
        })
        .collect()
}

/// A submultiple peak at least this strong, relative to the multiple it
/// explains, is taken as the fundamental.
const SUBHARMONIC_SHARE: f64 = 0.5;

pub fn estimate_rfo(hist: &ErrorHistogram, cfg: &RfoConfig) -> Result<RfoEstimate> {
    let n = hist.counts.len();
    if n < cfg.min_len.max(4) {
        return Err(Error::insufficient(format!("histogram has {n} bins, need {}", cfg.min_len)));
    }
    if hist.n_errored < cfg.min_errored_packets {
        return Err(Error::insufficient(format!(
            "{} errored packets, need {}",
            hist.n_errored, cfg.min_errored_packets
        )));
    }
    let resolution_hz = hist.resolution();
    let mag = histogram_spectrum(&hist.counts);
    let last = mag.len() - 1;
    let floor = cfg.prominence * median(&mag[1..]);
    let mut candidates: Vec<(usize, f64)> = (1..=last)
        .filter(|&k| {
            let m = mag[k];
            m > floor && m > 0.0 && m >= mag[k - 1] && (k == last || m > mag[k + 1])
        })
        .map(|k| (k, refine(&mag, k)))
        .collect();
    candidates.sort_by(|a, b| mag[b.0].total_cmp(&mag[a.0]).then(a.0.cmp(&b.0)));

    // Strongest first. A peak on the 2nd..=max_harmonic multiple of a kept
    // peak is dropped; a comparable peak on a submultiple replaces it, since
    // the beat is the fundamental of that series.
    // A one-bin uncertainty in the fundamental grows to h bins at harmonic h.
    let is_multiple =
        |hi: f64, lo: f64| (2..=cfg.max_harmonic).any(|h| libm::fabs(hi - h as f64 * lo) <= h as f64);
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (k, pos) in candidates {
        if kept.iter().any(|&(j, _)| k.abs_diff(j) <= cfg.merge_bins) {
            continue;
        }
        if kept.iter().any(|&(_, p)| is_multiple(pos, p)) {
            continue;
        }
        if let Some(slot) = kept
            .iter_mut()
            .find(|(j, p)| is_multiple(*p, pos) && mag[k] >= SUBHARMONIC_SHARE * mag[*j])
        {
            *slot = (k, pos);
            continue;
        }
        kept.push((k, pos));
    }
    // Replacements can leave the list out of order.
    kept.sort_by(|a, b| mag[b.0].total_cmp(&mag[a.0]).then(a.0.cmp(&b.0)));
    let top = kept.first().map_or(1.0, |&(k, _)| mag[k]);
    let peaks = kept
        .iter()
        .map(|&(k, pos)| RfoPeak { freq_hz: pos * resolution_hz, magnitude: mag[k] / top })
        .collect();
    Ok(RfoEstimate { peaks, resolution_hz })
}

// Parabolic interpolation of the peak position around bin `k`, in bins.
fn refine(mag: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= mag.len() {
        return k as f64;
    }
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return k as f64;
    }
    k as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Peaks at least this strong relative to the strongest one count as
/// distinct beating frequencies.
pub const SIGNIFICANT_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmitterCount {
    /// One more than the number of significant beating peaks.
    pub estimate: usize,
    /// Fewest transmitters whose pairwise offsets can produce that many peaks.
    pub lower_bound: usize,
    /// The two bounds agree, which holds for up to three transmitters.
    pub confident: bool,
}

impl RfoEstimate {
    pub fn significant_peaks(&self, share: f64) -> impl Iterator<Item = &RfoPeak> {
        self.peaks.iter().filter(move |p| p.magnitude >= share)
    }
}

pub fn count_transmitters(est: &RfoEstimate) -> TransmitterCount {
    count_transmitters_with(est, SIGNIFICANT_SHARE)
}

pub fn count_transmitters_with(est: &RfoEstimate, share: f64) -> TransmitterCount {
    let p = est.significant_peaks(share).count();
    let mut lower = 1;
    while lower * (lower - 1) / 2 < p {
        lower += 1;
    }
    let estimate = p + 1;
    TransmitterCount { estimate, lower_bound: lower, confident: lower == estimate }
}
