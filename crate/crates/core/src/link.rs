//! Seeded end-to-end packet simulation: encode, modulate, superpose, add
//! noise, receive.

use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::channel::{add_noise_with, superpose_refs, ChannelScenario, SampleStream};
use crate::math::PI;
use crate::metrics::{BatchTally, ErrorHistogram};
use crate::phy::{self, modulate, Packet, PhyConfig};
use crate::receiver::{receive_frame, ReceiverConfig, ReceptionOutcome};
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub phy: PhyConfig,
    pub channel: ChannelScenario,
    pub payload_bytes: usize,
    /// `reference_power` is overwritten with the strongest transmitter's power.
    pub receiver: ReceiverConfig,
    /// All transmitters send the same payload; otherwise each draws its own
    /// and the first transmitter's payload is the one expected.
    pub same_data: bool,
    /// Draw every transmitter's carrier phase per packet instead of using the
    /// profile's `initial_phase`.
    pub random_phase: bool,
}

impl LinkScenario {
    pub fn new(phy: PhyConfig, channel: ChannelScenario, payload_bytes: usize) -> Self {
        LinkScenario {
            phy,
            channel,
            payload_bytes,
            receiver: ReceiverConfig::default(),
            same_data: true,
            random_phase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        self.channel.validate()?;
        if self.payload_bytes == 0 || self.payload_bytes > phy::MAX_PAYLOAD {
            return Err(Error::invalid("payload_bytes must be 1..=255"));
        }
        Ok(())
    }

    /// Packet `index` of the stream seeded by `base_seed`.
    pub fn simulate_packet(&self, base_seed: u64, index: u64) -> Result<ReceptionOutcome> {
        let mut rng = stream_rng(base_seed, index);
        let n_tx = self.channel.transmitters.len();
        let draw = |rng: &mut crate::rng::SimRng| -> Result<Packet> {
            let mut bytes = alloc::vec![0u8; self.payload_bytes];
            rng.fill(&mut bytes[..]);
            Packet::new(bytes)
        };
        let packet = draw(&mut rng)?;
        let frame = phy::encode(&packet, &self.phy)?;
        let mut own = Vec::new();
        if !self.same_data {
            for _ in 1..n_tx {
                let p = draw(&mut rng)?;
                own.push(modulate(&phy::encode(&p, &self.phy)?, &self.phy)?);
            }
        }
        let first = modulate(&frame, &self.phy)?;
        let streams: Vec<&SampleStream> =
            (0..n_tx).map(|i| if i == 0 || self.same_data { &first } else { &own[i - 1] }).collect();

        let mut channel = self.channel.clone();
        if self.random_phase {
            for t in &mut channel.transmitters {
                t.initial_phase = rng.random::<f64>() * 2.0 * PI;
            }
        }
        let mut rx = superpose_refs(&streams, &channel)?;
        let noise = channel.noise_power();
        if noise > 0.0 {
            add_noise_with(&mut rx.samples, libm::sqrt(noise / 2.0), &mut rng);
        }
        let cfg = ReceiverConfig { reference_power: channel.strongest_power(), ..self.receiver };
        receive_frame(&rx, &self.phy, &cfg, &packet, &frame)
    }

    /// Runs packets `range` and folds them into a tally and, optionally, a
    /// histogram.
    pub fn run(&self, base_seed: u64, range: Range<u64>, with_histogram: bool) -> Result<BatchResult> {
        self.validate()?;
        let mut out = BatchResult {
            tally: BatchTally::default(),
            histogram: with_histogram
                .then(|| ErrorHistogram::new(8 * self.payload_bytes, self.phy.data_rate)),
        };
        for i in range {
            let o = self.simulate_packet(base_seed, i)?;
            out.tally.add(&o);
            if let Some(h) = &mut out.histogram {
                h.add(&o)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub tally: BatchTally,
    pub histogram: Option<ErrorHistogram>,
}

impl BatchResult {
    pub fn merge(&mut self, other: &BatchResult) -> Result<()> {
        self.tally.merge(&other.tally);
        match (&mut self.histogram, &other.histogram) {
            (Some(a), Some(b)) => a.merge(b),
            (None, None) => Ok(()),
            _ => Err(Error::invalid("cannot merge batches with and without histograms")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::PhyMode;

    #[test]
    fn deterministic_per_index() {
        let s = LinkScenario::new(PhyConfig::new(PhyMode::Ble1M), ChannelScenario::ct2(2e3, 0.0, 5.0), 20);
        assert_eq!(s.simulate_packet(9, 4).unwrap(), s.simulate_packet(9, 4).unwrap());
    }

    #[test]
    fn split_batches_merge_to_whole() {
        let s = LinkScenario::new(PhyConfig::new(PhyMode::Ble1M), ChannelScenario::ct2(5e3, 0.0, 8.0), 10);
        let whole = s.run(1, 0..40, true).unwrap();
        let mut a = s.run(1, 20..40, true).unwrap();
        a.merge(&s.run(1, 0..20, true).unwrap()).unwrap();
        assert_eq!(whole, a);
        assert_eq!(whole.tally.n_packets, 40);
    }

    #[test]
    fn clean_single_link() {
        let s = LinkScenario::new(PhyConfig::new(PhyMode::Ble500K), ChannelScenario::single(30.0), 30);
        let r = s.run(3, 0..20, false).unwrap();
        assert_eq!(r.tally.ok, 20);
    }
}
