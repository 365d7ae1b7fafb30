//! Physical-layer laboratory for concurrent transmissions.
//!
//! The crate models what happens when several low-power radios send the same
//! packet at the same time: their carriers beat against each other, the
//! received envelope swings between constructive peaks and destructive
//! valleys, and the receiver's bit errors cluster in those valleys.
//!
//! * [`phy`] encodes packets for the BLE 5 and IEEE 802.15.4 PHYs and turns
//!   coded bits into continuous-phase BFSK baseband samples.
//! * [`channel`] superimposes transmitters with their carrier offsets, power
//!   ratios and timing offsets, and adds white Gaussian noise.
//! * [`receiver`] demodulates non-coherently, detects preambles and provides
//!   the closed-form two-transmitter BER.
//! * [`link`] chains the above into seeded per-packet simulations.
//! * [`metrics`] classifies receptions and recovers beating frequencies from
//!   bit-error histograms.
//! * [`flood`] is a slotted simulator for Glossy, Robust Flooding and Crystal
//!   under periodic jamming.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod flood;
pub mod link;
pub mod math;
pub mod metrics;
pub mod phy;
pub mod receiver;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
