//! Rate-1/2, constraint-length-4 convolutional code and its hard-decision
//! Viterbi decoder.

use alloc::vec::Vec;

/// Number of memory cells in the encoder shift register.
pub const MEMORY: usize = 3;
const STATES: usize = 1 << MEMORY;

/// Generator taps indexed by delay: `taps[0]` multiplies the current input,
/// `taps[3]` the input three bits ago.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCode {
    pub g0: [u8; 4],
    pub g1: [u8; 4],
}

/// LE Coded PHY generators: G0 = 1 + D + D^2 + D^3, G1 = 1 + D^2 + D^3.
pub const BLE_CODED: ConvCode = ConvCode {
    g0: [1, 1, 1, 1],
    g1: [1, 0, 1, 1],
};

impl ConvCode {
    fn masks(&self) -> (u8, u8) {
        let pack = |g: &[u8; 4]| g.iter().enumerate().fold(0u8, |m, (i, &t)| m | ((t & 1) << i));
        (pack(&self.g0), pack(&self.g1))
    }

    /// Output pair for register contents `reg` (bit 0 = newest input).
    #[inline]
    fn outputs(masks: (u8, u8), reg: u8) -> (u8, u8) {
        (((reg & masks.0).count_ones() & 1) as u8, ((reg & masks.1).count_ones() & 1) as u8)
    }

    /// Encodes `bits` followed by `MEMORY` zero tail bits. Output length is
    /// `2 * (bits.len() + 3)`.
    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        let masks = self.masks();
        let mut out = Vec::with_capacity(2 * (bits.len() + MEMORY));
        let mut state = 0u8;
        for &b in bits.iter().chain([0u8; MEMORY].iter()) {
            let reg = (b & 1) | (state << 1);
            let (c0, c1) = Self::outputs(masks, reg);
            out.push(c0);
            out.push(c1);
            state = reg & (STATES as u8 - 1);
        }
        out
    }

    /// Hard-decision Viterbi decoding of a terminated codeword. Returns the
    /// `coded.len() / 2 - 3` information bits.
    ///
    /// Branch metrics are Hamming distances; on equal path metrics the
    /// predecessor with the lower state index wins.
    pub fn decode(&self, coded: &[u8]) -> Vec<u8> {
        let steps = coded.len() / 2;
        if steps <= MEMORY {
            return Vec::new();
        }
        let masks = self.masks();
        let mut expected = [(0u8, 0u8); 2 * STATES];
        for (reg, e) in expected.iter_mut().enumerate() {
            *e = Self::outputs(masks, reg as u8);
        }

        const INF: u32 = u32::MAX / 2;
        let mut metric = [INF; STATES];
        metric[0] = 0;
        let mut survivors: Vec<[u8; STATES]> = Vec::with_capacity(steps);

        for step in 0..steps {
            let r0 = coded[2 * step] & 1;
            let r1 = coded[2 * step + 1] & 1;
            let mut next = [INF; STATES];
            let mut pred = [0u8; STATES];
            for (ns, slot) in next.iter_mut().enumerate() {
                // reg = input | state << 1, next state = reg & 7, so the two
                // predecessors differ only in the bit that falls off.
                for oldest in 0..2u8 {
                    let reg = ns as u8 | (oldest << MEMORY);
                    let ps = (reg >> 1) as usize;
                    if metric[ps] >= INF {
                        continue;
                    }
                    let (e0, e1) = expected[reg as usize];
                    let m = metric[ps] + u32::from(e0 ^ r0) + u32::from(e1 ^ r1);
                    if m < *slot || (m == *slot && (ps as u8) < pred[ns]) {
                        *slot = m;
                        pred[ns] = ps as u8;
                    }
                }
            }
            metric = next;
            survivors.push(pred);
        }

        let mut bits = Vec::with_capacity(steps);
        let mut state = 0usize;
        for pred in survivors.iter().rev() {
            bits.push((state & 1) as u8);
            state = pred[state] as usize;
        }
        bits.reverse();
        bits.truncate(steps - MEMORY);
        bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Shift-register reference: c_k = sum_i g_k[i] * x[n - i] mod 2.
    fn direct_encode(code: &ConvCode, bits: &[u8]) -> Vec<u8> {
        let mut padded = bits.to_vec();
        padded.extend_from_slice(&[0; MEMORY]);
        let x = |n: isize| if n < 0 { 0 } else { padded[n as usize] };
        let mut out = Vec::new();
        for n in 0..padded.len() as isize {
            for g in [&code.g0, &code.g1] {
                let s: u8 = (0..4).map(|i| g[i] * x(n - i as isize)).sum();
                out.push(s & 1);
            }
        }
        out
    }

    #[test]
    fn sixteen_bit_message_matches_shift_register() {
        let msg = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1];
        let coded = BLE_CODED.encode(&msg);
        assert_eq!(coded, direct_encode(&BLE_CODED, &msg));
        assert_eq!(coded.len(), 2 * (16 + 3));
    }

    #[test]
    fn impulse_response_is_generators() {
        let coded = BLE_CODED.encode(&[1]);
        assert_eq!(coded, [1, 1, 1, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn clean_round_trip() {
        let msg = [0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 0];
        assert_eq!(BLE_CODED.decode(&BLE_CODED.encode(&msg)), msg);
    }

    #[test]
    fn short_input_decodes_empty() {
        assert!(BLE_CODED.decode(&[0, 0, 0, 0, 0, 0]).is_empty());
    }
}
