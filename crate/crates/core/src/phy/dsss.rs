//! 2.4 GHz O-QPSK spreading: every 4-bit symbol becomes 32 chips.
//!
//! Symbols 1..=7 are symbol 0 rotated right by four chips per step; symbols
//! 8..=15 are symbols 0..=7 with every odd-indexed chip inverted. The unit
//! tests pin rows of the resulting table against the published standard.

use alloc::vec::Vec;

pub const CHIPS_PER_SYMBOL: usize = 32;
pub const BITS_PER_SYMBOL: usize = 4;

/// Chip sequence of symbol 0, first chip in the most significant bit.
pub const SYMBOL_ZERO: u32 = 0b1101_1001_1100_0011_0101_0010_0010_1110;

const ODD_CHIPS: u32 = 0x5555_5555;

/// Chip table, first chip of each sequence in bit 31.
pub const CHIP_TABLE: [u32; 16] = build_table();

const fn build_table() -> [u32; 16] {
    let mut t = [0u32; 16];
    let mut k = 0;
    while k < 8 {
        t[k] = SYMBOL_ZERO.rotate_right(4 * k as u32);
        // chip i lives in bit 31 - i, so odd chips are the even bit positions
        t[k + 8] = t[k] ^ ODD_CHIPS;
        k += 1;
    }
    t
}

/// Spreads bits (LSB-first within each 4-bit symbol).
pub fn spread(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.len() / BITS_PER_SYMBOL * CHIPS_PER_SYMBOL);
    for sym_bits in bits.chunks_exact(BITS_PER_SYMBOL) {
        let sym = sym_bits
            .iter()
            .enumerate()
            .fold(0usize, |s, (i, &b)| s | (usize::from(b & 1) << i));
        let seq = CHIP_TABLE[sym];
        out.extend((0..CHIPS_PER_SYMBOL).map(|i| ((seq >> (31 - i)) & 1) as u8));
    }
    out
}

/// Despreads to the symbol at minimum Hamming distance (lowest symbol index on
/// ties) and unpacks it into bits.
pub fn despread(chips: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(chips.len() / CHIPS_PER_SYMBOL * BITS_PER_SYMBOL);
    for block in chips.chunks_exact(CHIPS_PER_SYMBOL) {
        let word = block.iter().fold(0u32, |w, &c| (w << 1) | u32::from(c & 1));
        let mut best = 0usize;
        let mut best_d = u32::MAX;
        for (sym, &seq) in CHIP_TABLE.iter().enumerate() {
            let d = (seq ^ word).count_ones();
            if d < best_d {
                best_d = d;
                best = sym;
            }
        }
        out.extend((0..BITS_PER_SYMBOL).map(|i| ((best >> i) & 1) as u8));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> u32 {
        u32::from_str_radix(&s.replace(' ', ""), 2).unwrap()
    }

    #[test]
    fn rows_match_standard_table() {
        assert_eq!(CHIP_TABLE[0], parse("1101 1001 1100 0011 0101 0010 0010 1110"));
        assert_eq!(CHIP_TABLE[1], parse("1110 1101 1001 1100 0011 0101 0010 0010"));
        assert_eq!(CHIP_TABLE[7], parse("1001 1100 0011 0101 0010 0010 1110 1101"));
        assert_eq!(CHIP_TABLE[8], parse("1000 1100 1001 0110 0000 0111 0111 1011"));
        assert_eq!(CHIP_TABLE[15], parse("1100 1001 0110 0000 0111 0111 1011 1000"));
    }

    #[test]
    fn minimum_distance_tolerates_five_chip_errors() {
        let mut dmin = u32::MAX;
        for a in 0..16 {
            for b in (a + 1)..16 {
                dmin = dmin.min((CHIP_TABLE[a] ^ CHIP_TABLE[b]).count_ones());
            }
        }
        assert!(dmin >= 12, "dmin = {dmin}");
    }

    #[test]
    fn spread_despread_all_symbols() {
        for sym in 0..16u8 {
            let bits: Vec<u8> = (0..4).map(|i| (sym >> i) & 1).collect();
            let chips = spread(&bits);
            assert_eq!(chips.len(), 32);
            assert_eq!(despread(&chips), bits);
        }
    }
}
