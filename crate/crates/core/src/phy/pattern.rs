//! Pattern mapper of the 125 kb/s coded PHY: every coded bit becomes four
//! chips.

use alloc::vec::Vec;

pub const CHIPS_PER_BIT: usize = 4;
pub const ZERO: [u8; 4] = [0, 0, 1, 1];
pub const ONE: [u8; 4] = [1, 1, 0, 0];

pub fn map(coded: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(coded.len() * CHIPS_PER_BIT);
    for &b in coded {
        out.extend_from_slice(if b & 1 == 0 { &ZERO } else { &ONE });
    }
    out
}

/// Collapses each 4-chip group to the nearer pattern; ties resolve to 0.
pub fn demap(chips: &[u8]) -> Vec<u8> {
    chips
        .chunks_exact(CHIPS_PER_BIT)
        .map(|g| {
            let d0 = g.iter().zip(ZERO).filter(|(a, b)| (**a & 1) != *b).count();
            let d1 = CHIPS_PER_BIT - d0;
            u8::from(d1 < d0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_0011() {
        assert_eq!(map(&[0]), [0, 0, 1, 1]);
        assert_eq!(map(&[1]), [1, 1, 0, 0]);
    }

    #[test]
    fn one_flip_is_corrected() {
        assert_eq!(demap(&[0, 1, 1, 1]), [0]);
        assert_eq!(demap(&[1, 1, 0, 1]), [1]);
    }

    #[test]
    fn ties_go_to_zero() {
        assert_eq!(demap(&[0, 1, 0, 1]), [0]);
        assert_eq!(demap(&[1, 1, 1, 1]), [0]);
    }
}
