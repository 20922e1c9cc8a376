use std::hash::Hasher;

use siphasher::sip::SipHasher24;

use super::OracleKey;
use crate::error::{Error, Result};

const ROUNDS: u8 = 10;

/// Keyed permutation of `[0, 2^bits)`: a balanced Feistel network on the
/// next even width, cycle-walked back into range when `bits` is odd.
#[derive(Debug, Clone)]
pub struct FeistelPermutation {
    bits: u32,
    half: u32,
    k0: u64,
    k1: u64,
}

impl FeistelPermutation {
    pub fn new(bits: u32, key: OracleKey) -> Result<Self> {
        if bits > 64 {
            return Err(Error::InvalidParams(format!("{bits}-bit labels exceed 64")));
        }
        let (k0, k1) = key.halves();
        Ok(Self {
            bits,
            half: bits.div_ceil(2),
            k0,
            k1,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn half_mask(&self) -> u64 {
        mask(self.half)
    }

    fn round(&self, round: u8, value: u64) -> u64 {
        let mut h = SipHasher24::new_with_keys(self.k0, self.k1);
        h.write_u8(round);
        h.write_u64(value);
        h.finish() & self.half_mask()
    }

    fn forward_once(&self, x: u64) -> u64 {
        let m = self.half_mask();
        let (mut l, mut r) = ((x >> self.half) & m, x & m);
        for i in 0..ROUNDS {
            (l, r) = (r, l ^ self.round(i, r));
        }
        (l << self.half) | r
    }

    fn backward_once(&self, y: u64) -> u64 {
        let m = self.half_mask();
        let (mut l, mut r) = ((y >> self.half) & m, y & m);
        for i in (0..ROUNDS).rev() {
            (l, r) = (r ^ self.round(i, l), l);
        }
        (l << self.half) | r
    }

    fn in_range(&self, x: u64) -> bool {
        self.bits == 64 || x >> self.bits == 0
    }

    pub fn permute(&self, x: u64) -> Result<u64> {
        self.check(x)?;
        if self.bits == 0 {
            return Ok(0);
        }
        let mut y = self.forward_once(x);
        while !self.in_range(y) {
            y = self.forward_once(y);
        }
        Ok(y)
    }

    pub fn invert(&self, y: u64) -> Result<u64> {
        self.check(y)?;
        if self.bits == 0 {
            return Ok(0);
        }
        let mut x = self.backward_once(y);
        while !self.in_range(x) {
            x = self.backward_once(x);
        }
        Ok(x)
    }

    fn check(&self, x: u64) -> Result<()> {
        if self.in_range(x) {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange {
                label: x,
                label_bits: self.bits,
            })
        }
    }
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_widths_are_bijections() {
        for bits in 0..=12 {
            let p = FeistelPermutation::new(bits, OracleKey(0xfeed)).unwrap();
            let n = 1u64 << bits;
            let mut seen = vec![false; n as usize];
            for x in 0..n {
                let y = p.permute(x).unwrap();
                assert!(!seen[y as usize], "collision at bits={bits}");
                seen[y as usize] = true;
                assert_eq!(p.invert(y).unwrap(), x);
            }
        }
    }

    #[test]
    fn wide_labels_round_trip() {
        for bits in [31, 33, 63, 64] {
            let p = FeistelPermutation::new(bits, OracleKey(7)).unwrap();
            for x in [0u64, 1, 12345, mask(bits), mask(bits) / 3] {
                let y = p.permute(x).unwrap();
                assert!(bits == 64 || y < 1 << bits);
                assert_eq!(p.invert(y).unwrap(), x);
            }
        }
        let p = FeistelPermutation::new(10, OracleKey(7)).unwrap();
        assert!(p.permute(1024).is_err());
    }

    #[test]
    fn different_keys_give_different_permutations() {
        let a = FeistelPermutation::new(16, OracleKey(1)).unwrap();
        let b = FeistelPermutation::new(16, OracleKey(2)).unwrap();
        let differ = (0..256).filter(|&x| a.permute(x).unwrap() != b.permute(x).unwrap()).count();
        assert!(differ > 250);
    }
}
