//! Exact binary fractions on the circle `[0, 1)`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand_core::RngCore;

use crate::error::{Error, Result};

/// An x-coordinate `m / 2^k` with `0 <= m < 2^k`, stored as its first `k`
/// binary digits.
///
/// Doubling (`x -> 2x mod 1`) drops the leading digit and keeps `k`, so a
/// forward orbit of length `n <= k` is exact. Prepending a digit (an inverse
/// branch of the doubling map) grows `k` by one.
///
/// Equality and ordering compare values, not precisions.
#[derive(Clone)]
pub struct DyadicX {
    // limbs[0] holds digits 1..=64, most significant bit first. Digits past
    // `bits` are always zero.
    limbs: Vec<u64>,
    bits: u32,
}

fn limb_count(bits: u32) -> usize {
    bits.div_ceil(64) as usize
}

fn tail_mask(bits: u32) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => !(u64::MAX >> r),
    }
}

/// Converts a digit stream, given limb by limb, to the nearest `f64`.
fn limbs_to_f64(len: usize, limb: impl Fn(usize) -> u64) -> f64 {
    for i in 0..len {
        let hi = limb(i);
        if hi == 0 {
            continue;
        }
        let lz = hi.leading_zeros();
        let lo = if i + 1 < len { limb(i + 1) } else { 0 };
        let top = if lz == 0 { hi } else { (hi << lz) | (lo >> (64 - lz)) };
        let exp = -(64 * (i as i32 + 1)) - lz as i32;
        return libm::ldexp(top as f64, exp);
    }
    0.0
}

impl DyadicX {
    pub fn zero(bits: u32) -> Self {
        let bits = bits.max(1);
        DyadicX { limbs: vec![0; limb_count(bits)], bits }
    }

    /// `numerator / 2^k`, with precision `k` (at least one bit).
    pub fn from_fraction(numerator: u64, k: u32) -> Result<Self> {
        if k > 64 {
            return Err(Error::InvalidParameter("dyadic denominator exponent above 64"));
        }
        if k < 64 && numerator >> k != 0 {
            return Err(Error::InvalidParameter("dyadic numerator must be below 2^k"));
        }
        let mut x = Self::zero(k);
        if k > 0 {
            x.limbs[0] = numerator << (64 - k);
        }
        Ok(x)
    }

    /// The exact binary expansion of `x` in `[0, 1)`, truncated to `bits` digits.
    pub fn from_f64(x: f64, bits: u32) -> Result<Self> {
        if !x.is_finite() || !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidParameter("x must be a finite value in [0, 1)"));
        }
        let mut out = Self::zero(bits);
        if x == 0.0 {
            return Ok(out);
        }
        let raw = x.to_bits();
        let biased = ((raw >> 52) & 0x7ff) as i64;
        let frac = raw & ((1u64 << 52) - 1);
        let (mantissa, scale) = if biased == 0 { (frac, 1074) } else { (frac | (1u64 << 52), 1075 - biased) };
        // x = mantissa / 2^scale, so mantissa bit i is binary digit scale - i.
        for i in 0..53 {
            if mantissa >> i & 1 == 1 {
                let pos = scale - i;
                if pos >= 1 && pos <= out.bits as i64 {
                    out.set_digit(pos as u32);
                }
            }
        }
        Ok(out)
    }

    /// The dyadic `0.d1 d2 ... dn`, precision `n`.
    pub fn from_digits(digits: &[u8]) -> Self {
        let mut out = Self::zero(digits.len() as u32);
        for (i, &d) in digits.iter().enumerate() {
            if d != 0 {
                out.set_digit(i as u32 + 1);
            }
        }
        out
    }

    /// Uniform on the `2^bits` dyadics of the given precision.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R, bits: u32) -> Self {
        let mut out = Self::zero(bits);
        for limb in out.limbs.iter_mut() {
            *limb = rng.next_u64();
        }
        out.mask_tail();
        out
    }

    /// `floor(x * 2^64) / 2^64` followed by random digits 65..=bits.
    ///
    /// Used to sample a real-valued position at full resolution: the random
    /// tail keeps forward orbits from collapsing onto `0` after ~64 steps.
    pub fn from_f64_with_tail<R: RngCore + ?Sized>(x: f64, bits: u32, rng: &mut R) -> Result<Self> {
        let mut out = Self::from_f64(x, bits.min(64))?.with_precision(bits);
        for limb in out.limbs.iter_mut().skip(1) {
            *limb = rng.next_u64();
        }
        out.mask_tail();
        Ok(out)
    }

    fn mask_tail(&mut self) {
        let mask = tail_mask(self.bits);
        if let Some(last) = self.limbs.last_mut() {
            *last &= mask;
        }
    }

    pub fn precision_bits(&self) -> u32 {
        self.bits
    }

    /// Same value padded with zeros, or truncated (floor) when `bits` is smaller.
    pub fn with_precision(&self, bits: u32) -> Self {
        let bits = bits.max(1);
        let mut limbs = self.limbs.clone();
        limbs.resize(limb_count(bits), 0);
        let mut out = DyadicX { limbs, bits };
        out.mask_tail();
        out
    }

    /// Binary digit `pos` (1-based; digit 1 has weight 1/2).
    pub fn digit(&self, pos: u32) -> u8 {
        if pos == 0 || pos > self.bits {
            return 0;
        }
        let i = (pos - 1) as usize;
        (self.limbs[i / 64] >> (63 - i % 64) & 1) as u8
    }

    fn set_digit(&mut self, pos: u32) {
        let i = (pos - 1) as usize;
        self.limbs[i / 64] |= 1u64 << (63 - i % 64);
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn is_half(&self) -> bool {
        self.limbs[0] == 1u64 << 63 && self.limbs[1..].iter().all(|&l| l == 0)
    }

    /// Nearest `f64` (the digit window below the first 64 significant bits is dropped).
    pub fn to_f64(&self) -> f64 {
        limbs_to_f64(self.limbs.len(), |i| self.limbs[i])
    }

    /// `|x - 1/2|` computed exactly, then rounded once.
    pub fn dist_to_half(&self) -> f64 {
        let len = self.limbs.len();
        if self.limbs[0] >> 63 == 1 {
            return limbs_to_f64(len, |i| if i == 0 { self.limbs[0] & !(1u64 << 63) } else { self.limbs[i] });
        }
        if self.is_zero() {
            return 0.5;
        }
        // 1/2 - x = (-x mod 1) - 1/2, and -x mod 1 = !x + ulp.
        let last_nonzero = self.limbs.iter().rposition(|&l| l != 0).unwrap_or(0);
        let ulp = 1u64 << ((64 * len as u32 - self.bits) % 64);
        let neg = |i: usize| -> u64 {
            let v = match i.cmp(&last_nonzero) {
                Ordering::Less => !self.limbs[i],
                Ordering::Equal => {
                    let mask = if i + 1 == len { tail_mask(self.bits) } else { u64::MAX };
                    let step = if i + 1 == len { ulp } else { 1 };
                    (!self.limbs[i] & mask).wrapping_add(step)
                }
                Ordering::Greater => 0,
            };
            if i == 0 {
                v & !(1u64 << 63)
            } else {
                v
            }
        };
        limbs_to_f64(len, neg)
    }

    /// `x -> 2x mod 1`, in place.
    pub fn double_in_place(&mut self) {
        let len = self.limbs.len();
        for i in 0..len {
            let carry = if i + 1 < len { self.limbs[i + 1] >> 63 } else { 0 };
            self.limbs[i] = (self.limbs[i] << 1) | carry;
        }
    }

    pub fn doubled(&self) -> Self {
        let mut out = self.clone();
        out.double_in_place();
        out
    }

    /// `x -> 2^n x mod 1`.
    pub fn shifted(&self, n: u32) -> Self {
        let mut out = self.clone();
        let whole = (n / 64) as usize;
        let len = out.limbs.len();
        if whole > 0 {
            for i in 0..len {
                out.limbs[i] = if i + whole < len { out.limbs[i + whole] } else { 0 };
            }
        }
        for _ in 0..n % 64 {
            out.double_in_place();
        }
        out
    }

    /// The inverse branch `x -> (bit + x) / 2`; precision grows by one.
    pub fn prepend_digit(&self, bit: u8) -> Self {
        let bits = self.bits + 1;
        let len = limb_count(bits);
        let mut limbs = vec![0u64; len];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let cur = self.limbs.get(i).copied().unwrap_or(0);
            let prev = if i == 0 { (bit & 1) as u64 } else { self.limbs[i - 1] & 1 };
            *limb = (cur >> 1) | (prev << 63);
        }
        let mut out = DyadicX { limbs, bits };
        out.mask_tail();
        out
    }

    /// `(0.d1...dn + x / 2^n)`, i.e. the digits followed by the digits of `x`.
    pub fn prepend_digits(&self, digits: &[u8]) -> Self {
        digits.iter().rev().fold(self.clone(), |acc, &d| acc.prepend_digit(d))
    }

    fn aligned_limbs(&self, bits: u32) -> Vec<u64> {
        let mut l = self.limbs.clone();
        l.resize(limb_count(bits), 0);
        l
    }

    /// `x + other mod 1`, at the larger of the two precisions.
    pub fn add_mod1(&self, other: &Self) -> Self {
        let bits = self.bits.max(other.bits);
        let a = self.aligned_limbs(bits);
        let b = other.aligned_limbs(bits);
        let mut limbs = vec![0u64; a.len()];
        let mut carry = false;
        for i in (0..a.len()).rev() {
            let (s1, c1) = a[i].overflowing_add(b[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            limbs[i] = s2;
            carry = c1 || c2;
        }
        DyadicX { limbs, bits }
    }

    /// `x - other mod 1`, at the larger of the two precisions.
    pub fn sub_mod1(&self, other: &Self) -> Self {
        let bits = self.bits.max(other.bits);
        let a = self.aligned_limbs(bits);
        let b = other.aligned_limbs(bits);
        let mut limbs = vec![0u64; a.len()];
        let mut borrow = false;
        for i in (0..a.len()).rev() {
            let (d1, b1) = a[i].overflowing_sub(b[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            limbs[i] = d2;
            borrow = b1 || b2;
        }
        DyadicX { limbs, bits }
    }

    /// Distance on the circle `R/Z`, in `[0, 1/2]`.
    pub fn circle_distance(&self, other: &Self) -> Self {
        let d = self.sub_mod1(other);
        let e = other.sub_mod1(self);
        if d <= e {
            d
        } else {
            e
        }
    }
}

impl PartialEq for DyadicX {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for DyadicX {}

impl PartialOrd for DyadicX {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicX {
    fn cmp(&self, other: &Self) -> Ordering {
        let len = self.limbs.len().max(other.limbs.len());
        for i in 0..len {
            let a = self.limbs.get(i).copied().unwrap_or(0);
            let b = other.limbs.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Debug for DyadicX {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicX({} @ {} bits)", self.to_f64(), self.bits)
    }
}

impl fmt::Display for DyadicX {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    #[test]
    fn doubling_drops_leading_digit() {
        let x = DyadicX::from_fraction(0b1011, 4).unwrap();
        assert_eq!(x.doubled(), DyadicX::from_fraction(0b0110, 4).unwrap());
        assert_eq!(x.doubled().precision_bits(), 4);
    }

    #[test]
    fn doubling_carries_across_limbs() {
        let mut x = DyadicX::zero(130);
        x.set_digit(65);
        x.double_in_place();
        assert_eq!(x.digit(64), 1);
        assert_eq!(x.digit(65), 0);
    }

    #[test]
    fn prepend_is_inverse_of_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for bits in [1u32, 63, 64, 65, 200, 256] {
            let x = DyadicX::random(&mut rng, bits);
            for bit in [0u8, 1] {
                let y = x.prepend_digit(bit);
                assert_eq!(y.precision_bits(), bits + 1);
                assert_eq!(y.digit(1), bit);
                assert_eq!(y.doubled(), x);
            }
        }
    }

    #[test]
    fn from_f64_is_exact() {
        for v in [0.0, 0.5, 0.25, 0.1, 0.7, 1.0 - f64::EPSILON / 2.0, 1e-300] {
            let x = DyadicX::from_f64(v, 1100).unwrap();
            assert_eq!(x.to_f64(), v);
        }
        assert!(DyadicX::from_f64(1.0, 64).is_err());
        assert!(DyadicX::from_f64(-0.1, 64).is_err());
    }

    #[test]
    fn half_detection() {
        assert!(DyadicX::from_fraction(1, 1).unwrap().is_half());
        assert!(DyadicX::from_fraction(1, 1).unwrap().with_precision(300).is_half());
        assert!(!DyadicX::from_fraction(3, 2).unwrap().is_half());
    }

    #[test]
    fn dist_to_half_near_singularity_keeps_relative_precision() {
        // 1/2 - 2^-200 and 1/2 + 2^-200
        let mut below = DyadicX::zero(256);
        for pos in 2..=200 {
            below.set_digit(pos);
        }
        assert_eq!(below.dist_to_half(), libm::ldexp(1.0, -200));
        let mut above = DyadicX::from_fraction(1, 1).unwrap().with_precision(256);
        above.set_digit(200);
        assert_eq!(above.dist_to_half(), libm::ldexp(1.0, -200));
        assert_eq!(DyadicX::zero(256).dist_to_half(), 0.5);
        assert_eq!(DyadicX::from_fraction(1, 2).unwrap().dist_to_half(), 0.25);
        assert_eq!(DyadicX::from_fraction(3, 2).unwrap().dist_to_half(), 0.25);
    }

    #[test]
    fn dist_to_half_matches_subtraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let half = DyadicX::from_fraction(1, 1).unwrap();
        for bits in [3u32, 64, 100, 256] {
            for _ in 0..200 {
                let x = DyadicX::random(&mut rng, bits);
                let exact = if x >= half { x.sub_mod1(&half) } else { half.sub_mod1(&x) };
                assert_eq!(x.dist_to_half(), exact.to_f64(), "{x:?}");
            }
        }
    }

    #[test]
    fn add_sub_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DyadicX::random(&mut rng, 190);
        let b = DyadicX::random(&mut rng, 70);
        assert_eq!(a.add_mod1(&b).sub_mod1(&b), a);
        let d = a.circle_distance(&b);
        assert!(d <= DyadicX::from_fraction(1, 1).unwrap());
    }

    #[test]
    fn shifted_matches_repeated_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DyadicX::random(&mut rng, 256);
        let mut y = x.clone();
        for _ in 0..150 {
            y.double_in_place();
        }
        assert_eq!(x.shifted(150), y);
    }

    #[test]
    fn ordering_ignores_precision() {
        let a = DyadicX::from_fraction(1, 2).unwrap();
        let b = a.with_precision(500);
        assert_eq!(a, b);
        assert!(DyadicX::from_fraction(1, 3).unwrap() < b);
    }
}
