use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dyadic::DyadicX;
use crate::error::{Error, Result};

/// A finite binary word `b1 b2 ... bn` selecting the inverse branch `Z_b`.
///
/// `b1` is the digit applied last when pulling back, so `x_b = 0.b1...bn x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BranchWord {
    bits: Vec<u8>,
}

impl BranchWord {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidWord("digits must be 0 or 1"));
        }
        Ok(BranchWord { bits })
    }

    pub fn empty() -> Self {
        BranchWord { bits: Vec::new() }
    }

    /// The word of length `len` whose digits spell `value` in binary, most
    /// significant first.
    pub fn from_index(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let bits = (0..len).map(|i| ((value >> (len - 1 - i)) & 1) as u8).collect();
        BranchWord { bits }
    }

    /// All `2^len` words of the given length, in lexicographic order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = BranchWord> {
        assert!(len < 64);
        (0..1u64 << len).map(move |v| BranchWord::from_index(v, len))
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Digit `b_i`, 1-based.
    pub fn digit(&self, i: usize) -> u8 {
        self.bits[i - 1]
    }

    pub fn last(&self) -> Option<u8> {
        self.bits.last().copied()
    }

    /// True when every digit equals the first one (and for the empty word).
    pub fn is_constant(&self) -> bool {
        self.bits.windows(2).all(|w| w[0] == w[1])
    }

    /// `0.b1...bj` as an exact dyadic with `j` digits.
    pub fn prefix_value(&self, j: usize) -> DyadicX {
        DyadicX::from_digits(&self.bits[..j])
    }

    pub fn concat(&self, other: &BranchWord) -> BranchWord {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BranchWord { bits }
    }
}

impl FromStr for BranchWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidWord("only the characters 0 and 1 are allowed")),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(BranchWord { bits })
    }
}

impl fmt::Display for BranchWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}
