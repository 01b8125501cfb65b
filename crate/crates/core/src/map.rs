//! The map, its inverse branches and its derivative.
//!
//! Round-off budget: every evaluation of `c / |x - 1/2|` contributes at most
//! `1e-12` of absolute error to the fiber coordinate (for the parameter
//! ranges used here it is closer to `1e-15`). The base coordinate is exact.

use alloc::vec::Vec;

use crate::dyadic::DyadicX;
use crate::error::{Error, Result};
use crate::word::BranchWord;

/// Per-evaluation floating error budget on the fiber coordinate.
pub const Y_ERROR_BUDGET: f64 = 1e-12;

/// Strength `c > 0` of the singularity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapParams {
    c: f64,
}

impl MapParams {
    /// Lebesgue mixing is established for `c` strictly above this value.
    pub const MIXING_THRESHOLD: f64 = 0.25;

    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter("c must be a positive finite number"));
        }
        Ok(MapParams { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn in_mixing_regime(&self) -> bool {
        self.c > Self::MIXING_THRESHOLD
    }

    pub fn require_mixing(&self) -> Result<()> {
        if self.in_mixing_regime() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("this operation needs c > 1/4"))
        }
    }
}

/// `y - floor(y)`, with a rounded-up `1.0` folded back to `0.0`.
pub fn wrap_unit(y: f64) -> f64 {
    let r = y - libm::floor(y);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the torus: exact base coordinate, floating fiber coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint {
    pub x: DyadicX,
    pub y: f64,
}

impl TorusPoint {
    /// Reduces `y` into `[0, 1)`.
    pub fn new(x: DyadicX, y: f64) -> Self {
        TorusPoint { x, y: wrap_unit(y) }
    }

    /// Convenience constructor from floats, `x` taken exactly at `bits` digits.
    pub fn from_f64(x: f64, y: f64, bits: u32) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidParameter("y must be finite"));
        }
        Ok(TorusPoint::new(DyadicX::from_f64(x, bits)?, y))
    }

    pub fn is_singular(&self) -> bool {
        self.x.is_half()
    }

    /// One forward step without reallocating the base coordinate.
    pub fn step_in_place(&mut self, params: &MapParams) -> Result<()> {
        if self.x.is_half() {
            return Err(Error::SingularInput);
        }
        self.y = wrap_unit(self.y + params.c / self.x.dist_to_half());
        self.x.double_in_place();
        Ok(())
    }
}

/// `f(x, y) = (2x mod 1, y + c/|x - 1/2| mod 1)`.
pub fn apply_map(p: &TorusPoint, params: &MapParams) -> Result<TorusPoint> {
    let mut q = p.clone();
    q.step_in_place(params)?;
    Ok(q)
}

/// `f^n(p)`. The base coordinate needs at least `n` digits of precision.
pub fn apply_map_n(p: &TorusPoint, n: usize, params: &MapParams) -> Result<TorusPoint> {
    let available = p.x.precision_bits() as usize;
    if available < n {
        return Err(Error::PrecisionExhausted { needed: n, available });
    }
    let mut q = p.clone();
    for step in 0..n {
        q.step_in_place(params).map_err(|_| Error::SingularOrbit { step })?;
    }
    Ok(q)
}

/// The whole forward orbit `p, f(p), ..., f^n(p)`.
pub fn orbit(p: &TorusPoint, n: usize, params: &MapParams) -> Result<Vec<TorusPoint>> {
    let available = p.x.precision_bits() as usize;
    if available < n {
        return Err(Error::PrecisionExhausted { needed: n, available });
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut q = p.clone();
    out.push(q.clone());
    for step in 0..n {
        q.step_in_place(params).map_err(|_| Error::SingularOrbit { step })?;
        out.push(q.clone());
    }
    Ok(out)
}

/// `Z_0(x, y) = (x/2, y - 2c/(1-x))` and `Z_1(x, y) = ((1+x)/2, y - 2c/x)`.
pub fn preimage_branch(p: &TorusPoint, bit: u8, params: &MapParams) -> Result<TorusPoint> {
    pull_back(p, bit, 1, params)
}

fn pull_back(p: &TorusPoint, bit: u8, index: usize, params: &MapParams) -> Result<TorusPoint> {
    if bit > 1 {
        return Err(Error::InvalidWord("digits must be 0 or 1"));
    }
    let x = p.x.prepend_digit(bit);
    if x.is_half() {
        return Err(Error::SingularPreimage { index });
    }
    // c/|x_new - 1/2| is 2c/(1-x) for bit 0 and 2c/x for bit 1; evaluating it
    // from the new point reproduces the float the forward map will add back.
    let y = wrap_unit(p.y - params.c / x.dist_to_half());
    Ok(TorusPoint { x, y })
}

/// `Z_b(p)`: pulls back by `b_n` first and by `b_1` last, so that
/// `f^{|b|}(Z_b(p)) = p` and `x_b = 0.b1...bn x`.
///
/// A failure reports the 1-based word position whose pull-back is singular.
pub fn preimage_word(p: &TorusPoint, word: &BranchWord, params: &MapParams) -> Result<TorusPoint> {
    let mut q = p.clone();
    for index in (1..=word.len()).rev() {
        q = pull_back(&q, word.digit(index), index, params)?;
    }
    Ok(q)
}

/// All `2^n` preimages of `x` under the doubling map, `(x + j) / 2^n` for
/// `j = 0..2^n`, in increasing order.
pub fn preimage_level_set(x: &DyadicX, n: u32, cap: usize) -> Result<Vec<DyadicX>> {
    if n >= usize::BITS || (1usize << n) > cap {
        return Err(Error::CardinalityOverflow { n, cap });
    }
    let count = 1u64 << n;
    let mut out = Vec::with_capacity(count as usize);
    for j in 0..count {
        let word = BranchWord::from_index(j, n as usize);
        out.push(x.prepend_digits(word.bits()));
    }
    Ok(out)
}

/// `Df` at a point, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobian {
    pub m: [[f64; 2]; 2],
}

impl Jacobian {
    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Roots of `t^2 - trace t + det`, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let (tr, det) = (self.trace(), self.det());
        let disc = libm::sqrt((tr * tr - 4.0 * det).max(0.0));
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.m[0][0] * v[0] + self.m[0][1] * v[1], self.m[1][0] * v[0] + self.m[1][1] * v[1]]
    }

    /// Eigenvector of the expanding eigenvalue 2, normalized to unit first entry.
    pub fn expanding_direction(&self) -> [f64; 2] {
        // (J - 2I) v = 0 with v = (1, t): m10 + (m11 - 2) t = 0.
        [1.0, self.m[1][0] / (2.0 - self.m[1][1])]
    }
}

/// `[[2, 0], [±c/(x-1/2)^2, 1]]`, `+` left of the singular line and `-` right of it.
pub fn jacobian_at(p: &TorusPoint, params: &MapParams) -> Result<Jacobian> {
    if p.is_singular() {
        return Err(Error::SingularInput);
    }
    let d = p.x.dist_to_half();
    let sign = if p.x.digit(1) == 0 { 1.0 } else { -1.0 };
    Ok(Jacobian { m: [[2.0, 0.0], [sign * params.c / (d * d), 1.0]] })
}
