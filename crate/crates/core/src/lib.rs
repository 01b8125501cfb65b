//! Exact-dyadic laboratory for the singular skew-product on the two-torus
//!
//! ```text
//! f(x, y) = (2x mod 1, y + c / |x - 1/2| mod 1),   c > 0
//! ```
//!
//! The base coordinate `x` is carried as an exact binary fraction
//! ([`DyadicX`]) so forward orbits of the doubling map lose no bits and the
//! singular line `x = 1/2` is tested exactly. The fiber coordinate `y` is an
//! `f64`.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel drivers, file formats
//! and the command line live in the `skewtorus-lab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dyadic;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod map;
pub mod measure;
pub mod quad;
pub mod root;
pub mod witness;
pub mod word;

pub use dyadic::DyadicX;
pub use error::{Error, Result};
pub use map::{Jacobian, MapParams, TorusPoint};
pub use measure::Rectangle;
pub use word::BranchWord;

/// Default resolution of sampled base coordinates, in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 256;
