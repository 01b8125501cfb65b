//! Explicit witnesses of topological mixing.
//!
//! For rectangles `A`, `B` with x-half-widths `δ_A`, `δ_B` pick the first
//! `N` with `2^{-N} < min(δ_A, δ_B)` and the word
//!
//! ```text
//! r = a1...aN 0 1...1 0 b1...bN      (N ones)
//! ```
//!
//! built from the binary expansions of the centers. The point `x_r = 0.r`
//! lies in `A`, its `N`-th image sits within `2^{-N}` of the singular line,
//! and its `(2N+2)`-th image is within `2^{-N}` of `x_B`. The image of `A`
//! is checked to meet `B` at time `2N+2` and at every time from
//! `N₁ + 2N + 2` on, `N₁` being the horizontal cover time of `A`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dyadic::DyadicX;
use crate::error::{Error, Result};
use crate::map::{MapParams, TorusPoint};
use crate::measure::{unit_f64, worker_rng, BatchRunner, RectTest, Rectangle};
use crate::word::BranchWord;

/// Smallest `n` with `2^n · width(A) >= 1`.
pub fn horizontal_cover_time(rect: &Rectangle) -> usize {
    let w = rect.width();
    (0..1100).find(|&n| libm::ldexp(w, n as i32) >= 1.0).unwrap_or(1100)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessPlan {
    pub a: Rectangle,
    pub b: Rectangle,
    pub n: usize,
    pub word: BranchWord,
    /// `2N + 2`.
    pub threshold: usize,
    /// Horizontal cover time of `A`.
    pub cover_time: usize,
    /// `0.r`, exact.
    pub x_r: DyadicX,
    /// Fiber coordinate of the witness point, the center height of `A`.
    pub y_r: f64,
}

impl WitnessPlan {
    pub fn point(&self) -> TorusPoint {
        TorusPoint::new(self.x_r.clone(), self.y_r)
    }

    /// All times at which `f^n(A) ∩ B ≠ ∅` is checked: the threshold and
    /// `N₁ + 2N + 2 + k` for `k = 0..=k_max`.
    pub fn check_times(&self, k_max: usize) -> Vec<usize> {
        let mut times = vec![self.threshold];
        times.extend((0..=k_max).map(|k| self.cover_time + self.threshold + k));
        times.sort_unstable();
        times.dedup();
        times
    }
}

/// First `n` binary digits of `x ∈ [0, 1)`.
fn leading_digits(x: f64, n: usize) -> Result<Vec<u8>> {
    let d = DyadicX::from_f64(x, n as u32)?;
    Ok((1..=n as u32).map(|i| d.digit(i)).collect())
}

pub fn build_witness(a: &Rectangle, b: &Rectangle) -> Result<WitnessPlan> {
    let (ax, ay) = a.center();
    let (bx, _) = b.center();
    let delta = (a.width() / 2.0).min(b.width() / 2.0);
    if [delta, a.height(), b.height()].iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::DegenerateRectangle);
    }
    let n = (1..1000).find(|&n| libm::ldexp(1.0, -(n as i32)) < delta).ok_or(Error::DegenerateRectangle)?;
    let mut bits = leading_digits(ax, n)?;
    bits.push(0);
    bits.extend(core::iter::repeat_n(1, n));
    bits.push(0);
    bits.extend(leading_digits(bx, n)?);
    let word = BranchWord::new(bits)?;
    Ok(WitnessPlan {
        a: *a,
        b: *b,
        n,
        x_r: DyadicX::from_digits(word.bits()),
        word,
        threshold: 2 * n + 2,
        cover_time: horizontal_cover_time(a),
        y_r: ay,
    })
}

/// `|x_r - x_A| < 2^{-N}` and `|Π_x f^N(x_r) - 1/2| < 2^{-N}`, exactly.
pub fn plan_is_sound(plan: &WitnessPlan) -> bool {
    let eps = DyadicX::from_fraction(1, plan.n as u32).expect("N <= 64");
    let xa = DyadicX::from_f64(plan.a.center().0, 1100).expect("center in [0, 1)");
    let near_a = plan.x_r.circle_distance(&xa) < eps;
    let half = DyadicX::from_fraction(1, 1).expect("1/2");
    let shifted = plan.x_r.shifted(plan.n as u32);
    near_a && shifted.circle_distance(&half) < eps
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessHit {
    pub n: usize,
    /// A grid point of `A` whose `n`-th image lies in `B`.
    pub from: (f64, f64),
    pub to: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessReport {
    pub hits: Vec<WitnessHit>,
    /// Grid points per axis used by the final pass.
    pub grid: usize,
}

/// Extra random bits below the grid resolution keep long orbits regular.
const TAIL_BITS: u32 = 64;

/// Refinement factor per axis after a miss, and the number of refinements.
pub const GRID_REFINEMENT: usize = 4;
pub const MAX_REFINEMENTS: usize = 2;

fn scan_rows<R: BatchRunner>(
    plan: &WitnessPlan,
    params: &MapParams,
    times: &[usize],
    grid: usize,
    runner: &R,
    jobs: usize,
) -> Vec<Option<WitnessHit>> {
    let horizon = *times.last().unwrap_or(&0);
    let bits = horizon as u32 + TAIL_BITS;
    let a = &plan.a;
    let target = RectTest::new(&plan.b);
    let parts = runner.run(jobs, |w| {
        let mut found: Vec<Option<WitnessHit>> = vec![None; times.len()];
        let mut rng = worker_rng(grid as u64, w);
        for i in (w..grid).step_by(jobs) {
            // Cell centers are short dyadics that the doubling map sends to 0
            // within a few steps, so each point is jittered inside its cell.
            let x0 = a.x_lo + a.width() * (i as f64 + unit_f64(&mut rng)) / grid as f64;
            let Ok(x) = DyadicX::from_f64_with_tail(x0, bits, &mut rng) else { continue };
            for j in 0..grid {
                if found.iter().all(Option::is_some) {
                    return found;
                }
                let y0 = a.y_lo + a.height() * (j as f64 + unit_f64(&mut rng)) / grid as f64;
                let mut p = TorusPoint::new(x.clone(), y0);
                let mut next = 0;
                for t in 1..=horizon {
                    if p.step_in_place(params).is_err() {
                        break;
                    }
                    if t == times[next] {
                        if found[next].is_none() && target.contains(&p) {
                            found[next] = Some(WitnessHit { n: t, from: (x0, y0), to: (p.x.to_f64(), p.y) });
                        }
                        next += 1;
                    }
                }
            }
        }
        found
    });
    // Lowest job index wins so the report does not depend on scheduling.
    let mut merged = vec![None; times.len()];
    for part in parts {
        for (m, f) in merged.iter_mut().zip(part) {
            if m.is_none() {
                *m = f;
            }
        }
    }
    merged
}

/// Confirms `f^n(A) ∩ B ≠ ∅` at every check time by iterating one jittered
/// point per cell of a `grid × grid` partition of `A` exactly, refining the
/// partition on a miss.
pub fn verify_witness<R: BatchRunner>(
    plan: &WitnessPlan,
    params: &MapParams,
    grid: usize,
    k_max: usize,
    runner: &R,
    jobs: usize,
) -> Result<WitnessReport> {
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be positive"));
    }
    let times = plan.check_times(k_max);
    let mut g = grid;
    for round in 0..=MAX_REFINEMENTS {
        let found = scan_rows(plan, params, &times, g, runner, jobs.max(1));
        if let Some(miss) = found.iter().position(Option::is_none) {
            if round == MAX_REFINEMENTS {
                return Err(Error::WitnessFailed { n: times[miss] });
            }
            g *= GRID_REFINEMENT;
            continue;
        }
        return Ok(WitnessReport { hits: found.into_iter().flatten().collect(), grid: g });
    }
    unreachable!("the last refinement round returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Sequential;

    #[test]
    fn cover_times() {
        let r = |w: f64| Rectangle::new(0.0, w, 0.0, 1.0).unwrap();
        assert_eq!(horizontal_cover_time(&r(1.0)), 0);
        assert_eq!(horizontal_cover_time(&r(0.125)), 3);
        assert_eq!(horizontal_cover_time(&r(0.3)), 2);
    }

    #[test]
    fn quarter_plan() {
        let a = Rectangle::centered(0.25, 0.5, 0.125, 0.125).unwrap();
        let plan = build_witness(&a, &a).unwrap();
        assert_eq!(plan.n, 4);
        assert_eq!(alloc::format!("{}", plan.word), "01000111100100");
        assert_eq!(plan.threshold, 10);
        assert!(plan_is_sound(&plan));
    }

    #[test]
    fn plan_near_half() {
        let x = 0.5 - libm::ldexp(1.0, -20);
        let d = libm::ldexp(1.0, -20);
        let a = Rectangle::centered(x, 0.5, d, d).unwrap();
        let plan = build_witness(&a, &a).unwrap();
        assert_eq!(plan.n, 21);
        assert_eq!(plan.word.len(), 65);
        assert_eq!(plan.word.bits()[..21], plan.word.bits()[44..]);
        assert!(plan_is_sound(&plan));
    }

    #[test]
    fn quarter_plan_verifies() {
        // Unjittered cell centers collapse onto x = 0 and miss this case.
        let a = Rectangle::centered(0.25, 0.5, 0.125, 0.125).unwrap();
        let plan = build_witness(&a, &a).unwrap();
        let rep = verify_witness(&plan, &MapParams::new(0.25).unwrap(), 64, 6, &Sequential, 1).unwrap();
        assert_eq!(rep.hits.iter().map(|h| h.n).collect::<Vec<_>>(), plan.check_times(6));
        for h in &rep.hits {
            assert!(a.contains(h.from.0, h.from.1) && a.contains(h.to.0, h.to.1));
        }
    }

    #[test]
    fn full_square_is_trivially_mixed() {
        let full = Rectangle::full();
        let plan = build_witness(&full, &full).unwrap();
        let rep = verify_witness(&plan, &MapParams::new(0.3).unwrap(), 8, 3, &Sequential, 1).unwrap();
        assert_eq!(rep.grid, 8);
        assert_eq!(rep.hits.len(), plan.check_times(3).len());
    }
}
