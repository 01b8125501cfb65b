//! Preimage curves of horizontal segments and their geometry.
//!
//! Pulling the horizontal circle `y = y0` back along a word `b = b1...bN`
//! gives the graph of
//!
//! ```text
//! y_b(x) = y0 - Σ_{j=1}^{N} c (2 b_j - 1) / (2^{j-1} (x - a_j))      (mod 1)
//! a_j    = 0.b1...b_{j-1} + 2^{-j}
//! ```
//!
//! over the dyadic interval `[0.b1...bN, 0.b1...bN + 2^{-N})`. Every formula
//! here is evaluated in the lift (real-valued `y`) and reduced mod 1 only on
//! output.

use alloc::vec::Vec;

use crate::dyadic::DyadicX;
use crate::error::{Error, Result};
use crate::map::{wrap_unit, MapParams, TorusPoint};
use crate::measure::Rectangle;
use crate::quad::{integrate, QuadConfig};
use crate::root::bisect_signed;
use crate::word::BranchWord;

/// Longest word whose asymptotes are exactly representable as `f64`.
pub const MAX_FLOAT_WORD: usize = 52;

/// Absolute tolerance of the critical-point bisection.
pub const CRITICAL_POINT_TOL: f64 = 1e-12;

/// A horizontal segment `[x_lo, x_hi] × {y}` of the torus.
///
/// Endpoints are `f64`, hence exact dyadics; `x_hi = 1` is allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HSegment {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y: f64,
}

impl HSegment {
    pub fn new(x_lo: f64, x_hi: f64, y: f64) -> Result<Self> {
        if !(0.0 <= x_lo && x_lo < x_hi && x_hi <= 1.0) || !y.is_finite() {
            return Err(Error::InvalidParameter("segment needs 0 <= x_lo < x_hi <= 1"));
        }
        Ok(HSegment { x_lo, x_hi, y: wrap_unit(y) })
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Asymptote {
    /// Position `j` in the word, 1-based.
    pub index: usize,
    pub position: DyadicX,
    /// `2 b_j - 1`: the sign of the `j`-th term of `y_b'`.
    pub sign: i8,
}

/// The `N` vertical asymptotes of the lifted curve, in word order.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoteSet {
    pub entries: Vec<Asymptote>,
    domain_lo: DyadicX,
    domain_hi: DyadicX,
}

impl AsymptoteSet {
    /// The asymptotes lying in the closed branch domain. They sit on its
    /// endpoints, so there are at most two.
    pub fn in_domain(&self) -> Vec<&Asymptote> {
        self.entries.iter().filter(|a| a.position >= self.domain_lo && a.position <= self.domain_hi).collect()
    }

    /// `max(positive positions) < min(negative positions)` when both exist.
    pub fn signs_separated(&self) -> bool {
        let max_pos = self.entries.iter().filter(|a| a.sign > 0).map(|a| &a.position).max();
        let min_neg = self.entries.iter().filter(|a| a.sign < 0).map(|a| &a.position).min();
        match (max_pos, min_neg) {
            (Some(p), Some(n)) => p < n,
            _ => true,
        }
    }

    /// Gap between the closest asymptotes of opposite sign.
    pub fn sign_gap(&self) -> Option<DyadicX> {
        let max_pos = self.entries.iter().filter(|a| a.sign > 0).map(|a| &a.position).max()?;
        let min_neg = self.entries.iter().filter(|a| a.sign < 0).map(|a| &a.position).min()?;
        Some(min_neg.sub_mod1(max_pos))
    }
}

/// `a_j = 0.b1...b_{j-1} + 2^{-j}` with sign `2 b_j - 1`, for `j = 1..=N`.
pub fn asymptotes(word: &BranchWord) -> AsymptoteSet {
    let n = word.len();
    let entries = (1..=n)
        .map(|j| {
            let mut digits = word.bits()[..j - 1].to_vec();
            digits.push(1);
            Asymptote {
                index: j,
                position: DyadicX::from_digits(&digits),
                sign: if word.digit(j) == 1 { 1 } else { -1 },
            }
        })
        .collect();
    let domain_lo = word.prefix_value(n);
    let domain_hi = domain_lo.add_mod1(&DyadicX::from_fraction(1, n as u32).unwrap_or_else(|_| DyadicX::zero(1)));
    AsymptoteSet { entries, domain_lo, domain_hi }
}

/// The preimage under `Z_b` of the horizontal circle through `anchor`,
/// as a graph over the branch domain.
#[derive(Clone, Debug)]
pub struct BranchCurve {
    word: BranchWord,
    anchor: TorusPoint,
    c: f64,
    lo: f64,
    width: f64,
    // (a_j, c (2 b_j - 1) / 2^{j-1})
    terms: Vec<(f64, f64)>,
}

impl BranchCurve {
    pub fn new(word: BranchWord, anchor: TorusPoint, params: &MapParams) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::InvalidWord("branch curves need a nonempty word"));
        }
        if word.len() > MAX_FLOAT_WORD {
            return Err(Error::InvalidWord("word too long for floating evaluation"));
        }
        let c = params.c();
        let terms = asymptotes(&word)
            .entries
            .iter()
            .map(|a| (a.position.to_f64(), c * a.sign as f64 / libm::ldexp(1.0, a.index as i32 - 1)))
            .collect();
        let lo = word.prefix_value(word.len()).to_f64();
        let width = libm::ldexp(1.0, -(word.len() as i32));
        Ok(BranchCurve { word, anchor, c, lo, width, terms })
    }

    pub fn word(&self) -> &BranchWord {
        &self.word
    }

    pub fn anchor(&self) -> &TorusPoint {
        &self.anchor
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `(lo, hi)` of the branch domain.
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.lo + self.width)
    }

    /// The same curve through another fiber height.
    pub fn with_anchor_y(&self, y: f64) -> Self {
        let mut out = self.clone();
        out.anchor.y = wrap_unit(y);
        out
    }

    fn check(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(x > lo && x < hi) {
            return Err(Error::OutsideDomain { x });
        }
        if self.terms.iter().any(|&(a, _)| a == x) {
            return Err(Error::AtAsymptote { x });
        }
        Ok(())
    }

    fn lift_unchecked(&self, x: f64) -> f64 {
        self.anchor.y - self.terms.iter().map(|&(a, k)| k / (x - a)).sum::<f64>()
    }

    fn derivative_unchecked(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, k)| k / ((x - a) * (x - a))).sum()
    }

    /// `y_b(x)` in the lift.
    pub fn eval_lift(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let y = self.lift_unchecked(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::AtAsymptote { x })
        }
    }

    /// `y_b(x)` on the torus.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_lift(x).map(wrap_unit)
    }

    /// `y_b'(x) = Σ c (2 b_j - 1) / (2^{j-1} (x - a_j)^2)`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let d = self.derivative_unchecked(x);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::AtAsymptote { x })
        }
    }

    /// Lift evaluated at `anchor + sigma * t` for an asymptote `anchor` of the
    /// curve; the differences `anchor - a_j` are exact so tiny offsets keep
    /// full relative precision.
    fn lift_at_offset(&self, anchor: f64, sigma: f64, t: f64, y0: f64) -> f64 {
        y0 - self.terms.iter().map(|&(a, k)| k / ((anchor - a) + sigma * t)).sum::<f64>()
    }

    /// `samples` interior points `(x, y_lift, y_mod1)` evenly spread over the domain.
    pub fn polyline(&self, samples: usize) -> Vec<(f64, f64, f64)> {
        let (lo, _) = self.domain();
        (0..samples)
            .filter_map(|k| {
                let x = lo + self.width * (k as f64 + 0.5) / samples as f64;
                self.eval_lift(x).ok().map(|y| (x, y, wrap_unit(y)))
            })
            .collect()
    }

    /// Arc length of the graph over `[xa, xb]` (inside the domain).
    pub fn arc_length(&self, xa: f64, xb: f64, cfg: &QuadConfig) -> Result<f64> {
        integrate(|x| libm::hypot(1.0, self.derivative_unchecked(x)), xa, xb, cfg)
    }
}

/// Outcome of the critical-point search.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPointReport {
    pub exists: bool,
    pub location: Option<f64>,
    /// Bracket between the closest opposite-sign asymptotes, which is the
    /// branch domain itself.
    pub bracket: (DyadicX, DyadicX),
    /// Last position `j` with `b_j != b_N`, when there is one.
    pub digit_index: Option<usize>,
}

/// The unique zero of `y_b'`, found by bisection between the two in-domain
/// asymptotes (positive sign on the left, negative on the right). Constant
/// words have no zero.
pub fn critical_point(curve: &BranchCurve) -> Result<CriticalPointReport> {
    let word = curve.word();
    let n = word.len();
    let lo = word.prefix_value(n);
    let hi = lo.add_mod1(&DyadicX::from_fraction(1, n as u32)?);
    let last = word.digit(n);
    let digit_index = (1..n).rev().find(|&j| word.digit(j) != last);
    if digit_index.is_none() {
        return Ok(CriticalPointReport { exists: false, location: None, bracket: (lo, hi), digit_index });
    }
    let (a, b) = curve.domain();
    let root = bisect_signed(|x| curve.derivative_unchecked(x), a, b, true, CRITICAL_POINT_TOL)?;
    Ok(CriticalPointReport { exists: true, location: Some(root), bracket: (lo, hi), digit_index })
}

/// Sign changes of `y_b'` over `samples` evenly spaced interior points.
pub fn derivative_sign_changes(curve: &BranchCurve, samples: usize) -> usize {
    let (lo, hi) = curve.domain();
    let mut changes = 0;
    let mut prev: Option<bool> = None;
    for k in 0..samples {
        let x = lo + (hi - lo) * (k as f64 + 0.5) / samples as f64;
        let d = curve.derivative_unchecked(x);
        if d == 0.0 || !d.is_finite() {
            continue;
        }
        let positive = d > 0.0;
        if prev.is_some_and(|p| p != positive) {
            changes += 1;
        }
        prev = Some(positive);
    }
    changes
}

/// Coefficient `k_n` of the stage lower bound `k_n c Δx` on `ℓ(Z_b(I))`
/// for `|b| = n`: 2, 3, then `3 + (1 - 2^{-(n-2)})`.
pub fn stage_bound_coefficient(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 3.0,
        _ => 4.0 - libm::ldexp(1.0, 2 - n as i32),
    }
}

/// The word length from which the expansion estimate is exercised against
/// the full `4cΔx` bound.
///
/// For `c > 1/4` this is the first `n` at which the stage bound certifies
/// horizontal expansion, `k_n c > 1`. For `c <= 1/4` the stage bounds never
/// do, and the first inductive stage `n = 3` is used.
pub fn expansion_threshold(c: f64) -> usize {
    if c <= MapParams::MIXING_THRESHOLD {
        return 3;
    }
    (1..).find(|&n| stage_bound_coefficient(n) * c > 1.0).unwrap_or(3)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    pub word_length: usize,
    pub measured_length: f64,
    /// `k_n c Δx`.
    pub lower_bound: f64,
    pub threshold_length: usize,
}

impl ExpansionReport {
    pub fn bound_holds(&self) -> bool {
        self.measured_length >= self.lower_bound
    }
}

/// Checks that no endpoint of `seg` is pulled onto an asymptote.
fn image_interval(seg: &HSegment, curve: &BranchCurve) -> Result<(f64, f64)> {
    let (lo, hi) = curve.domain();
    let scale = curve.width;
    let xa = lo + seg.x_lo * scale;
    let xb = lo + seg.x_hi * scale;
    for &(a, _) in &curve.terms {
        if a == xa || a == xb {
            let j = curve.terms.iter().position(|&(p, _)| p == a).unwrap_or(0) + 1;
            return Err(Error::SingularPreimage { index: j });
        }
    }
    debug_assert!(xa >= lo && xb <= hi);
    Ok((xa, xb))
}

/// `ℓ(Z_b(seg))` by adaptive quadrature of `sqrt(1 + y_b'^2)`.
pub fn preimage_segment_length(seg: &HSegment, word: &BranchWord, params: &MapParams) -> Result<ExpansionReport> {
    preimage_segment_length_with(seg, word, params, &QuadConfig::default())
}

pub fn preimage_segment_length_with(
    seg: &HSegment,
    word: &BranchWord,
    params: &MapParams,
    cfg: &QuadConfig,
) -> Result<ExpansionReport> {
    let anchor = TorusPoint::new(DyadicX::zero(1), seg.y);
    let curve = BranchCurve::new(word.clone(), anchor, params)?;
    let (xa, xb) = image_interval(seg, &curve)?;
    // Split at the critical point, where the integrand has its kink-like minimum.
    let mut cuts = alloc::vec![xa];
    if let Some(x) = critical_point(&curve)?.location {
        if x > xa && x < xb {
            cuts.push(x);
        }
    }
    cuts.push(xb);
    let mut length = 0.0;
    for w in cuts.windows(2) {
        length += curve.arc_length(w[0], w[1], cfg)?;
    }
    Ok(ExpansionReport {
        word_length: word.len(),
        measured_length: length,
        lower_bound: stage_bound_coefficient(word.len()) * params.c() * seg.width(),
        threshold_length: expansion_threshold(params.c()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthReport {
    pub length: f64,
    /// `((4c + 1) δ / (ε² - δ²))^{|b|}`.
    pub bound: f64,
    /// `δ ((4c + 1) / (ε² - δ²))^{|b|}`: the one-step length ratio compounded
    /// over the word, applied to the starting length bound `δ`.
    pub ratio_bound: f64,
}

impl GrowthReport {
    pub fn holds(&self) -> bool {
        self.length <= self.bound
    }

    pub fn ratio_bound_holds(&self) -> bool {
        self.length <= self.ratio_bound
    }
}

/// Pull-back length of a segment whose successive pull-backs (and the
/// segment itself) avoid the strip `[1/2 - ε/2, 1/2 + ε/2]`, against the
/// per-step bound `(4c+1)δ/(ε²-δ²)` raised to the word length.
pub fn bounded_growth_check(
    seg: &HSegment,
    word: &BranchWord,
    eps: f64,
    delta: f64,
    params: &MapParams,
) -> Result<GrowthReport> {
    if !(seg.width() < delta && delta < eps && eps < 1.0) {
        return Err(Error::InvalidParameter("bounded growth needs Δx < δ < ε < 1"));
    }
    let n = word.len();
    let (s_lo, s_hi) = (0.5 - eps / 2.0, 0.5 + eps / 2.0);
    // Stage s is Z_{b_{N-s+1}...b_N}(seg): the segment's range behind the
    // digits b_{N-s+1}...b_N. Stage 0 is the segment, stage N the full
    // pull-back; all of them are forward images of the pull-back.
    for s in 0..=n {
        let suffix = &word.bits()[n - s..];
        let offset = DyadicX::from_digits(suffix).to_f64();
        let scale = libm::ldexp(1.0, -(s as i32));
        let (a, b) = (offset + seg.x_lo * scale, offset + seg.x_hi * scale);
        if a <= s_hi && b >= s_lo {
            return Err(Error::StripViolation { step: s });
        }
    }
    let length = preimage_segment_length(seg, word, params)?.measured_length;
    let ratio = (4.0 * params.c() + 1.0) / (eps * eps - delta * delta);
    Ok(GrowthReport {
        length,
        bound: libm::pow(ratio * delta, n as f64),
        ratio_bound: delta * libm::pow(ratio, n as f64),
    })
}

/// Total variation of `Π_y f` along an arc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VerticalSpan {
    Finite(f64),
    /// The arc meets a singular line `x = k + 1/2` of the lift.
    Infinite,
}

impl VerticalSpan {
    /// A span above 2 forces the projection mod 1 to cover `[0, 1)`.
    pub fn covers_circle(&self) -> bool {
        match self {
            VerticalSpan::Finite(v) => *v > 2.0,
            VerticalSpan::Infinite => true,
        }
    }
}

fn monotone(values: impl Iterator<Item = f64> + Clone) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1])
}

/// Vertical projection of `f(arc)` for a polyline `arc` given in the lift
/// `R^2`, monotone in both coordinates.
pub fn vertical_projection_span(arc: &[(f64, f64)], params: &MapParams) -> Result<VerticalSpan> {
    if arc.len() < 2 || arc.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParameter("arc needs at least two finite vertices"));
    }
    if !monotone(arc.iter().map(|p| p.0)) || !monotone(arc.iter().map(|p| p.1)) {
        return Err(Error::NonMonotoneArc);
    }
    let c = params.c();
    // Fiber displacement at a lift abscissa: c / |x mod 1 - 1/2|.
    let kick = |x: f64| c / (x - libm::floor(x) - 0.5).abs();
    let mut total = 0.0;
    for w in arc.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        // A half-integer in [lo, hi] is a singular line.
        if libm::floor(hi - 0.5) >= libm::ceil(lo - 0.5) {
            return Ok(VerticalSpan::Infinite);
        }
        // Cut at integers, where the kick has its minimum; on each piece the
        // kick is monotone and g = y + kick has at most one turning point.
        let mut cuts = alloc::vec![0.0];
        let (kx0, kx1) = (libm::ceil(lo), libm::floor(hi));
        let mut k = kx0;
        while k <= kx1 {
            if k > lo && k < hi && x1 != x0 {
                cuts.push((k - x0) / (x1 - x0));
            }
            k += 1.0;
        }
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let g = |t: f64| y0 + t * (y1 - y0) + kick(x0 + t * (x1 - x0));
        for piece in cuts.windows(2) {
            let (ta, tb) = (piece[0], piece[1]);
            let h = 1e-9 * (tb - ta);
            let slope = |t: f64| g(t + h) - g(t - h);
            let (sa, sb) = (slope(ta + 2.0 * h), slope(tb - 2.0 * h));
            if (sa > 0.0) != (sb > 0.0) && sa != 0.0 && sb != 0.0 {
                let tm = bisect_signed(slope, ta + 2.0 * h, tb - 2.0 * h, sa > 0.0, 1e-15)?;
                total += (g(tm) - g(ta)).abs() + (g(tb) - g(tm)).abs();
            } else {
                total += (g(tb) - g(ta)).abs();
            }
        }
    }
    Ok(VerticalSpan::Finite(total))
}

/// Horizontal distance between the pull-backs of a rectangle's top and
/// bottom sides within one wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripWidth {
    /// Wrap index `n`: the piece of the lifted curve covering `[-n, -n + 1]`.
    pub wrap: usize,
    /// Rank of the piece among the complete wraps, starting at 1.
    pub component: usize,
    pub width: f64,
}

/// Strip widths for the wraps `1..=n_max` that the pull-backs complete.
///
/// The distance is taken at height `-n + 1/2`. Only the branch approaching
/// the in-domain asymptote `a_N` dives through every wrap, and it does so
/// only when the rectangle reaches the singular end of the circle (`x = 0`
/// for `b_N = 1`, `x = 1` for `b_N = 0`). Shallow wraps are missing when the
/// whole curve lies below them.
pub fn strip_width_profile(
    rect: &Rectangle,
    word: &BranchWord,
    params: &MapParams,
    n_max: usize,
) -> Result<Vec<StripWidth>> {
    let bottom = BranchCurve::new(word.clone(), TorusPoint::new(DyadicX::zero(1), 0.0), params)?;
    let n = word.len();
    let last = word.digit(n);
    let (lo, hi) = bottom.domain();
    let scale = bottom.width;
    // Offset t from the asymptote along the side the rectangle occupies.
    let (anchor, sigma, t_near, t_far) = if last == 1 {
        (lo, 1.0, rect.x_lo * scale, rect.x_hi * scale)
    } else {
        (hi, -1.0, (1.0 - rect.x_hi) * scale, (1.0 - rect.x_lo) * scale)
    };
    // The lifted curve increases away from the asymptote until the critical point.
    let t_end = match critical_point(&bottom)?.location {
        Some(xc) => t_far.min((xc - anchor).abs()),
        None => t_far,
    };
    let y_bot = rect.y_lo;
    let dy = rect.y_hi - rect.y_lo;
    let curve_at = |t: f64| bottom.lift_at_offset(anchor, sigma, t, y_bot);
    let t_start = if t_near > 0.0 { t_near } else { f64::MIN_POSITIVE };
    let (y_start, y_end) = (curve_at(t_start), curve_at(t_end));
    let solve = |level: f64| -> Option<f64> {
        if !(y_start < level && level < y_end) {
            return None;
        }
        bisect_signed(|t| curve_at(t) - level, t_start, t_end, false, 0.0).ok()
    };
    let mut out: Vec<StripWidth> = Vec::new();
    for wrap in 1..=n_max {
        let level = -(wrap as f64) + 0.5;
        // The top curve is the bottom one shifted up by Δy.
        if let (Some(t_b), Some(t_t)) = (solve(level), solve(level - dy)) {
            out.push(StripWidth { wrap, component: out.len() + 1, width: (t_b - t_t).abs() });
        } else if !out.is_empty() {
            // Deeper wraps only move closer to the asymptote; a gap after a
            // complete wrap means the rectangle stops short of it.
            break;
        }
    }
    if out.last().map(|w| w.wrap) != Some(n_max) {
        return Err(Error::InsufficientWraps { found: out.len(), needed: n_max });
    }
    Ok(out)
}
