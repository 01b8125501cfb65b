//! Lebesgue invariance, correlations, recurrence and visit fractions.
//!
//! Every Monte-Carlo estimate is split into `workers` independent batches.
//! Batch `w` draws from a ChaCha8 stream seeded by `seed` on stream `w`, and
//! batches are merged by summing integer counts, so a fixed
//! `(seed, workers)` pair gives bit-identical results no matter how the
//! batches are scheduled. [`Sequential`] runs them in order; the lab crate
//! supplies a threaded [`BatchRunner`].

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dyadic::DyadicX;
use crate::error::{Error, Result};
use crate::fit::{fit_decay, DecayFit};
use crate::map::{wrap_unit, MapParams, TorusPoint};
use crate::quad::{integrate, QuadConfig};
use crate::witness::horizontal_cover_time;

/// An axis-parallel rectangle `[x_lo, x_hi) × [y_lo, y_hi)` in the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rectangle {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let ok = |lo: f64, hi: f64| 0.0 <= lo && lo < hi && hi <= 1.0;
        if !(ok(x_lo, x_hi) && ok(y_lo, y_hi)) {
            return Err(Error::DegenerateRectangle);
        }
        Ok(Rectangle { x_lo, x_hi, y_lo, y_hi })
    }

    /// The rectangle with the given center and half-widths.
    pub fn centered(cx: f64, cy: f64, hx: f64, hy: f64) -> Result<Self> {
        Self::new(cx - hx, cx + hx, cy - hy, cy + hy)
    }

    pub fn full() -> Self {
        Rectangle { x_lo: 0.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn measure(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_lo <= x && x < self.x_hi && self.y_lo <= y && y < self.y_hi
    }

    pub fn is_interior(&self) -> bool {
        self.x_lo > 0.0 && self.x_hi < 1.0 && self.y_lo > 0.0 && self.y_hi < 1.0
    }

    pub fn intersection_measure(&self, other: &Rectangle) -> f64 {
        let w = self.x_hi.min(other.x_hi) - self.x_lo.max(other.x_lo);
        let h = self.y_hi.min(other.y_hi) - self.y_lo.max(other.y_lo);
        w.max(0.0) * h.max(0.0)
    }
}

/// Exact membership test for points with a dyadic base coordinate.
#[derive(Clone, Debug)]
pub struct RectTest {
    rect: Rectangle,
    x_lo: DyadicX,
    // `None` when x_hi = 1.
    x_hi: Option<DyadicX>,
}

impl RectTest {
    pub fn new(rect: &Rectangle) -> Self {
        let exact = |x: f64| DyadicX::from_f64(x, 1100).expect("rectangle bound in [0, 1)");
        RectTest { rect: *rect, x_lo: exact(rect.x_lo), x_hi: (rect.x_hi < 1.0).then(|| exact(rect.x_hi)) }
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        if !(self.rect.y_lo <= p.y && p.y < self.rect.y_hi) {
            return false;
        }
        // Cheap rejection on the float image before the exact comparison.
        let xf = p.x.to_f64();
        if xf < self.rect.x_lo - 1e-9 || xf > self.rect.x_hi + 1e-9 {
            return false;
        }
        p.x >= self.x_lo && self.x_hi.as_ref().is_none_or(|hi| p.x < *hi)
    }
}

/// Executes independent jobs `0..jobs` and returns their results in job order.
pub trait BatchRunner {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..jobs).map(job).collect()
    }
}

/// Sampling budget and seeding shared by the Monte-Carlo estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub precision_bits: u32,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        McConfig { samples, seed, workers: 1, precision_bits: crate::DEFAULT_PRECISION_BITS }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }

    /// Samples assigned to batch `w`; the first `samples % workers` batches take one extra.
    pub fn batch_size(&self, w: usize) -> u64 {
        let k = self.workers.max(1) as u64;
        self.samples / k + u64::from((w as u64) < self.samples % k)
    }

    fn require_precision(&self, steps: usize) -> Result<()> {
        let needed = steps + 64;
        if (self.precision_bits as usize) < needed {
            return Err(Error::PrecisionExhausted { needed, available: self.precision_bits as usize });
        }
        Ok(())
    }
}

/// The random stream of batch `worker`.
pub fn worker_rng(seed: u64, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A point uniform in `rect`, with a random dyadic tail below the 64th bit.
pub fn sample_in<R: RngCore + ?Sized>(rect: &Rectangle, bits: u32, rng: &mut R) -> TorusPoint {
    loop {
        let x = rect.x_lo + unit_f64(rng) * rect.width();
        let y = rect.y_lo + unit_f64(rng) * rect.height();
        if x < rect.x_hi && y < rect.y_hi && x < 1.0 {
            let x = DyadicX::from_f64_with_tail(x, bits, rng).expect("x in [0, 1)");
            return TorusPoint::new(x, y);
        }
    }
}

/// A rectangle strictly inside the unit square with both sides uniform in
/// `[0.01, 0.5]` and a uniformly placed lower corner.
pub fn random_rectangle<R: RngCore + ?Sized>(rng: &mut R) -> Rectangle {
    loop {
        let w = 0.01 + 0.49 * unit_f64(rng);
        let h = 0.01 + 0.49 * unit_f64(rng);
        let x = (1.0 - w) * unit_f64(rng);
        let y = (1.0 - h) * unit_f64(rng);
        if let Ok(r) = Rectangle::new(x, x + w, y, y + h) {
            if r.is_interior() {
                return r;
            }
        }
    }
}

/// Fiber shift `2c/(1-x)` for branch 0 or `2c/x` for branch 1 at a base
/// point `x` of the image.
fn branch_kick(bit: u8, x: f64, c: f64) -> f64 {
    if bit == 0 {
        2.0 * c / (1.0 - x)
    } else {
        2.0 * c / x
    }
}

fn check_branch(rect: &Rectangle, bit: u8) -> Result<()> {
    if bit > 1 {
        return Err(Error::InvalidParameter("branch digit must be 0 or 1"));
    }
    if !rect.is_interior() {
        return Err(Error::InvalidParameter("rectangle must lie strictly inside the unit square"));
    }
    Ok(())
}

/// Area of `A_bit`, the part of `f^{-1}(rect)` over the half `x ∈ [bit/2, (bit+1)/2)`.
///
/// `A_bit` is bounded by two vertical lines and the broken hyperbolas
/// `y_lo - kick` and `y_hi - kick` (mod 1). The area is the integral over the
/// strip of the wrapped distance between them.
pub fn preimage_region_area(rect: &Rectangle, bit: u8, params: &MapParams) -> Result<f64> {
    check_branch(rect, bit)?;
    let c = params.c();
    let (a, b) = ((rect.x_lo + bit as f64) / 2.0, (rect.x_hi + bit as f64) / 2.0);
    let band = |xp: f64| {
        let x = 2.0 * xp - bit as f64;
        let k = branch_kick(bit, x, c);
        let (bot, top) = (rect.y_lo - k, rect.y_hi - k);
        // The two hyperbolas are parallel in the lift; a band of height at
        // most one wraps onto a fiber arc of the same length.
        (top - bot).clamp(0.0, 1.0)
    };
    integrate(band, a, b, &QuadConfig::default())
}

/// Monte-Carlo estimate of the same area: the fraction of uniform points of
/// the strip whose fiber coordinate falls between the two hyperbolas mod 1.
pub fn preimage_region_area_mc<R: RngCore + ?Sized>(
    rect: &Rectangle,
    bit: u8,
    params: &MapParams,
    samples: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_branch(rect, bit)?;
    let c = params.c();
    let strip = rect.width() / 2.0;
    let mut hits = 0u64;
    for _ in 0..samples {
        let x = rect.x_lo + unit_f64(rng) * rect.width();
        let y = unit_f64(rng);
        let bot = rect.y_lo - branch_kick(bit, x, c);
        if wrap_unit(y - bot) < rect.height() {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok((strip * p, strip * libm::sqrt(p * (1.0 - p) / samples as f64)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceEntry {
    pub rect: Rectangle,
    /// `area(A_0) + area(A_1)`.
    pub analytic_area: f64,
    pub analytic_residual: f64,
    /// Fraction of uniform torus points `p` with `f(p) ∈ rect`.
    pub hit_fraction: f64,
    pub stderr: f64,
    pub resampled: u64,
}

impl InvarianceEntry {
    pub fn within_3_sigma(&self) -> bool {
        (self.hit_fraction - self.rect.measure()).abs() <= 3.0 * self.stderr
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub entries: Vec<InvarianceEntry>,
}

impl InvarianceReport {
    pub fn max_analytic_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.analytic_residual).fold(0.0, f64::max)
    }

    pub fn statistical_passes(&self) -> usize {
        self.entries.iter().filter(|e| e.within_3_sigma()).count()
    }
}

pub const MIN_INVARIANCE_SAMPLES: u64 = 10_000;

/// Push-forward hit count of one batch. Singular samples (`x = 1/2`) are redrawn.
fn pushforward_batch(test: &RectTest, params: &MapParams, samples: u64, rng: &mut ChaCha8Rng) -> (u64, u64) {
    let (mut hits, mut resampled) = (0, 0);
    for _ in 0..samples {
        let mut p = loop {
            let x = DyadicX::from_f64_with_tail(unit_f64(rng), 128, rng).expect("unit sample");
            let p = TorusPoint::new(x, unit_f64(rng));
            if !p.is_singular() {
                break p;
            }
            resampled += 1;
        };
        p.step_in_place(params).expect("regular sample");
        if test.contains(&p) {
            hits += 1;
        }
    }
    (hits, resampled)
}

/// Checks Lebesgue invariance for each rectangle, analytically through the
/// two preimage areas and statistically through the push-forward of the
/// uniform measure. Rectangle `i` uses seed `mc.seed + i`.
pub fn verify_invariance<B: BatchRunner>(
    rects: &[Rectangle],
    params: &MapParams,
    mc: &McConfig,
    runner: &B,
) -> Result<InvarianceReport> {
    if mc.samples < MIN_INVARIANCE_SAMPLES {
        return Err(Error::InvalidParameter("invariance needs at least 10^4 samples"));
    }
    let mut entries = Vec::with_capacity(rects.len());
    for (i, rect) in rects.iter().enumerate() {
        let analytic_area = preimage_region_area(rect, 0, params)? + preimage_region_area(rect, 1, params)?;
        let test = RectTest::new(rect);
        let seed = mc.seed.wrapping_add(i as u64);
        let parts =
            runner.run(mc.workers, |w| pushforward_batch(&test, params, mc.batch_size(w), &mut worker_rng(seed, w)));
        let (hits, resampled) = parts.iter().fold((0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let p = hits as f64 / mc.samples as f64;
        entries.push(InvarianceEntry {
            rect: *rect,
            analytic_area,
            analytic_residual: (analytic_area - rect.measure()).abs(),
            hit_fraction: p,
            stderr: libm::sqrt(p * (1.0 - p) / mc.samples as f64)
                .max(libm::sqrt(rect.measure() * (1.0 - rect.measure()) / mc.samples as f64)),
            resampled,
        });
    }
    Ok(InvarianceReport { entries })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEntry {
    pub n: usize,
    /// Estimate of `m(f^{-n}A ∩ B)`.
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub params: MapParams,
    pub a: Rectangle,
    pub b: Rectangle,
    pub entries: Vec<CorrelationEntry>,
    /// Samples redrawn because their orbit hit the singular line.
    pub resampled: u64,
}

impl CorrelationSeries {
    /// `m(f^{-n}A ∩ B) - m(A) m(B)` per entry.
    pub fn correlations(&self) -> Vec<(usize, f64, f64)> {
        let product = self.a.measure() * self.b.measure();
        self.entries.iter().map(|e| (e.n, e.estimate - product, e.stderr)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct HitCounts {
    hits: Vec<u64>,
    resampled: u64,
}

fn correlation_batch(
    a: &RectTest,
    b: &Rectangle,
    n_max: usize,
    params: &MapParams,
    bits: u32,
    samples: u64,
    rng: &mut ChaCha8Rng,
) -> HitCounts {
    let mut hits = vec![0u64; n_max + 1];
    let mut resampled = 0;
    let mut seen = vec![false; n_max + 1];
    let mut done = 0;
    while done < samples {
        let mut p = sample_in(b, bits, rng);
        let mut singular = false;
        for (n, s) in seen.iter_mut().enumerate() {
            if n > 0 && p.step_in_place(params).is_err() {
                singular = true;
                break;
            }
            *s = a.contains(&p);
        }
        if singular {
            resampled += 1;
            continue;
        }
        for (h, s) in hits.iter_mut().zip(&seen) {
            *h += u64::from(*s);
        }
        done += 1;
    }
    HitCounts { hits, resampled }
}

/// Estimates `m(f^{-n}A ∩ B)` for `n = 0..=n_max` by iterating uniform
/// samples of `B` forward and counting visits to `A`.
pub fn correlation_series<R: BatchRunner>(
    a: &Rectangle,
    b: &Rectangle,
    n_max: usize,
    params: &MapParams,
    mc: &McConfig,
    runner: &R,
) -> Result<CorrelationSeries> {
    mc.require_precision(n_max)?;
    if mc.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive"));
    }
    let test = RectTest::new(a);
    let parts = runner.run(mc.workers, |w| {
        correlation_batch(&test, b, n_max, params, mc.precision_bits, mc.batch_size(w), &mut worker_rng(mc.seed, w))
    });
    let mut total = HitCounts { hits: vec![0; n_max + 1], resampled: 0 };
    for part in &parts {
        for (t, h) in total.hits.iter_mut().zip(&part.hits) {
            *t += h;
        }
        total.resampled += part.resampled;
    }
    let mb = b.measure();
    let s = mc.samples as f64;
    let entries = total
        .hits
        .iter()
        .enumerate()
        .map(|(n, &h)| {
            let p = h as f64 / s;
            CorrelationEntry { n, estimate: mb * p, stderr: mb * libm::sqrt(p * (1.0 - p) / s), samples: mc.samples }
        })
        .collect();
    Ok(CorrelationSeries { params: *params, a: *a, b: *b, entries, resampled: total.resampled })
}

/// Exponential fit of `|m(f^{-n}A ∩ B) - m(A)m(B)|` over `[n_min, n_max]`,
/// keeping only entries above three standard errors.
pub fn fit_exponential_rate(series: &CorrelationSeries, n_min: usize, n_max: usize) -> Result<DecayFit> {
    fit_decay(&series.correlations(), n_min, n_max)
}

/// Block structure `N = N₀ + k₀ h` of the recurrence estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecurrenceParams {
    /// Horizontal cover time of the rectangle (at least 1).
    pub n0: usize,
    pub k0: usize,
    pub h: usize,
    /// Fraction of the remaining mass that returns in each block, taken
    /// from the tightest geometric envelope of the measured fractions.
    pub theta: f64,
}

impl RecurrenceParams {
    /// `N₀` is the number of doublings after which the rectangle's width
    /// covers the circle; one block per doubling with no extra blocks.
    pub fn for_rect(rect: &Rectangle) -> Self {
        RecurrenceParams { n0: horizontal_cover_time(rect).max(1), k0: 1, h: 0, theta: 0.0 }
    }

    pub fn block_length(&self) -> usize {
        self.n0 + self.k0 * self.h
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockFraction {
    pub k: usize,
    /// Fraction of samples of `A` that have not visited the target at any
    /// time `1..=k N`.
    pub fraction: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceReport {
    pub params: RecurrenceParams,
    pub entries: Vec<BlockFraction>,
    pub resampled: u64,
}

impl RecurrenceReport {
    /// The largest `θ` with `fraction(k) + 3 stderr <= (1 - θ)^k` for every
    /// block `k >= 1`: the tightest geometric envelope, made conservative by
    /// the sampling error. Non-positive when no envelope exists.
    pub fn envelope_theta(&self) -> f64 {
        let worst = self
            .entries
            .iter()
            .filter(|e| e.k > 0)
            .map(|e| libm::pow((e.fraction + 3.0 * e.stderr).min(1.0), 1.0 / e.k as f64))
            .fold(0.0, f64::max);
        1.0 - worst
    }

    /// Per-block survival ratio from a least-squares fit of `ln fraction(k)`
    /// against `k` through the origin; a diagnostic next to the envelope.
    pub fn geometric_rate(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .entries
            .iter()
            .filter(|e| e.k > 0 && e.fraction > 0.0)
            .map(|e| (e.k as f64, libm::log(e.fraction)))
            .collect();
        if pts.is_empty() {
            return None;
        }
        let sxy: f64 = pts.iter().map(|(k, l)| k * l).sum();
        let sxx: f64 = pts.iter().map(|(k, _)| k * k).sum();
        Some(libm::exp(sxy / sxx))
    }

    /// `θ̂ ∈ (0, 1)` and `fraction(k) <= (1 - θ̂)^k` for every block.
    pub fn envelope_holds(&self) -> bool {
        let theta = self.params.theta;
        theta > 0.0 && theta < 1.0 && self.entries.iter().all(|e| e.fraction <= libm::pow(1.0 - theta, e.k as f64))
    }
}

#[allow(clippy::too_many_arguments)]
fn visit_batch(
    target: &RectTest,
    source: &Rectangle,
    block: usize,
    blocks: usize,
    params: &MapParams,
    bits: u32,
    samples: u64,
    rng: &mut ChaCha8Rng,
) -> HitCounts {
    // hits[k]: samples still unvisited after k blocks.
    let mut hits = vec![0u64; blocks + 1];
    let mut resampled = 0;
    let mut done = 0;
    let horizon = block * blocks;
    while done < samples {
        let mut p = sample_in(source, bits, rng);
        let mut first_visit = None;
        let mut singular = false;
        for t in 1..=horizon {
            if p.step_in_place(params).is_err() {
                singular = true;
                break;
            }
            if target.contains(&p) {
                first_visit = Some(t);
                break;
            }
        }
        if singular {
            resampled += 1;
            continue;
        }
        for (k, h) in hits.iter_mut().enumerate() {
            if first_visit.is_none_or(|t| t > k * block) {
                *h += 1;
            }
        }
        done += 1;
    }
    HitCounts { hits, resampled }
}

/// Fraction of uniform samples of `a` that have not entered `b` during the
/// first `k` blocks, for `k = 0..=depth_blocks`. The block length comes
/// from `a` as in [`RecurrenceParams::for_rect`].
pub fn visit_fraction<R: BatchRunner>(
    a: &Rectangle,
    b: &Rectangle,
    depth_blocks: usize,
    params: &MapParams,
    mc: &McConfig,
    runner: &R,
) -> Result<RecurrenceReport> {
    let mut rp = RecurrenceParams::for_rect(a);
    let block = rp.block_length();
    mc.require_precision(block * depth_blocks)?;
    if mc.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive"));
    }
    let test = RectTest::new(b);
    let parts = runner.run(mc.workers, |w| {
        visit_batch(
            &test,
            a,
            block,
            depth_blocks,
            params,
            mc.precision_bits,
            mc.batch_size(w),
            &mut worker_rng(mc.seed, w),
        )
    });
    let mut counts = vec![0u64; depth_blocks + 1];
    let mut resampled = 0;
    for part in &parts {
        for (t, h) in counts.iter_mut().zip(&part.hits) {
            *t += h;
        }
        resampled += part.resampled;
    }
    let s = mc.samples as f64;
    let entries: Vec<BlockFraction> = counts
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let f = h as f64 / s;
            BlockFraction { k, fraction: f, stderr: libm::sqrt(f * (1.0 - f) / s) }
        })
        .collect();
    let mut report = RecurrenceReport { params: rp, entries, resampled };
    rp.theta = report.envelope_theta();
    report.params = rp;
    Ok(report)
}

/// [`visit_fraction`] with the target equal to the source: first returns.
pub fn recurrence_fraction<R: BatchRunner>(
    a: &Rectangle,
    depth_blocks: usize,
    params: &MapParams,
    mc: &McConfig,
    runner: &R,
) -> Result<RecurrenceReport> {
    visit_fraction(a, a, depth_blocks, params, mc, runner)
}
