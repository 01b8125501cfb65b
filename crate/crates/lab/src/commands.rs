//! One function per command, each turning a validated config into an artifact.

use serde_json::{json, Value};
use skewtorus_core::fit::fit_power_law;
use skewtorus_core::geometry::{
    asymptotes, critical_point, preimage_segment_length, strip_width_profile, BranchCurve, HSegment,
};
use skewtorus_core::map::{orbit, preimage_word};
use skewtorus_core::measure::{
    correlation_series, fit_exponential_rate, random_rectangle, recurrence_fraction, verify_invariance, visit_fraction,
    worker_rng, McConfig, RecurrenceReport,
};
use skewtorus_core::witness::{build_witness, plan_is_sound, verify_witness};
use skewtorus_core::{BranchWord, MapParams, Rectangle, TorusPoint};

use crate::config::{Command, ExperimentConfig};
use crate::error::LabError;
use crate::output::{num, Artifact};
use crate::runner::Threaded;

/// Largest preimage tree the `preimage` command enumerates.
pub const MAX_TREE_DEPTH: usize = 16;
pub const DEFAULT_CURVE_SAMPLES: usize = 1000;
pub const DEFAULT_INVARIANCE_RECTS: usize = 100;
pub const DEFAULT_CORRELATION_N_MAX: usize = 18;
pub const DEFAULT_RECURRENCE_BLOCKS: usize = 8;
pub const DEFAULT_STRIP_WRAPS: usize = 100;
pub const DEFAULT_WITNESS_GRID: usize = 64;
pub const DEFAULT_WITNESS_K: usize = 6;

/// Stream reserved for drawing the random rectangles of `invariance`.
const RECT_STREAM: usize = usize::MAX;

fn need<T: Clone>(v: &Option<T>, flag: &str, cmd: Command) -> Result<T, LabError> {
    v.clone().ok_or_else(|| LabError::Config(format!("`{}` requires --{flag}", cmd.name())))
}

fn rect_json(r: &Rectangle) -> Value {
    json!([num(r.x_lo), num(r.x_hi), num(r.y_lo), num(r.y_hi)])
}

fn mc(cfg: &ExperimentConfig) -> McConfig {
    McConfig::new(cfg.samples, cfg.seed.expect("validated"))
        .with_workers(cfg.workers)
        .with_precision(cfg.precision_bits)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, LabError> {
    let params = MapParams::new(cfg.c)?;
    match cfg.command {
        Command::Orbit => run_orbit(cfg, &params),
        Command::Preimage => run_preimage(cfg, &params),
        Command::Curve => run_curve(cfg, &params),
        Command::Length => run_length(cfg, &params),
        Command::Invariance => run_invariance(cfg, &params),
        Command::Correlation => run_correlation(cfg, &params),
        Command::Recurrence | Command::Visit => run_recurrence(cfg, &params),
        Command::Witness => run_witness(cfg, &params),
        Command::Stripwidth => run_stripwidth(cfg, &params),
    }
}

fn start_point(cfg: &ExperimentConfig) -> Result<TorusPoint, LabError> {
    let x = need(&cfg.x, "x", cfg.command)?;
    let y = need(&cfg.y, "y", cfg.command)?;
    if !(0.0..1.0).contains(&x) || !y.is_finite() {
        return Err(LabError::Config("--x must lie in [0, 1) and --y must be finite".into()));
    }
    Ok(TorusPoint::from_f64(x, y, cfg.precision_bits)?)
}

fn run_orbit(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let p = start_point(cfg)?;
    let n = need(&cfg.n, "n", cfg.command)?;
    let mut art = Artifact::new(vec!["step", "x", "y"]);
    for (t, q) in orbit(&p, n, params)?.iter().enumerate() {
        art.push(vec![json!(t), num(q.x.to_f64()), num(q.y)]);
    }
    Ok(art)
}

fn run_preimage(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let p = start_point(cfg)?;
    let mut art = Artifact::new(vec!["word", "x", "y"]);
    if let Some(word) = &cfg.word {
        let q = preimage_word(&p, word, params)?;
        art.push(vec![json!(word.to_string()), num(q.x.to_f64()), num(q.y)]);
        return Ok(art.with_summary(json!({ "singular": 0 })));
    }
    let depth = need(&cfg.n, "word or --n", cfg.command)?;
    if depth > MAX_TREE_DEPTH {
        return Err(LabError::Config(format!("--n: preimage trees are limited to depth {MAX_TREE_DEPTH}")));
    }
    let mut singular = 0;
    for word in BranchWord::all_of_length(depth) {
        match preimage_word(&p, &word, params) {
            Ok(q) => art.push(vec![json!(word.to_string()), num(q.x.to_f64()), num(q.y)]),
            Err(skewtorus_core::Error::SingularPreimage { .. }) => {
                singular += 1;
                art.push(vec![json!(word.to_string()), Value::Null, Value::Null]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(art.with_summary(json!({ "singular": singular })))
}

fn run_curve(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let word = need(&cfg.word, "word", cfg.command)?;
    let y = cfg.y.unwrap_or(0.0);
    let anchor = TorusPoint::from_f64(0.0, y, 64)?;
    let curve = BranchCurve::new(word.clone(), anchor, params)?;
    let samples = cfg.grid.unwrap_or(DEFAULT_CURVE_SAMPLES);
    if samples < 2 {
        return Err(LabError::Config("--grid: a polyline needs at least 2 samples".into()));
    }
    let asy = asymptotes(&word);
    let cp = critical_point(&curve)?;
    let mut art = Artifact::new(vec!["x", "y_lift", "y_mod1"]);
    for (x, yl, ym) in curve.polyline(samples) {
        art.push(vec![num(x), num(yl), num(ym)]);
    }
    let (lo, hi) = curve.domain();
    let in_domain: Vec<usize> = asy.in_domain().iter().map(|a| a.index).collect();
    let summary = json!({
        "word": word.to_string(),
        "domain": [num(lo), num(hi)],
        "asymptotes": asy.entries.iter().map(|a| json!({
            "index": a.index,
            "position": num(a.position.to_f64()),
            "sign": a.sign,
            "in_domain": in_domain.contains(&a.index),
        })).collect::<Vec<_>>(),
        "signs_separated": asy.signs_separated(),
        "critical_point": {
            "exists": cp.exists,
            "location": cp.location.map_or(Value::Null, num),
            "bracket": [num(cp.bracket.0.to_f64()), num(cp.bracket.1.to_f64())],
            "digit_index": cp.digit_index,
        },
    });
    Ok(art.with_summary(summary))
}

fn run_length(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let word = need(&cfg.word, "word", cfg.command)?;
    let width = need(&cfg.width, "width", cfg.command)?;
    let x = cfg.x.unwrap_or(0.0);
    let seg = HSegment::new(x, x + width, cfg.y.unwrap_or(0.0))?;
    let rep = preimage_segment_length(&seg, &word, params)?;
    let mut art =
        Artifact::new(vec!["word_length", "measured_length", "lower_bound", "threshold_length", "bound_holds"]);
    art.push(vec![
        json!(rep.word_length),
        num(rep.measured_length),
        num(rep.lower_bound),
        json!(rep.threshold_length),
        json!(rep.bound_holds()),
    ]);
    Ok(art.with_summary(json!({ "word": word.to_string(), "segment": [num(seg.x_lo), num(seg.x_hi), num(seg.y)] })))
}

fn run_invariance(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let count = cfg.n.unwrap_or(DEFAULT_INVARIANCE_RECTS);
    let mut rng = worker_rng(cfg.seed.expect("validated"), RECT_STREAM);
    let rects: Vec<Rectangle> = match cfg.a {
        Some(a) => vec![a],
        None => (0..count).map(|_| random_rectangle(&mut rng)).collect(),
    };
    let rep = verify_invariance(&rects, params, &mc(cfg), &Threaded)?;
    let mut art = Artifact::new(vec![
        "x_lo",
        "x_hi",
        "y_lo",
        "y_hi",
        "measure",
        "analytic_area",
        "analytic_residual",
        "hit_fraction",
        "stderr",
        "within_3_sigma",
    ]);
    for e in &rep.entries {
        art.push(vec![
            num(e.rect.x_lo),
            num(e.rect.x_hi),
            num(e.rect.y_lo),
            num(e.rect.y_hi),
            num(e.rect.measure()),
            num(e.analytic_area),
            num(e.analytic_residual),
            num(e.hit_fraction),
            num(e.stderr),
            json!(e.within_3_sigma()),
        ]);
    }
    let resampled: u64 = rep.entries.iter().map(|e| e.resampled).sum();
    Ok(art.with_summary(json!({
        "rectangles": rep.entries.len(),
        "max_analytic_residual": num(rep.max_analytic_residual()),
        "within_3_sigma": rep.statistical_passes(),
        "resampled": resampled,
    })))
}

fn run_correlation(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let a = need(&cfg.a, "ax/--ay/--ahw", cfg.command)?;
    let b = cfg.b.unwrap_or(a);
    let n_max = cfg.n_max.unwrap_or(DEFAULT_CORRELATION_N_MAX);
    let series = correlation_series(&a, &b, n_max, params, &mc(cfg), &Threaded)?;
    let mut art = Artifact::new(vec!["n", "estimate", "stderr", "samples"]);
    for e in &series.entries {
        art.push(vec![json!(e.n), num(e.estimate), num(e.stderr), json!(e.samples)]);
    }
    let fit = if cfg.fit {
        match fit_exponential_rate(&series, 1, n_max) {
            Ok(f) => json!({
                "rate": num(f.rate),
                "amplitude": num(f.amplitude),
                "r_squared": num(f.r_squared),
                "n_min": f.n_min,
                "n_max": f.n_max,
                "points": f.points,
            }),
            Err(e) => json!({ "error": e.name(), "message": e.to_string() }),
        }
    } else {
        Value::Null
    };
    Ok(art.with_summary(json!({
        "a": rect_json(&a),
        "b": rect_json(&b),
        "product": num(a.measure() * b.measure()),
        "resampled": series.resampled,
        "fit": fit,
    })))
}

fn recurrence_artifact(rep: &RecurrenceReport) -> Artifact {
    let mut art = Artifact::new(vec!["k", "fraction", "stderr"]);
    for e in &rep.entries {
        art.push(vec![json!(e.k), num(e.fraction), num(e.stderr)]);
    }
    art.with_summary(json!({
        "n0": rep.params.n0,
        "k0": rep.params.k0,
        "h": rep.params.h,
        "block_length": rep.params.block_length(),
        "theta": num(rep.params.theta),
        "envelope_holds": rep.envelope_holds(),
        "geometric_rate": rep.geometric_rate().map_or(Value::Null, num),
        "resampled": rep.resampled,
    }))
}

fn run_recurrence(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let a = need(&cfg.a, "ax/--ay/--ahw", cfg.command)?;
    let blocks = cfg.n_max.unwrap_or(DEFAULT_RECURRENCE_BLOCKS);
    let rep = if cfg.command == Command::Visit {
        let b = need(&cfg.b, "bx/--by/--bhw", cfg.command)?;
        visit_fraction(&a, &b, blocks, params, &mc(cfg), &Threaded)?
    } else {
        recurrence_fraction(&a, blocks, params, &mc(cfg), &Threaded)?
    };
    Ok(recurrence_artifact(&rep))
}

fn run_witness(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let a = need(&cfg.a, "ax/--ay/--ahw", cfg.command)?;
    let b = cfg.b.unwrap_or(a);
    let plan = build_witness(&a, &b)?;
    let grid = cfg.grid.unwrap_or(DEFAULT_WITNESS_GRID);
    let k = cfg.k.unwrap_or(DEFAULT_WITNESS_K);
    let rep = verify_witness(&plan, params, grid, k, &Threaded, cfg.workers)?;
    let mut art = Artifact::new(vec!["n", "from_x", "from_y", "to_x", "to_y"]);
    for h in &rep.hits {
        art.push(vec![json!(h.n), num(h.from.0), num(h.from.1), num(h.to.0), num(h.to.1)]);
    }
    Ok(art.with_summary(json!({
        "plan": {
            "a": rect_json(&plan.a),
            "b": rect_json(&plan.b),
            "n": plan.n,
            "word": plan.word.to_string(),
            "threshold": plan.threshold,
            "cover_time": plan.cover_time,
            "x_r": num(plan.x_r.to_f64()),
            "y_r": num(plan.y_r),
            "sound": plan_is_sound(&plan),
        },
        "check_times": plan.check_times(k),
        "grid": rep.grid,
        "verified": true,
    })))
}

fn run_stripwidth(cfg: &ExperimentConfig, params: &MapParams) -> Result<Artifact, LabError> {
    let a = need(&cfg.a, "ax/--ay/--ahw", cfg.command)?;
    let word = need(&cfg.word, "word", cfg.command)?;
    let n_max = cfg.n_max.unwrap_or(DEFAULT_STRIP_WRAPS);
    let widths = strip_width_profile(&a, &word, params, n_max)?;
    let mut art = Artifact::new(vec!["wrap", "component", "width"]);
    for w in &widths {
        art.push(vec![json!(w.wrap), json!(w.component), num(w.width)]);
    }
    let fit = |pts: Vec<(usize, f64)>| match fit_power_law(&pts, 5, usize::MAX) {
        Ok(f) => json!({ "exponent": num(f.exponent), "prefactor": num(f.prefactor), "r_squared": num(f.r_squared) }),
        Err(e) => json!({ "error": e.name() }),
    };
    Ok(art.with_summary(json!({
        "word": word.to_string(),
        "first_wrap": widths.first().map(|w| w.wrap),
        "fit_by_wrap": fit(widths.iter().map(|w| (w.wrap, w.width)).collect()),
        "fit_by_component": fit(widths.iter().map(|w| (w.component, w.width)).collect()),
    })))
}
