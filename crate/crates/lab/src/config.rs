//! Experiment configuration: built-in defaults, then an optional flat
//! `key = value` file, then command-line flags, each layer overriding the
//! previous one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use skewtorus_core::{BranchWord, Rectangle};

use crate::error::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Orbit,
    Preimage,
    Curve,
    Length,
    Invariance,
    Correlation,
    Recurrence,
    Visit,
    Witness,
    Stripwidth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Orbit => "orbit",
            Command::Preimage => "preimage",
            Command::Curve => "curve",
            Command::Length => "length",
            Command::Invariance => "invariance",
            Command::Correlation => "correlation",
            Command::Recurrence => "recurrence",
            Command::Visit => "visit",
            Command::Witness => "witness",
            Command::Stripwidth => "stripwidth",
        }
    }

    /// Commands that draw random samples and therefore need `--seed`.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Invariance | Command::Correlation | Command::Recurrence | Command::Visit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Command-line flags. Every value flag may also come from `--config`.
#[derive(Parser, Debug)]
#[command(name = "skewtorus", version, about = "Experiments with f(x, y) = (2x mod 1, y + c/|x - 1/2| mod 1)")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Singularity strength (default 0.3).
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    /// Orbit length, preimage tree depth or number of random rectangles.
    #[arg(long)]
    pub n: Option<usize>,
    /// Branch word of 0s and 1s.
    #[arg(long)]
    pub word: Option<String>,
    /// Segment width for `length`.
    #[arg(long)]
    pub width: Option<f64>,
    /// Center and half-width of rectangle A.
    #[arg(long)]
    pub ax: Option<f64>,
    #[arg(long)]
    pub ay: Option<f64>,
    #[arg(long)]
    pub ahw: Option<f64>,
    /// Vertical half-width of A when it differs from the horizontal one.
    #[arg(long)]
    pub ahh: Option<f64>,
    /// Center and half-width of rectangle B (defaults to A).
    #[arg(long)]
    pub bx: Option<f64>,
    #[arg(long)]
    pub by: Option<f64>,
    #[arg(long)]
    pub bhw: Option<f64>,
    #[arg(long)]
    pub bhh: Option<f64>,
    /// Largest time, block or wrap index.
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// 64-bit seed, decimal or 0x-prefixed hex; required by sampling commands.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long = "precision-bits")]
    pub precision_bits: Option<u32>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output file, relative to $SKEWTORUS_OUT_DIR when that is set; stdout otherwise.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Grid points per axis (witness) or polyline samples (curve).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Extra check times for `witness`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fit an exponential decay rate to the correlation series.
    #[arg(long)]
    pub fit: bool,
}

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "SKEWTORUS_OUT_DIR";

const KEYS: &[&str] = &[
    "c",
    "x",
    "y",
    "n",
    "word",
    "width",
    "ax",
    "ay",
    "ahw",
    "ahh",
    "bx",
    "by",
    "bhw",
    "bhh",
    "n-max",
    "samples",
    "seed",
    "precision-bits",
    "workers",
    "output",
    "format",
    "grid",
    "k",
    "fit",
];

const DEFAULTS: &[(&str, &str)] =
    &[("c", "0.3"), ("samples", "1000000"), ("precision-bits", "256"), ("workers", "1"), ("format", "csv")];

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, LabError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(LabError::Config(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn flag_values(cli: &Cli) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    };
    let s = |v: Option<f64>| v.map(|v| v.to_string());
    put("c", s(cli.c));
    put("x", s(cli.x));
    put("y", s(cli.y));
    put("n", cli.n.map(|v| v.to_string()));
    put("word", cli.word.clone());
    put("width", s(cli.width));
    put("ax", s(cli.ax));
    put("ay", s(cli.ay));
    put("ahw", s(cli.ahw));
    put("ahh", s(cli.ahh));
    put("bx", s(cli.bx));
    put("by", s(cli.by));
    put("bhw", s(cli.bhw));
    put("bhh", s(cli.bhh));
    put("n-max", cli.n_max.map(|v| v.to_string()));
    put("samples", cli.samples.map(|v| v.to_string()));
    put("seed", cli.seed.clone());
    put("precision-bits", cli.precision_bits.map(|v| v.to_string()));
    put("workers", cli.workers.map(|v| v.to_string()));
    put("output", cli.output.as_ref().map(|p| p.display().to_string()));
    put("format", cli.format.map(|f| if f == Format::Csv { "csv" } else { "json" }.to_string()));
    put("grid", cli.grid.map(|v| v.to_string()));
    put("k", cli.k.map(|v| v.to_string()));
    put("fit", cli.fit.then(|| "true".to_string()));
    m
}

/// A fully merged and validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub c: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub n: Option<usize>,
    pub word: Option<BranchWord>,
    pub width: Option<f64>,
    pub a: Option<Rectangle>,
    pub b: Option<Rectangle>,
    pub n_max: Option<usize>,
    pub samples: u64,
    pub seed: Option<u64>,
    pub precision_bits: u32,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub grid: Option<usize>,
    pub k: Option<usize>,
    pub fit: bool,
    /// The merged raw values, echoed into the output metadata.
    pub echo: BTreeMap<String, String>,
}

fn parse<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, LabError> {
    m.get(key).map(|v| v.parse::<T>().map_err(|_| LabError::Config(format!("--{key}: cannot parse `{v}`")))).transpose()
}

fn parse_seed(v: &str) -> Result<u64, LabError> {
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => v.parse(),
    };
    parsed.map_err(|_| LabError::Config(format!("--seed: `{v}` is not a 64-bit integer")))
}

fn rect(m: &BTreeMap<String, String>, p: &str) -> Result<Option<Rectangle>, LabError> {
    let cx = parse::<f64>(m, &format!("{p}x"))?;
    let cy = parse::<f64>(m, &format!("{p}y"))?;
    let hw = parse::<f64>(m, &format!("{p}hw"))?;
    let hh = parse::<f64>(m, &format!("{p}hh"))?;
    match (cx, cy, hw) {
        (None, None, None) if hh.is_none() => Ok(None),
        (Some(cx), Some(cy), Some(hw)) => Rectangle::centered(cx, cy, hw, hh.unwrap_or(hw)).map(Some).map_err(|_| {
            LabError::Config(format!("rectangle {}: center ± half-width must stay inside [0, 1]²", p.to_uppercase()))
        }),
        _ => Err(LabError::Config(format!("rectangle {0} needs --{0}x, --{0}y and --{0}hw", p))),
    }
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, LabError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| LabError::Config(format!("--config {}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::from_layers(cli.command, &file, &flag_values(cli))
    }

    pub fn from_layers(
        command: Command,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self, LabError> {
        let mut m: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        m.extend(file.iter().map(|(k, v)| (k.clone(), v.clone())));
        m.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));

        let c: f64 = parse(&m, "c")?.expect("default");
        if !(c.is_finite() && c > 0.0) {
            return Err(LabError::Config("--c must be a positive finite number".into()));
        }
        let samples: u64 = parse(&m, "samples")?.expect("default");
        if samples == 0 {
            return Err(LabError::Config("--samples must be positive".into()));
        }
        let workers: usize = parse(&m, "workers")?.expect("default");
        if workers == 0 {
            return Err(LabError::Config("--workers must be at least 1".into()));
        }
        let precision_bits: u32 = parse(&m, "precision-bits")?.expect("default");
        if !(64..=1 << 16).contains(&precision_bits) {
            return Err(LabError::Config("--precision-bits must lie in [64, 65536]".into()));
        }
        let format = match m.get("format").map(String::as_str) {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(LabError::Config(format!("--format: `{other}` is neither csv nor json"))),
            None => Format::Csv,
        };
        let seed = m.get("seed").map(|v| parse_seed(v)).transpose()?;
        if command.is_stochastic() && seed.is_none() {
            return Err(LabError::Config(format!("`{}` samples randomly and requires --seed", command.name())));
        }
        let word = m
            .get("word")
            .map(|w| w.parse::<BranchWord>().map_err(|e| LabError::Config(format!("--word: {e}"))))
            .transpose()?;
        let fit = match m.get("fit").map(String::as_str) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(LabError::Config(format!("--fit: `{other}` is not a boolean"))),
        };
        Ok(ExperimentConfig {
            command,
            c,
            x: parse(&m, "x")?,
            y: parse(&m, "y")?,
            n: parse(&m, "n")?,
            word,
            width: parse(&m, "width")?,
            a: rect(&m, "a")?,
            b: rect(&m, "b")?,
            n_max: parse(&m, "n-max")?,
            samples,
            seed,
            precision_bits,
            workers,
            output: m.get("output").map(PathBuf::from),
            format,
            grid: parse(&m, "grid")?,
            k: parse(&m, "k")?,
            fit,
            echo: m,
        })
    }

    /// Where the artifact goes: `output` resolved against `out_dir` when relative.
    pub fn output_path(&self, out_dir: Option<&Path>) -> Option<PathBuf> {
        self.output.as_ref().map(|p| match out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        })
    }
}
