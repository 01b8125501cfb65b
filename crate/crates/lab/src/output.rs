//! Artifact rendering. A CSV artifact starts with one `# {json}` line holding
//! the metadata and summary, then a header row and the data rows. A JSON
//! artifact is a single object with `meta`, `summary`, `columns` and `rows`.
//!
//! Floats use Rust's shortest round-trip decimal form in both formats.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};

/// The result of one command: a free-form summary and a table.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub summary: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Artifact {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Artifact { summary: Value::Object(Map::new()), columns, rows: Vec::new() }
    }

    pub fn with_summary(mut self, summary: Value) -> Self {
        self.summary = summary;
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Metadata header: command, version, seed, worker count and the merged config.
pub fn metadata(cfg: &ExperimentConfig) -> Value {
    json!({
        "command": cfg.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "config": cfg.echo,
    })
}

/// A float as a JSON number, or `null` when it is not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(artifact: &Artifact, meta: Value, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::new();
            let head = json!({ "meta": meta, "summary": artifact.summary });
            writeln!(out, "# {head}").expect("string write");
            writeln!(out, "{}", artifact.columns.join(",")).expect("string write");
            for row in &artifact.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                writeln!(out, "{}", cells.join(",")).expect("string write");
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = artifact
                .rows
                .iter()
                .map(|r| Value::Object(artifact.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                .collect();
            let doc = json!({
                "meta": meta,
                "summary": artifact.summary,
                "columns": artifact.columns,
                "rows": rows,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
            s.push('\n');
            s
        }
    }
}
