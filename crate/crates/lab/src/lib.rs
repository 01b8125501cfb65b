//! Command-line laboratory for the skew-product torus map: configuration,
//! threaded batch execution and CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use config::{Cli, Command, ExperimentConfig, Format};
pub use error::LabError;
pub use output::Artifact;
pub use runner::Threaded;

/// Runs one experiment and writes its artifact to the configured path, or
/// returns the rendered text when no path is configured.
pub fn execute(cfg: &ExperimentConfig, out_dir: Option<PathBuf>) -> Result<Option<String>, LabError> {
    let artifact = commands::run(cfg)?;
    let text = output::render(&artifact, output::metadata(cfg), cfg.format);
    match cfg.output_path(out_dir.as_deref()) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
