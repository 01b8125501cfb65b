use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use skewtorus_lab::config::OUT_DIR_ENV;
use skewtorus_lab::{execute, Cli, ExperimentConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; every rejected
            // argument is a config error.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(Into::into);
    let result = ExperimentConfig::from_cli(&cli).and_then(|cfg| execute(&cfg, out_dir));
    match result {
        Ok(Some(text)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skewtorus: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
