use thiserror::Error;

/// Failures of a command-line run, split by exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {err}", err.name())]
    Core {
        #[from]
        err: skewtorus_core::Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// 1 for malformed input or unwritable output, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core { err } if !err.is_config_error() => 2,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use skewtorus_core::Error;

    #[test]
    fn exit_codes_and_names() {
        let numerical = LabError::from(Error::WitnessFailed { n: 12 });
        assert_eq!(numerical.exit_code(), 2);
        assert!(numerical.to_string().starts_with("WitnessFailed: "));
        let config = LabError::from(Error::InvalidWord("empty"));
        assert_eq!(config.exit_code(), 1);
        assert!(config.to_string().starts_with("InvalidWord: "));
        assert_eq!(LabError::Config("x".into()).exit_code(), 1);
    }
}
