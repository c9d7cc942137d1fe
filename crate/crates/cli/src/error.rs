use interlerp::Error;

/// Failure of one CLI invocation, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configs or paths supplied by the user.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 1 usage/config, 2 data/IO/integrity, 3 quality gate or divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::QualityGate { .. } | Error::Divergence { .. } => 3,
                Error::Index { .. }
                | Error::DegenerateTransfer(_)
                | Error::InvalidStepSize(_)
                | Error::Validation(_)
                | Error::InsufficientMass { .. } => 1,
                _ => 2,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io { context: "i/o".into(), source: e })
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(Error::Csv(e))
    }
}
