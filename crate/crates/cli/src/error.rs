use thiserror::Error;

/// A failed command, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad spec, arguments or configuration.
    #[error("{0}")]
    Spec(String),
    /// Unreadable or inconsistent data.
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NonFinite(String),
    #[error("{0}")]
    Version(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonFinite(_) => 4,
            CliError::Version(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

impl From<mixreg_core::Error> for CliError {
    fn from(e: mixreg_core::Error) -> Self {
        use mixreg_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter { .. }
            | E::Parse { .. }
            | E::Formula(_)
            | E::UnknownNetwork(_)
            | E::Spec(_)
            | E::Config(_)
            | E::EmptyMixture
            | E::DuplicateInflation(_) => CliError::Spec(msg),
            E::Support { .. }
            | E::Domain(_)
            | E::Dimension(_)
            | E::MissingColumn(_)
            | E::NonNumericColumn { .. }
            | E::Data(_)
            | E::EmptyTraining
            | E::StaleCache(_) => CliError::Data(msg),
            E::NonFiniteLoss { .. } | E::NonFiniteObjective(_) | E::DegenerateRow { .. } => CliError::NonFinite(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
