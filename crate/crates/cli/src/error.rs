use std::fmt;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    Config(String),
    /// The ODE integration failed (exit 3).
    Integration(symvol::Error),
    /// A checked invariant exceeded its tolerance (exit 4).
    Violation(String),
    /// An input STM is not symplectic (exit 5).
    NotSymplectic(String),
    /// Anything else, such as I/O (exit 1).
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Integration(_) => 3,
            CliError::Violation(_) => 4,
            CliError::NotSymplectic(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Integration(e) => write!(f, "integration failed: {e}"),
            CliError::Violation(m) => write!(f, "invariant violation: {m}"),
            CliError::NotSymplectic(m) => write!(f, "input not symplectic: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<symvol::Error> for CliError {
    fn from(e: symvol::Error) -> Self {
        use symvol::Error as E;
        if e.is_integration_failure() {
            return CliError::Integration(e);
        }
        match e {
            E::NotSymplectic { .. } => CliError::NotSymplectic(e.to_string()),
            E::Dimension(_)
            | E::IndexOutOfRange { .. }
            | E::InvalidArgument(_)
            | E::UnknownSystem(_)
            | E::DegenerateParameterization(_)
            | E::AllCaustic(_)
            | E::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}
