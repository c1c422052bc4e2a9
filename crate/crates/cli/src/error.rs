//! Error categories and the process exit codes they map to.
//!
//! Every failure a subcommand can hit lands in one of three buckets so
//! that scripts can branch on the exit code: configuration problems
//! (bad config file, bad flags, unusable endpoint definitions),
//! network problems (an endpoint could not be reached or answered
//! garbage), and validation problems (input data on disk failed its
//! invariants).

use std::fmt;

use valcon_core::client::ClientError;
use valcon_core::dataset::CorpusError;
use valcon_core::divergence::DivergenceError;
use valcon_core::genpipeline::GenError;
use valcon_core::judge::JudgeError;
use valcon_core::measures::MeasuresError;
use valcon_core::simulator::SimulatorError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NETWORK: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    /// The configuration file, command-line flags, or a referenced path
    /// is unusable.
    Config(String),
    /// An endpoint could not be reached, or its reply was not usable.
    Network(String),
    /// Input data (corpus, logs, spec files) violated an invariant.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Network(_) => EXIT_NETWORK,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "configuration",
            CliError::Network(_) => "network",
            CliError::Validation(_) => "validation",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (CliError::Config(msg) | CliError::Network(msg) | CliError::Validation(msg)) = self;
        write!(f, "{} error: {}", self.category(), msg)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> CliError {
        match e {
            ClientError::InvalidEndpoint(_)
            | ClientError::LogprobsUnsupported(_)
            | ClientError::AuthTokenMissing(_) => CliError::Config(e.to_string()),
            ClientError::Network { .. }
            | ClientError::Http { .. }
            | ClientError::MalformedReply(_)
            | ClientError::MissingLogprobs => CliError::Network(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        match e {
            // A corpus that cannot be read is a path problem, which the
            // config invariants own; a corpus that reads but does not
            // hold together is bad data.
            CorpusError::Io { .. } => CliError::Config(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> CliError {
        match e {
            GenError::InvalidJob(_) => CliError::Config(e.to_string()),
            GenError::Client(inner) => inner.into(),
            GenError::Corpus(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> CliError {
        match e {
            JudgeError::Client(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MeasuresError> for CliError {
    fn from(e: MeasuresError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<DivergenceError> for CliError {
    fn from(e: DivergenceError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<SimulatorError> for CliError {
    fn from(e: SimulatorError) -> CliError {
        match e {
            // Failing to open a local port is a (local) network problem.
            SimulatorError::Bind(_) => CliError::Network(e.to_string()),
            SimulatorError::Corpus(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
