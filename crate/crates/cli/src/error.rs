use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input data error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("json: {e}"))
    }
}

impl From<qsdc_core::protocol_engine::SessionError> for CliError {
    fn from(e: qsdc_core::protocol_engine::SessionError) -> Self {
        use qsdc_core::protocol_engine::SessionError as E;
        match e {
            E::InvalidConfig(_) | E::Channel(_) | E::Mapping(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<qsdc_core::security_capacity::CapacityError> for CliError {
    fn from(e: qsdc_core::security_capacity::CapacityError) -> Self {
        use qsdc_core::security_capacity::CapacityError as E;
        match e {
            E::InvalidParams(_) | E::Channel(_) | E::DomainError { .. } => CliError::Config(e.to_string()),
            E::NonPhysicalSpectrum { .. } => CliError::Internal(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
