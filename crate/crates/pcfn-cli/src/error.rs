//! Error classes mapped to exit codes: 2 config, 3 data, 4 numerical.

use std::fmt;

use pcfn::data::DataError;
use pcfn::eval::EvalError;
use pcfn::model::ModelError;
use pcfn::train::TrainError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }

    /// One-line machine-parsable rendering: `error=<class>: <message>`.
    pub fn one_line(&self) -> String {
        let (class, msg) = match self {
            Self::Config(m) => ("config", m),
            Self::Data(m) => ("data", m),
            Self::Numerical(m) => ("numerical", m),
        };
        format!("error={class}: {}", msg.replace('\n', " "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_line())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(format!("io error: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::NonPositive { .. } | DataError::InfeasibleGeometry { .. } => {
                Self::Config(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config { .. } => Self::Config(e.to_string()),
            ModelError::Tensor(_) => Self::Numerical(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config { .. } => Self::Config(e.to_string()),
            TrainError::NanGradient { .. } | TrainError::Divergence { .. } => {
                Self::Numerical(e.to_string())
            }
            TrainError::Dataset { .. } | TrainError::Io(_) => Self::Data(e.to_string()),
            TrainError::Model(m) => Self::from(m),
            TrainError::Tensor(_) => Self::Numerical(e.to_string()),
            TrainError::Data(d) => Self::from(d),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::StencilTooSmall { .. } => Self::Config(e.to_string()),
            EvalError::RankDeficient { .. } | EvalError::Tensor(_) => {
                Self::Numerical(e.to_string())
            }
            EvalError::Model(m) => Self::from(m),
            EvalError::Data(d) => Self::from(d),
            _ => Self::Data(e.to_string()),
        }
    }
}
