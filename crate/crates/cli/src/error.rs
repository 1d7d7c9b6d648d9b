use std::fmt;

/// Failure categories, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Validation,
    Stage,
    Config,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Validation => 2,
            Failure::Stage => 3,
            Failure::Config => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub failure: Failure,
    pub stage: Option<&'static str>,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self { failure: Failure::Config, stage: None, source: e.into() }
    }

    pub fn validation(e: impl Into<anyhow::Error>) -> Self {
        Self { failure: Failure::Validation, stage: Some("validate"), source: e.into() }
    }

    pub fn stage(stage: &'static str, e: impl Into<anyhow::Error>) -> Self {
        Self { failure: Failure::Stage, stage: Some(stage), source: e.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(s) => write!(f, "stage `{s}` failed: {:#}", self.source),
            None => write!(f, "configuration error: {:#}", self.source),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to any error.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::stage(stage, e))
    }
}
