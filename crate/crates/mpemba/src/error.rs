use std::fmt;
use std::path::PathBuf;

/// One rejected config field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n{}", list(.0))]
    Validation(Vec<FieldError>),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mpemba_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{0} acceptance criteria failed")]
    Acceptance(usize),
}

fn list(errs: &[FieldError]) -> String {
    errs.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl HarnessError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Validation(vec![FieldError { field: field.into(), reason: reason.into() }])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// 1 for bad input, 2 for failures while running, 3 for failed acceptance.
    pub fn exit_code(&self) -> i32 {
        use mpemba_core::Error as E;
        match self {
            HarnessError::Validation(_) | HarnessError::Usage(_) | HarnessError::Parse { .. } => 1,
            HarnessError::Core(E::Invalid { .. } | E::OddAntiferro(_) | E::MemoryCap { .. } | E::GridMismatch) => 1,
            HarnessError::Core(_) | HarnessError::Io { .. } | HarnessError::Csv { .. } => 2,
            HarnessError::Acceptance(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
