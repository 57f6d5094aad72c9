use std::path::PathBuf;

/// Every failure class maps to one process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("missing model for level {level}: {}", path.display())]
    MissingModel { level: usize, path: PathBuf },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::EmptyDataset(_) => 4,
            CliError::Diverged(_) => 5,
            CliError::MissingModel { .. } => 6,
        }
    }
}

impl From<nsb_core::Error> for CliError {
    fn from(e: nsb_core::Error) -> Self {
        use nsb_core::Error as E;
        match e {
            E::Geometry(msg) => CliError::Geometry(msg),
            E::ShapeMismatch { .. } => CliError::Geometry(e.to_string()),
            E::NonFinite { .. } => CliError::Diverged(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<nsb_core::FormatError> for CliError {
    fn from(e: nsb_core::FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

/// Reads a file, naming it on failure.
pub fn read(path: &std::path::Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

pub fn write(path: &std::path::Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}
