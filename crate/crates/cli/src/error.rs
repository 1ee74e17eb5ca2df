use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },

    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: line {line}: {message}")]
    MeshFormat { path: PathBuf, line: usize, message: String },

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Solver(#[from] vdoc_core::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration or arguments,
    /// 1 for failures of the numerical pipeline.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. }
            | CliError::ConfigFile { .. }
            | CliError::Usage(_)
            | CliError::MeshFormat { .. }
            | CliError::Output { .. } => 2,
            CliError::Solver(e) => solver_exit_code(e),
        }
    }
}

fn solver_exit_code(e: &vdoc_core::Error) -> u8 {
    use vdoc_core::Error as E;
    match e {
        E::InvalidArgument(_)
        | E::InvalidProblem(_)
        | E::InvalidMesh(_)
        | E::MisalignedRegion { .. }
        | E::UnsupportedConstant { .. }
        | E::UnsupportedQuadrature(_) => 2,
        E::AtLevel { source, .. } => solver_exit_code(source),
        _ => 1,
    }
}
