use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICS: u8 = 2;
pub const EXIT_OPTIMIZER: u8 = 3;
pub const EXIT_GRADCHECK: u8 = 4;

#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Library(#[from] hammerflow::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("refusing to overwrite {}; pass --force", .0.join(", "))]
    Exists(Vec<String>),

    #[error("cannot serialize {name}: {source}")]
    Json {
        name: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Library(e) if e.is_numerical() => EXIT_NUMERICS,
            Failure::Library(hammerflow::Error::Infeasible(_)) => EXIT_OPTIMIZER,
            _ => EXIT_CONFIG,
        }
    }
}
