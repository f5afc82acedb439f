use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-physical deformation in element {element}: det(F) = {det:e}")]
    NonPhysicalDeformation { element: usize, det: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kinematics error: {0}")]
    Kinematics(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("Newton solver failed at load step {step}: {message}")]
    Solver { step: usize, message: String },

    #[error("explicit integration became unstable at step {step}")]
    Instability { step: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Mesh(_) | Error::Json(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
