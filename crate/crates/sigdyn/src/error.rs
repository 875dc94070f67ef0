use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input file. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A signature with no usable samples (empty file, or fewer than two
    /// pen-down samples).
    #[error("empty signature: {0}")]
    EmptySignature(String),

    /// A trajectory point the arm cannot reach. `index` is the first
    /// offending sample.
    #[error("point ({x}, {y}{}) at sample {index} is outside the workspace", z.map(|z| format!(", {z}")).unwrap_or_default())]
    Workspace {
        index: usize,
        x: f64,
        y: f64,
        z: Option<f64>,
    },

    /// 3D inverse kinematics is undefined on the first joint axis (x = y = 0).
    #[error("target at sample {index} lies on the singular first-joint axis")]
    SingularAxis { index: usize },

    /// An argument violates an operation's contract (bad lengths, invalid
    /// parameter values, mismatched shapes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Evaluation protocol cannot run (no eligible users, empty trial class).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
