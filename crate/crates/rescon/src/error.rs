use thiserror::Error;

/// All failure modes of the library, grouped by what the caller can do about them.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter value; names the offending field.
    #[error("config: {0}")]
    Config(String),

    /// Input outside an operation's mathematical domain (e.g. zero trust offset).
    #[error("domain: {0}")]
    Domain(String),

    /// Random-graph generation could not produce a connected legitimate subgraph.
    #[error(
        "graph generation failed: legitimate subgraph disconnected after {retries} attempts \
         (seed {seed}, radius {radius})"
    )]
    Generation { seed: u64, radius: f64, retries: u32 },

    /// A protocol-level contract was broken, e.g. a missing edge observation.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical: {0}")]
    Numerical(String),

    /// Malformed persisted data (trace or topology file).
    #[error("malformed file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
