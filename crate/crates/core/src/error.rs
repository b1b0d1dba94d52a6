use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} lies outside the admissible interval {interval}")]
    Domain {
        name: &'static str,
        value: f64,
        interval: &'static str,
    },

    #[error("q = {q} is supercritical (q_crit = {q_crit}); no positive solution exists")]
    Supercritical { q: f64, q_crit: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last scaled residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        /// Scaled residual after each iteration, fallback included.
        trace: Vec<f64>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("singular linear system (zero pivot in column {0})")]
    Singular(usize),

    #[error("kernel evaluated at its pole r = 0")]
    Pole,

    #[error("configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Wraps the error with the name of the stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
