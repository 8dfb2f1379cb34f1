use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical input outside its domain (negative resistivity, empty mesh, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value failed validation; `path` is the dotted field path.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("no range-table entry for {species} at {energy_kev} keV")]
    MissingRange { species: String, energy_kev: f64 },

    #[error("solver did not converge at {bias} V after {iterations} iterations (last update {last_update:.3e} V)")]
    NonConvergence {
        bias: f64,
        iterations: usize,
        last_update: f64,
        history: Vec<f64>,
    },

    #[error("bias step collapsed below {min_step} V while approaching {target} V from {reached} V")]
    StepCollapse {
        reached: f64,
        target: f64,
        min_step: f64,
        history: Vec<f64>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Residual history carried by solver failures, empty otherwise.
    pub fn residual_history(&self) -> &[f64] {
        match self {
            Error::NonConvergence { history, .. } | Error::StepCollapse { history, .. } => history,
            _ => &[],
        }
    }
}
