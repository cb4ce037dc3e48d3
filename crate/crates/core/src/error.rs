use std::path::PathBuf;

/// Errors raised by model construction, simulation and analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("layer {index} overlaps layer {other}")]
    OverlappingLayers { index: usize, other: usize },

    #[error("layer {index} lies outside the grid: {detail}")]
    LayerOutsideGrid { index: usize, detail: String },

    #[error("CFL violation in {region}: dt = {dt:e} s exceeds dx/c_p = {limit:e} s (c_p = {c_p} m/s)")]
    Cfl {
        region: String,
        dt: f64,
        limit: f64,
        c_p: f64,
    },

    #[error("invalid variation: {0}")]
    InvalidVariation(String),

    #[error("boundaries cross: {0}")]
    BoundaryCrossing(String),

    #[error("unsupported parameter combination: {0}")]
    UnsupportedParameterCombination(String),

    #[error("numerical instability: non-finite value at step {step}")]
    Instability { step: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid analysis request: {0}")]
    InvalidAnalysis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("run '{run}': {source}")]
    Run {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the identity of the run that produced this error.
    pub fn in_run(self, run: impl Into<String>) -> Self {
        Error::Run {
            run: run.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with run context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors that stem from an inconsistent configuration rather
    /// than from running it.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidGrid(_)
                | Error::InvalidMaterial(_)
                | Error::OverlappingLayers { .. }
                | Error::LayerOutsideGrid { .. }
                | Error::Cfl { .. }
                | Error::InvalidVariation(_)
                | Error::BoundaryCrossing(_)
                | Error::UnsupportedParameterCombination(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
