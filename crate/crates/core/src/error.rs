use thiserror::Error;

/// Errors raised by the variational engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "immersion failure on patch `{patch}` at ({u:.6}, {v:.6}): area element {area_element:e}"
    )]
    Immersion {
        patch: String,
        u: f64,
        v: f64,
        area_element: f64,
    },

    #[error("point ({u:.6}, {v:.6}) lies outside the parameter domain of patch `{patch}`")]
    OutsideDomain { patch: String, u: f64, v: f64 },

    #[error("component {component} has non-positive enclosed volume {volume:e}; check piece orientations")]
    Orientation { component: u32, volume: f64 },

    #[error("component {component} does not bound a region: normal flux defect {defect:e}")]
    OpenComponent { component: u32, defect: f64 },

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    #[error("support of field `{field}` is not contained in the window")]
    SupportEscapes { field: String },

    #[error("multiplier estimate for component {component} is ill-posed: {reason}")]
    IllPosed { component: u32, reason: String },

    #[error("boundary curve `{0}` carries no conormal data")]
    MissingConormal(String),

    #[error("finite-difference stencil: {0}")]
    Stencil(String),

    #[error("flow integration failed from {start:?}: {reason}")]
    Integrator { start: [f64; 3], reason: String },

    #[error("volume-correction solve failed at t = {t:e}: {reason}")]
    Newton { t: f64, reason: String },

    #[error("deformed sheets intersect: signed gap {gap:e} at {at:?}")]
    SheetCollision { gap: f64, at: [f64; 3] },

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
