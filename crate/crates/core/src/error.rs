use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unit `{unit}` is missing a screening rate; run the eligibility filter first")]
    MissingRate { unit: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("feature `{0}` is missing in every unit and cannot be imputed")]
    UnimputableFeature(String),

    #[error("no facilities supplied; nearest-facility distance is undefined")]
    NoFacilities,

    #[error("degenerate variance: all values are equal")]
    DegenerateVariance,

    #[error("singular design matrix")]
    SingularDesign,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero total sum of squares; r2 is undefined")]
    ZeroVariance,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too many features for exhaustive Shapley enumeration ({0} > 16); use the forest algorithm")]
    TooManyFeatures(usize),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
