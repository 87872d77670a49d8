use thiserror::Error;

#[derive(Clone, Debug, Error)]
pub enum CoreError {
    #[error("point is not on the unit sphere: |norm - 1| = {0:.3e}")]
    OffSphere(f64),

    #[error("chart overflow: {0}")]
    ChartOverflow(String),

    #[error("coherent state requested within {dist:.3e} of the gauge-singular pole")]
    PoleGauge { dist: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("classical state is not a probability measure: {0}")]
    BadClassicalState(String),

    #[error("operator is not a density operator: {0}")]
    BadDensityOperator(String),

    #[error("undefined overlap ratio: {0}")]
    UndefinedOverlap(String),

    #[error("semiclassical hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("integration quality: {0}")]
    IntegrationQuality(String),

    #[error("calibration indeterminate: {0}")]
    CalibrationIndeterminate(String),

    #[error("container format error: {0}")]
    Container(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
