use crate::expr::DomainError;
use crate::geometry::Signature;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("degenerate metric: |det g| = {det:e}")]
    DegenerateMetric { det: f64 },
    #[error("metric signature {found} does not match expected {expected}")]
    SignatureMismatch { expected: Signature, found: String },
    #[error("force matrix I - (q/c) F~ is singular: |det| = {det:e}")]
    SingularForceMatrix { det: f64 },
    #[error("step rejected {rejections} times in a row at t = {t}")]
    StepRejectionLimit { t: f64, rejections: usize },
    #[error("integration failed at t = {t}: {source}")]
    Integration { t: f64, source: Box<Error> },
    #[error("gauge function `{0}` depends on the direction variables")]
    GaugeNotPositional(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
