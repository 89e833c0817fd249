use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("argument `{name}` out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },

    #[error("quadrature did not converge (estimated error {error:.3e})")]
    Quadrature { error: f64 },

    #[error("handoff cascade is unstable: P_H(1 - P_fh) = {0} >= 1")]
    UnstableHandoff(f64),

    #[error("fluid model unstable: mean input {mean_input} >= service rate {service_rate}")]
    UnstableFluid { mean_input: f64, service_rate: f64 },

    #[error("service rate {0} coincides with an integer source count; perturb it (e.g. by 1e-6)")]
    IntegerServiceRate(f64),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("singular boundary system")]
    SingularBoundary,

    #[error("no statistics collected: {0}")]
    EmptyStatistics(&'static str),

    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
}
