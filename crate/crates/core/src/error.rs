use thiserror::Error;

use crate::contact::State;
use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: expected n = {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("integration diverged after t = {t}: non-finite state")]
    Divergence { t: f64, last: State },
    #[error("step size {dt:e} underflowed at t = {t}")]
    StepUnderflow { t: f64, dt: f64, last: State },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("no closed-form reference: {0}")]
    NoClosedForm(String),
    #[error("spec document: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
