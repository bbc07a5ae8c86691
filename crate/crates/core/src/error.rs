use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("step size underflow at t = {t} (h = {h:e}); problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },

    #[error("trajectory left the state space at t = {t}: {reason}")]
    Boundary { t: f64, reason: String },

    #[error("no event before the horizon t = {t_end}")]
    NoEvent { t_end: f64 },

    #[error("no crossing of the switching manifold: check that the stable-set hypotheses hold ({0})")]
    NoCrossing(String),

    #[error("trajectory reached the sliding region at t = {t} (w = {w}, h+ = {h_plus}, h- = {h_minus})")]
    Sliding {
        t: f64,
        w: f64,
        h_plus: f64,
        h_minus: f64,
    },

    #[error("point is not on the switching manifold (|h| = {0:e})")]
    NotOnSigma(f64),

    #[error("point is not in the required crossing region: {0}")]
    WrongRegion(String),

    #[error("no stable equilibrium found: {0}")]
    MissingEquilibrium(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("equilibrium residual too large: {0:e}")]
    Residual(f64),

    #[error("insolation self-check failed: {0}")]
    SelfCheck(String),
}
