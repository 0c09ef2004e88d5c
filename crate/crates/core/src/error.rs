use thiserror::Error;

use crate::characteristics::BranchClassification;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("no blowup: min g' = {g_min} is not negative on the search interval")]
    NoBlowup { g_min: f64 },

    #[error("no envelope yet: t - t* = {tau} is not positive")]
    NoEnvelope { tau: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("branch {branch:?} not present at this point (region {:?})", classification.region)]
    BranchNotPresent {
        branch: crate::characteristics::Branch,
        classification: Box<BranchClassification>,
    },

    #[error("derivatives singular on the envelope (denom = {denom}, u = {u})")]
    DerivativeSingular { u: f64, denom: f64 },

    #[error("point leaves the cusp: x = {x} not inside ({x_plus}, {x_minus})")]
    OutsideCusp { x: f64, x_plus: f64, x_minus: f64 },

    #[error("picard iteration is not contracting: updates {updates:?}")]
    NonContraction { updates: Vec<f64> },

    #[error("picard iteration did not reach tolerance after {sweeps} sweeps (last update {last})")]
    NotConverged { sweeps: usize, last: f64 },

    #[error("s = {s} too small: t - t* underflows")]
    STooSmall { s: f64 },

    #[error("kernel exponent {exponent} is positive")]
    KernelOverflow { exponent: f64 },

    #[error("step size underflow at t - t* = {tau}")]
    StepUnderflow { tau: f64 },

    #[error("time t - t* = {tau} outside the curve range [{lo}, {hi}]")]
    OutOfRange { tau: f64, lo: f64, hi: f64 },

    #[error("minimizer {y} sits on the window boundary ±{window}")]
    WindowTooSmall { y: f64, window: f64 },

    #[error("expected two minimizer basins, found {found}")]
    BasinDetection { found: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config: {0}")]
    Config(String),
}
