//! Every tunable default in one place.
//!
//! | name | value | used by |
//! |------|-------|---------|
//! | `LOCALITY_RADIUS` | 0.75 | profile locality, envelope scan, oracle window |
//! | `BLOWUP_INTERVAL` | ±0.75 | `locate_blowup` search |
//! | `EPS_MAX_FINITE` | 0.25 | largest `t - t*` trusted, finite family |
//! | `EPS_MAX_INFINITE` | 0.1 | largest `t - t*` trusted, infinite family |
//! | `SHOCK_STEPS` | 2000 | Picard grid intervals |
//! | `PICARD_TOL` | 1e-12 | sup-norm update that ends the Picard sweeps |
//! | `PICARD_MAX_SWEEPS` | 80 | Picard sweep cap |
//! | `S_MIN_INFINITE` | 0.05 | lower cutoff of the infinite-family grid |
//! | `S_MAX_INFINITE` | 0.7 | upper cap of the infinite-family grid |
//! | `ODE_RTOL` / `ODE_ATOL` | 1e-12 / 1e-15 | RK45 continuation |
//! | `ORACLE_GRID` | 4096 | minimizer scan points |
//! | `FIT_WINDOW_FINITE` | [1e-6, 1e-2] | exponent fits in `t - t*` |
//! | `FIT_WINDOW_INFINITE` | [1e-8, 1e-3] | log-exponent fits in `t - t*` |
//! | `FIT_SAMPLES` | 40 | points per fit window |
//! | `BOUND_SAMPLES` | 10000 | field-bound sample count |
//! | `BOUND_SEED` | 20240917 | field-bound sampler seed |

pub const LOCALITY_RADIUS: f64 = 0.75;
pub const BLOWUP_INTERVAL: (f64, f64) = (-0.75, 0.75);
pub const EPS_MAX_FINITE: f64 = 0.25;
pub const EPS_MAX_INFINITE: f64 = 0.1;
pub const SHOCK_STEPS: usize = 2000;
pub const PICARD_TOL: f64 = 1e-12;
pub const PICARD_MAX_SWEEPS: usize = 80;
pub const S_MIN_INFINITE: f64 = 0.05;
pub const S_MAX_INFINITE: f64 = 0.7;
pub const ODE_RTOL: f64 = 1e-12;
pub const ODE_ATOL: f64 = 1e-15;
pub const ORACLE_GRID: usize = 4096;
pub const FIT_WINDOW_FINITE: (f64, f64) = (1e-6, 1e-2);
pub const FIT_WINDOW_INFINITE: (f64, f64) = (1e-8, 1e-3);
pub const FIT_SAMPLES: usize = 40;
pub const BOUND_SAMPLES: usize = 10_000;
pub const BOUND_SEED: u64 = 20_240_917;

/// Largest rescaled parameter for the finite family: `EPS_MAX_FINITE^{1/2k}`.
pub fn s_max_finite(k: u32) -> f64 {
    EPS_MAX_FINITE.powf(1.0 / (2.0 * k as f64))
}

/// Largest rescaled parameter for the infinite family.
pub fn s_max_infinite(p: f64) -> f64 {
    S_MAX_INFINITE.min(EPS_MAX_INFINITE.ln().abs().powf(-1.0 / p))
}
