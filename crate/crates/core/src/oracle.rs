//! Lax–Oleinik variational solver for the Burgers pairing.
//!
//! `u(t, x) = (x - y*) / t` where `y*` minimizes
//! `U0(y) + (x - y)^2 / (2t)` and `U0' = u0`. This shares nothing with the
//! characteristic/Picard machinery except the profile's closed-form data, so
//! it serves as ground truth for the shock position.

use serde::{Deserialize, Serialize};

use crate::characteristics::{envelope, Time};
use crate::error::{Error, Result};
use crate::numeric;
use crate::profile::{Degeneracy, Flux, Profile};

#[derive(Debug, Clone)]
pub struct VariationalState {
    profile: Profile,
    window: f64,
    grid: Vec<f64>,
    /// `U0` at the grid nodes; only used for non-polynomial data.
    table: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub y: f64,
    pub u: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleShock {
    pub tau: f64,
    pub phi: f64,
    pub left: Minimizer,
    pub right: Minimizer,
}

impl OracleShock {
    /// `min(u_left - speed, speed - u_right)` with the Burgers chord speed.
    pub fn entropy_margin(&self) -> f64 {
        let speed = 0.5 * (self.left.u + self.right.u);
        (self.left.u - speed).min(speed - self.right.u)
    }
}

impl VariationalState {
    /// Oracle over `[c - window, c + window]` with `grid` scan points.
    pub fn new(profile: &Profile, window: f64, grid: usize) -> Result<Self> {
        if profile.flux() != Flux::Burgers {
            return Err(Error::InvalidProfile("the variational oracle needs the Burgers pairing".into()));
        }
        if !(window > 0.0) || grid < 8 {
            return Err(Error::InvalidProfile(format!(
                "bad oracle window {window} or grid {grid}"
            )));
        }
        let c = profile.center();
        let nodes = numeric::linspace(c - window, c + window, grid);
        let table = match profile.degeneracy() {
            Degeneracy::Finite { .. } => None,
            Degeneracy::Infinite { .. } => {
                // cumulative integral outward from the node nearest the center
                let mid = nodes.partition_point(|&y| y < c).min(grid - 1);
                let mut t = vec![0.0; grid];
                t[mid] = profile.datum_antiderivative(nodes[mid]);
                for j in mid + 1..grid {
                    t[j] = t[j - 1] + numeric::gauss16_integral(|y| profile.datum(y), nodes[j - 1], nodes[j]);
                }
                for j in (0..mid).rev() {
                    t[j] = t[j + 1] - numeric::gauss16_integral(|y| profile.datum(y), nodes[j], nodes[j + 1]);
                }
                Some(t)
            }
        };
        Ok(Self {
            profile: profile.clone(),
            window,
            grid: nodes,
            table,
        })
    }

    /// Oracle with the default grid over the profile's locality radius.
    pub fn for_profile(profile: &Profile) -> Result<Self> {
        Self::new(profile, profile.locality_radius(), crate::defaults::ORACLE_GRID)
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Antiderivative `U0(y)`.
    pub fn potential(&self, y: f64) -> f64 {
        match &self.table {
            None => self.profile.datum_antiderivative(y),
            Some(t) => {
                let h = self.grid[1] - self.grid[0];
                let j = (((y - self.grid[0]) / h).round().max(0.0) as usize).min(self.grid.len() - 1);
                t[j] + numeric::gauss16_integral(|v| self.profile.datum(v), self.grid[j], y)
            }
        }
    }

    fn objective(&self, t: f64, x: f64, y: f64) -> f64 {
        self.potential(y) + (y - x) * (y - x) / (2.0 * t)
    }

    /// Refined interior local minima of the objective, sorted by position.
    fn basins(&self, t: f64, x: f64) -> Result<Vec<Minimizer>> {
        let vals: Vec<f64> = self.grid.iter().map(|&y| self.objective(t, x, y)).collect();
        let n = vals.len();
        let global = (0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        if global == 0 || global == n - 1 {
            return Err(Error::WindowTooSmall {
                y: self.grid[global],
                window: self.window,
            });
        }
        let slope = |y: f64| (self.profile.datum(y) + (y - x) / t, self.profile.datum_prime(y) + 1.0 / t);
        let mut out = Vec::new();
        for j in 1..n - 1 {
            if !(vals[j] <= vals[j - 1] && vals[j] < vals[j + 1]) {
                continue;
            }
            let (lo, hi) = (self.grid[j - 1], self.grid[j + 1]);
            let y = if slope(lo).0 < 0.0 && slope(hi).0 > 0.0 {
                numeric::monotone_root(slope, lo, hi)
            } else {
                numeric::golden_min(|y| self.objective(t, x, y), lo, hi, 1e-14).0
            };
            out.push(Minimizer {
                y,
                u: (x - y) / t,
                value: self.objective(t, x, y),
            });
        }
        Ok(out)
    }
}

/// Entropy solution value at `(t, x)` from the global minimizer.
pub fn lax_oleinik_value(state: &VariationalState, time: Time, x: f64) -> Result<Minimizer> {
    let t = time.t();
    if !(t > 0.0) {
        return Err(Error::InvalidProfile(format!("oracle needs t > 0, got {t}")));
    }
    let basins = state.basins(t, x)?;
    basins
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(Error::BasinDetection { found: 0 })
}

fn two_basins(state: &VariationalState, t: f64, x: f64) -> Result<(Minimizer, Minimizer)> {
    let b = state.basins(t, x)?;
    if b.len() != 2 {
        return Err(Error::BasinDetection { found: b.len() });
    }
    Ok((b[0], b[1]))
}

/// Shock position: the `x` inside the cusp where the two basin minima tie.
pub fn lax_oleinik_shock(state: &VariationalState, time: Time) -> Result<OracleShock> {
    let t = time.t();
    let env = envelope(&state.profile, time)?;
    let (mut lo, mut hi) = (env.x_plus, env.x_minus);
    let mut last = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (left, right) = two_basins(state, t, mid)?;
        last = Some((mid, left, right));
        // right minus left decreases in x
        if right.value - left.value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    let (left, right) = match two_basins(state, t, phi) {
        Ok(pair) => pair,
        Err(e) => match last {
            Some((_, l, r)) => (l, r),
            None => return Err(e),
        },
    };
    Ok(OracleShock {
        tau: time.tau(),
        phi,
        left,
        right,
    })
}
