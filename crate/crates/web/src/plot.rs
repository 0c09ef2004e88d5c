use serde::Serialize;

use shockfit::characteristics::{envelope, solution_value, Branch, Time};
use shockfit::numeric::linspace;
use shockfit::profile::{Profile, R0Kind};
use shockfit::shock::{entropy_solution, integrate_shock, PicardParams, ShockCurve};
use shockfit::{Error, Result};

/// Picard grid used by the demo; coarser than the library default.
pub const DEMO_STEPS: usize = 400;
/// Largest number of points sent back per curve.
pub const MAX_POINTS: usize = 2000;

/// Finite family: `order = k` and the correction is `c x^{2k+2}`.
/// Infinite family: `order = p` and any non-zero correction selects
/// the quadratic `r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    pub infinite: bool,
    pub order: f64,
    pub correction: f64,
}

impl ProfileSpec {
    pub fn parse(family: &str, order: f64, correction: f64) -> Result<Self> {
        let infinite = match family {
            "finite" => false,
            "infinite" => true,
            other => return Err(Error::Config(format!("unknown family {other:?}"))),
        };
        if !correction.is_finite() {
            return Err(Error::Config("correction must be finite".into()));
        }
        Ok(Self {
            infinite,
            order,
            correction,
        })
    }

    pub fn profile(&self) -> Result<Profile> {
        if self.infinite {
            let r0 = if self.correction == 0.0 { R0Kind::Zero } else { R0Kind::Quadratic };
            Profile::infinite(self.order, r0)
        } else {
            if self.order.fract() != 0.0 || !(1.0..=6.0).contains(&self.order) {
                return Err(Error::Config(format!("k must be an integer in 1..=6, got {}", self.order)));
            }
            let k = self.order as u32;
            Profile::finite(k, &[(2 * k + 2, self.correction)])
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnvelopeCurve {
    pub tau: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShockTrace {
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub u_left: Vec<f64>,
    pub u_right: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FieldSlice {
    pub tau: f64,
    pub x: Vec<f64>,
    /// `null` where the value could not be resolved.
    pub u: Vec<Option<f64>>,
    pub shock: Option<f64>,
    pub x_plus: Option<f64>,
    pub x_minus: Option<f64>,
}

fn check_samples(samples: usize) -> Result<usize> {
    if !(2..=MAX_POINTS).contains(&samples) {
        return Err(Error::Config(format!("samples must be in 2..={MAX_POINTS}, got {samples}")));
    }
    Ok(samples)
}

/// Envelope edges on an even grid in `t - t*` (the first node sits one
/// step past blowup).
pub fn envelope_curve(spec: &ProfileSpec, tau_max: f64, samples: usize) -> Result<EnvelopeCurve> {
    let profile = spec.profile()?;
    let n = check_samples(samples)?;
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(Error::Config(format!("tau_max must be positive, got {tau_max}")));
    }
    let mut out = EnvelopeCurve::default();
    for tau in linspace(tau_max / n as f64, tau_max, n) {
        // stop where the local cusp model stops
        let Ok(e) = envelope(&profile, Time::offset(tau)) else {
            break;
        };
        out.tau.push(tau);
        out.x_plus.push(e.x_plus);
        out.x_minus.push(e.x_minus);
    }
    Ok(out)
}

fn demo_curve(profile: &Profile) -> Result<ShockCurve> {
    let params = PicardParams {
        n_steps: DEMO_STEPS,
        ..PicardParams::for_profile(profile)
    };
    integrate_shock(profile, &params)
}

pub fn shock_curve(spec: &ProfileSpec) -> Result<ShockTrace> {
    let profile = spec.profile()?;
    let curve = demo_curve(&profile)?;
    Ok(ShockTrace {
        tau: curve.tau,
        phi: curve.phi,
        u_left: curve.u_left,
        u_right: curve.u_right,
    })
}

pub fn field_slice(spec: &ProfileSpec, tau: f64, half_width: f64, samples: usize) -> Result<FieldSlice> {
    let profile = spec.profile()?;
    let n = check_samples(samples)?;
    if !tau.is_finite() || !(half_width > 0.0) {
        return Err(Error::Config(format!("bad slice t - t* = {tau}, half width {half_width}")));
    }
    let c = profile.center();
    let time = Time::offset(tau);
    let curve = if tau > 0.0 { Some(demo_curve(&profile)?) } else { None };
    let shock = match &curve {
        Some(cv) => Some(cv.phi_at(tau)?),
        None => None,
    };
    let edges = if tau > 0.0 { envelope(&profile, time).ok() } else { None };
    let mut out = FieldSlice {
        tau,
        shock,
        x_plus: edges.map(|e| e.x_plus),
        x_minus: edges.map(|e| e.x_minus),
        ..FieldSlice::default()
    };
    for x in linspace(c - half_width, c + half_width, n) {
        let u = match &curve {
            Some(cv) => entropy_solution(&profile, cv, time, x).map(|v| v.sample().u),
            None => solution_value(&profile, time, x, Branch::Unique).map(|s| s.u),
        };
        out.x.push(x);
        out.u.push(match u {
            Ok(u) => Some(u),
            Err(Error::DerivativeSingular { u, .. }) => Some(u),
            Err(_) => None,
        });
    }
    Ok(out)
}
