//! Characteristic map, cusp geometry, branch classification and inversion.
//!
//! Times are carried as the offset `tau = t - t*` from the blowup time. The
//! built-in families all blow up at `t* = 1`, and past blowup the
//! interesting offsets (down to `exp(-400)` in the infinite family) are far
//! below the resolution of `1 + tau`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::profile::Profile;

/// Blowup time of every built-in profile.
pub const T_STAR: f64 = 1.0;
/// Relative width of the boundary band around `x_plus` and `x_minus`.
pub const BOUNDARY_BAND: f64 = 1e-10;
/// Relative threshold on `1 + t g'(y)` below which derivatives are singular.
pub const SINGULAR_DENOM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Time {
    tau: f64,
}

impl Time {
    /// The time `t* + tau`.
    pub fn offset(tau: f64) -> Self {
        Self { tau }
    }

    pub fn from_t(t: f64) -> Self {
        Self { tau: t - T_STAR }
    }

    pub fn tau(self) -> f64 {
        self.tau
    }

    pub fn t(self) -> f64 {
        T_STAR + self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Zero,
    Plus,
    /// The single preimage before blowup.
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    PreBlowup,
    LeftOnly,
    RightOnly,
    Triple,
    Boundary,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::PreBlowup => "pre_blowup",
            Region::LeftOnly => "left_only",
            Region::RightOnly => "right_only",
            Region::Triple => "triple",
            Region::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Roots {
    pub minus: Option<f64>,
    pub zero: Option<f64>,
    pub plus: Option<f64>,
    pub unique: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchClassification {
    pub tau: f64,
    pub x: f64,
    pub region: Region,
    pub roots: Roots,
}

/// Envelope roots and caustic boundaries at one time.
///
/// `x_plus = x(t, eta_plus)` is the left edge of the cusp and
/// `x_minus = x(t, eta_minus)` the right edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub tau: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub x_plus: f64,
    pub x_minus: f64,
    /// `g(eta_plus)`, the slope of `x_plus(t)`.
    pub slope_plus: f64,
    /// `g(eta_minus)`, the slope of `x_minus(t)`.
    pub slope_minus: f64,
}

impl Envelope {
    pub fn width(&self) -> f64 {
        self.x_minus - self.x_plus
    }

    fn band(&self) -> f64 {
        BOUNDARY_BAND * self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.x_plus && x < self.x_minus
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CuspGeometry {
    pub tau: Vec<f64>,
    pub eta_minus: Vec<f64>,
    pub eta_plus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub tau: f64,
    pub x: f64,
    pub branch: Branch,
    pub y: f64,
    pub u: f64,
    pub du_dt: f64,
    pub du_dx: f64,
    pub denom: f64,
}

impl FieldSample {
    pub fn t(&self) -> f64 {
        T_STAR + self.tau
    }
}

/// `x(t, c + w) - c`, evaluated without forming `1 + t g'`.
fn local_position(profile: &Profile, tau: f64, w: f64) -> f64 {
    (1.0 + tau) * profile.excess(w) - tau * w
}

/// `1 + t g'(c + w)`.
fn local_jacobian(profile: &Profile, tau: f64, w: f64) -> f64 {
    (1.0 + tau) * profile.excess_prime(w) - tau
}

pub fn characteristic_position(profile: &Profile, time: Time, y: f64) -> f64 {
    let c = profile.center();
    c + local_position(profile, time.tau(), y - c)
}

/// Jacobian `1 + t g'(y)` of the characteristic map.
pub fn jacobian(profile: &Profile, time: Time, y: f64) -> f64 {
    local_jacobian(profile, time.tau(), y - profile.center())
}

/// Leading-order guess for the envelope root, used to seed the outward scan.
fn envelope_guess(profile: &Profile, tau: f64) -> f64 {
    if let Some(k) = profile.finite_order() {
        let n = 2.0 * k as f64;
        (tau / (n + 1.0)).powf(1.0 / n)
    } else {
        let p = profile.infinite_order().unwrap_or(1.0);
        let l = tau.ln().abs().max(1.0);
        l.powf(-1.0 / p)
    }
}

/// Root of the jacobian on one side of the center (`side = ±1`), found as
/// the first sign change scanning outward.
fn envelope_side(profile: &Profile, tau: f64, side: f64) -> Result<f64> {
    let radius = profile.locality_radius();
    let jac = |w: f64| local_jacobian(profile, tau, side * w);
    let mut inner = (0.25 * envelope_guess(profile, tau)).min(0.5 * radius);
    let mut guard = 0;
    while jac(inner) >= 0.0 {
        inner *= 0.25;
        guard += 1;
        if guard > 600 || inner == 0.0 {
            return Err(Error::Geometry(format!(
                "jacobian not negative near the center at tau = {tau}"
            )));
        }
    }
    let mut outer = inner;
    loop {
        let next = (outer * 1.3).min(radius);
        if jac(next) > 0.0 {
            let w = numeric::bisect(jac, outer, next);
            return Ok(side * w);
        }
        if next >= radius {
            return Err(Error::Geometry(format!(
                "no envelope root within the locality radius at tau = {tau}"
            )));
        }
        outer = next;
    }
}

/// Envelope roots and cusp boundaries at `time` (which must be past blowup).
pub fn envelope(profile: &Profile, time: Time) -> Result<Envelope> {
    let tau = time.tau();
    if !(tau > 0.0) {
        return Err(Error::NoEnvelope { tau });
    }
    let c = profile.center();
    let wm = envelope_side(profile, tau, -1.0)?;
    let wp = envelope_side(profile, tau, 1.0)?;
    Ok(Envelope {
        tau,
        eta_minus: c + wm,
        eta_plus: c + wp,
        x_plus: c + local_position(profile, tau, wp),
        x_minus: c + local_position(profile, tau, wm),
        slope_plus: profile.speed(c + wp),
        slope_minus: profile.speed(c + wm),
    })
}

pub fn envelope_roots(profile: &Profile, time: Time) -> Result<(f64, f64)> {
    let e = envelope(profile, time)?;
    Ok((e.eta_minus, e.eta_plus))
}

/// Returns `(x_plus, x_minus)`.
pub fn cusp_boundaries(profile: &Profile, time: Time) -> Result<(f64, f64)> {
    let e = envelope(profile, time)?;
    Ok((e.x_plus, e.x_minus))
}

pub fn sample_cusp(profile: &Profile, taus: &[f64]) -> Result<CuspGeometry> {
    let mut g = CuspGeometry::default();
    for &tau in taus {
        let e = envelope(profile, Time::offset(tau))?;
        g.tau.push(tau);
        g.eta_minus.push(e.eta_minus);
        g.eta_plus.push(e.eta_plus);
        g.x_plus.push(e.x_plus);
        g.x_minus.push(e.x_minus);
    }
    Ok(g)
}

/// Solve `x(t, c + w) = c + xi` for `w` on a monotone piece starting at
/// `edge` and extending in direction `dir` until the map turns over at a
/// secondary caustic (if any).
fn invert_open(profile: &Profile, tau: f64, xi: f64, edge: f64, dir: f64) -> Result<f64> {
    let f = |w: f64| local_position(profile, tau, w) - xi;
    let jac = |w: f64| local_jacobian(profile, tau, w);
    // outer pieces are increasing, so the far end must overshoot in direction `dir`
    let target_sign = if dir > 0.0 { 1.0 } else { -1.0 };
    // start just off the envelope root so that the jacobian is clearly positive
    let mut d = (1e-3 * edge.abs()).max(1e-300);
    let mut near = edge;
    let mut far = edge + dir * d;
    let mut bracketed = false;
    for _ in 0..2200 {
        if jac(far) < 0.0 {
            if near == edge {
                break;
            }
            // the piece ends at a fold between `near` and `far`
            let fold = numeric::bisect(jac, near, far);
            if f(fold) * target_sign >= 0.0 {
                far = fold;
                bracketed = true;
            }
            break;
        }
        if f(far) * target_sign >= 0.0 {
            bracketed = true;
            break;
        }
        near = far;
        d *= 2.0;
        far = edge + dir * d;
    }
    if !bracketed {
        return Err(Error::Geometry(format!(
            "no preimage of x = {xi} on the outer branch before a secondary caustic (tau = {tau})"
        )));
    }
    let (lo, hi) = if dir > 0.0 { (edge, far) } else { (far, edge) };
    Ok(numeric::monotone_root(|w| (f(w), jac(w)), lo, hi))
}

fn classify_with(profile: &Profile, tau: f64, x: f64, env: Option<&Envelope>) -> Result<BranchClassification> {
    let c = profile.center();
    let xi = x - c;
    let mut roots = Roots::default();
    let region = match env {
        None => {
            roots.unique = Some(c + invert_open_whole(profile, tau, xi)?);
            Region::PreBlowup
        }
        Some(e) => {
            let band = e.band();
            let (wm, wp) = (e.eta_minus - c, e.eta_plus - c);
            if (x - e.x_plus).abs() <= band {
                roots.minus = Some(c + invert_open(profile, tau, xi, wm, -1.0)?);
                roots.plus = Some(e.eta_plus);
                Region::Boundary
            } else if (x - e.x_minus).abs() <= band {
                roots.minus = Some(e.eta_minus);
                roots.plus = Some(c + invert_open(profile, tau, xi, wp, 1.0)?);
                Region::Boundary
            } else if x < e.x_plus {
                roots.minus = Some(c + invert_open(profile, tau, xi, wm, -1.0)?);
                Region::LeftOnly
            } else if x > e.x_minus {
                roots.plus = Some(c + invert_open(profile, tau, xi, wp, 1.0)?);
                Region::RightOnly
            } else {
                roots.minus = Some(c + invert_open(profile, tau, xi, wm, -1.0)?);
                roots.zero = Some(c + invert_middle(profile, tau, xi, wm, wp));
                roots.plus = Some(c + invert_open(profile, tau, xi, wp, 1.0)?);
                Region::Triple
            }
        }
    };
    Ok(BranchClassification { tau, x, region, roots })
}

fn invert_open_whole(profile: &Profile, tau: f64, xi: f64) -> Result<f64> {
    let f = |w: f64| local_position(profile, tau, w) - xi;
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    invert_open(profile, tau, xi, 0.0, dir)
}

fn invert_middle(profile: &Profile, tau: f64, xi: f64, wm: f64, wp: f64) -> f64 {
    let f = |w: f64| local_position(profile, tau, w) - xi;
    numeric::monotone_root(|w| (f(w), local_jacobian(profile, tau, w)), wm, wp)
}

/// True when both outer branches reach across the whole cusp at `tau`.
pub fn cusp_is_isolated(profile: &Profile, time: Time) -> bool {
    let Ok(env) = envelope(profile, time) else {
        return false;
    };
    let c = profile.center();
    let tau = time.tau();
    invert_open(profile, tau, env.x_plus - c, env.eta_minus - c, -1.0).is_ok()
        && invert_open(profile, tau, env.x_minus - c, env.eta_plus - c, 1.0).is_ok()
}

/// Largest offset `tau <= tau_max` up to which the local cusp stays
/// isolated from secondary caustics (checked on a grid, then bisected).
pub fn isolation_limit(profile: &Profile, tau_max: f64) -> f64 {
    let ok = |tau: f64| cusp_is_isolated(profile, Time::offset(tau));
    if ok(tau_max) {
        return tau_max;
    }
    let grid = numeric::logspace(1e-8 * tau_max, tau_max, 64);
    let mut good = 0.0;
    for &tau in &grid {
        if ok(tau) {
            good = tau;
        } else {
            break;
        }
    }
    if good == 0.0 {
        return 0.0;
    }
    let mut bad = grid[grid.iter().position(|&v| v > good).unwrap_or(grid.len() - 1)];
    for _ in 0..60 {
        let mid = 0.5 * (good + bad);
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

pub fn classify_point(profile: &Profile, time: Time, x: f64) -> Result<BranchClassification> {
    let tau = time.tau();
    if tau <= 0.0 {
        classify_with(profile, tau, x, None)
    } else {
        let env = envelope(profile, time)?;
        classify_with(profile, tau, x, Some(&env))
    }
}

/// Preimage of `x` on one branch, using a precomputed envelope when past blowup.
pub fn invert_with(
    profile: &Profile,
    time: Time,
    x: f64,
    branch: Branch,
    env: Option<&Envelope>,
) -> Result<f64> {
    let tau = time.tau();
    let c = profile.center();
    let xi = x - c;
    let not_present = || -> Result<f64> {
        Err(Error::BranchNotPresent {
            branch,
            classification: Box::new(classify_with(profile, tau, x, env)?),
        })
    };
    let e = match env {
        None if tau <= 0.0 => {
            return match branch {
                Branch::Unique => Ok(c + invert_open_whole(profile, tau, xi)?),
                _ => not_present(),
            };
        }
        None => return Err(Error::NoEnvelope { tau }),
        Some(e) => e,
    };
    let band = e.band();
    let (wm, wp) = (e.eta_minus - c, e.eta_plus - c);
    match branch {
        Branch::Unique => not_present(),
        Branch::Minus => {
            if x > e.x_minus + band {
                not_present()
            } else if x >= e.x_minus - band {
                Ok(e.eta_minus)
            } else {
                Ok(c + invert_open(profile, tau, xi, wm, -1.0)?)
            }
        }
        Branch::Plus => {
            if x < e.x_plus - band {
                not_present()
            } else if x <= e.x_plus + band {
                Ok(e.eta_plus)
            } else {
                Ok(c + invert_open(profile, tau, xi, wp, 1.0)?)
            }
        }
        Branch::Zero => {
            if x < e.x_plus - band || x > e.x_minus + band {
                not_present()
            } else if x <= e.x_plus + band {
                Ok(e.eta_plus)
            } else if x >= e.x_minus - band {
                Ok(e.eta_minus)
            } else {
                Ok(c + invert_middle(profile, tau, xi, wm, wp))
            }
        }
    }
}

pub fn invert_branch(profile: &Profile, time: Time, x: f64, branch: Branch) -> Result<f64> {
    if time.tau() > 0.0 {
        let env = envelope(profile, time)?;
        invert_with(profile, time, x, branch, Some(&env))
    } else {
        invert_with(profile, time, x, branch, None)
    }
}

/// Field values carried by the characteristic through `y`.
pub fn sample_at_root(profile: &Profile, time: Time, x: f64, branch: Branch, y: f64) -> Result<FieldSample> {
    let tau = time.tau();
    let w = y - profile.center();
    let qp = profile.excess_prime(w);
    let denom = (1.0 + tau) * qp - tau;
    let u = profile.datum(y);
    let scale = tau.abs() + (1.0 + tau) * qp.abs();
    if denom.abs() <= SINGULAR_DENOM * scale {
        return Err(Error::DerivativeSingular { u, denom });
    }
    let du_dx = profile.datum_prime(y) / denom;
    let du_dt = -profile.flux().speed(u) * du_dx;
    Ok(FieldSample {
        tau,
        x,
        branch,
        y,
        u,
        du_dt,
        du_dx,
        denom,
    })
}

pub fn solution_value(profile: &Profile, time: Time, x: f64, branch: Branch) -> Result<FieldSample> {
    let y = invert_branch(profile, time, x, branch)?;
    sample_at_root(profile, time, x, branch, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::R0Kind;

    fn cubic() -> Profile {
        Profile::finite(1, &[]).unwrap()
    }

    #[test]
    fn characteristic_position_examples() {
        let p = cubic();
        assert_eq!(characteristic_position(&p, Time::from_t(0.0), 0.3), 0.3);
        assert_eq!(characteristic_position(&p, Time::from_t(2.0), 1.0), 1.0);
        let x = characteristic_position(&p, Time::from_t(2.0), 0.5f64.sqrt());
        assert!(x.abs() < 1e-15);
    }

    #[test]
    fn envelope_of_cubic() {
        let p = cubic();
        let t = 1.03;
        let e = envelope(&p, Time::from_t(t)).unwrap();
        let eta = ((t - 1.0) / (3.0 * t)).sqrt();
        assert!((e.eta_plus - eta).abs() < 1e-14);
        assert!((e.eta_minus + eta).abs() < 1e-14);
        assert!((e.eta_plus - 0.0985329).abs() < 1e-7);
        assert!((e.x_minus - 0.0019707).abs() < 1e-7);
        assert!((e.x_plus + 0.0019707).abs() < 1e-7);
        assert!(matches!(
            envelope(&p, Time::from_t(1.0)),
            Err(Error::NoEnvelope { .. })
        ));
    }

    #[test]
    fn envelope_slope_identity() {
        let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
        let tau = 0.02;
        let h = 1e-6;
        let a = envelope(&p, Time::offset(tau - h)).unwrap();
        let b = envelope(&p, Time::offset(tau + h)).unwrap();
        let m = envelope(&p, Time::offset(tau)).unwrap();
        let dxp = (b.x_plus - a.x_plus) / (2.0 * h);
        let dxm = (b.x_minus - a.x_minus) / (2.0 * h);
        assert!((dxp - m.slope_plus).abs() < 1e-7);
        assert!((dxm - m.slope_minus).abs() < 1e-7);
    }

    #[test]
    fn classification_examples() {
        let p = cubic();
        let c = classify_point(&p, Time::from_t(0.5), 0.2).unwrap();
        assert_eq!(c.region, Region::PreBlowup);
        assert!(c.roots.unique.is_some());
        let c = classify_point(&p, Time::from_t(2.0), 0.0).unwrap();
        assert_eq!(c.region, Region::Triple);
        let h = 0.5f64.sqrt();
        assert!((c.roots.minus.unwrap() + h).abs() < 1e-14);
        assert!(c.roots.zero.unwrap().abs() < 1e-14);
        assert!((c.roots.plus.unwrap() - h).abs() < 1e-14);
        let (_, xm) = cusp_boundaries(&p, Time::from_t(2.0)).unwrap();
        assert!((xm - 0.2722).abs() < 1e-4);
        let c = classify_point(&p, Time::from_t(2.0), 0.5).unwrap();
        assert_eq!(c.region, Region::RightOnly);
        let c = classify_point(&p, Time::from_t(2.0), xm).unwrap();
        assert_eq!(c.region, Region::Boundary);
    }

    #[test]
    fn inversion_examples() {
        let p = cubic();
        let y = invert_branch(&p, Time::from_t(2.0), 0.0, Branch::Plus).unwrap();
        assert!((y - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        let y = invert_branch(&p, Time::from_t(2.0), 0.1, Branch::Plus).unwrap();
        assert!((-y + 2.0 * y * y * y - 0.1).abs() < 1e-14);
        assert!((y - 0.7527).abs() < 1e-4);
        let y = invert_branch(&p, Time::from_t(0.5), 0.0, Branch::Unique).unwrap();
        assert_eq!(y, 0.0);
        let err = invert_branch(&p, Time::from_t(2.0), 0.5, Branch::Minus).unwrap_err();
        match err {
            Error::BranchNotPresent { classification, .. } => {
                assert_eq!(classification.region, Region::RightOnly)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solution_value_examples() {
        let p = cubic();
        let s = solution_value(&p, Time::from_t(0.5), 0.0, Branch::Unique).unwrap();
        assert_eq!(s.u, 0.0);
        assert!((s.du_dx + 2.0).abs() < 1e-15);
        assert_eq!(s.du_dt + p.speed(s.y) * s.du_dx, 0.0);
        let e = envelope(&p, Time::from_t(1.5)).unwrap();
        let err = solution_value(&p, Time::from_t(1.5), e.x_minus, Branch::Minus).unwrap_err();
        assert!(matches!(err, Error::DerivativeSingular { .. }));
    }

    #[test]
    fn infinite_family_envelope_at_tiny_offsets() {
        let p = Profile::infinite(2.0, R0Kind::Zero).unwrap();
        let tau = (-400.0f64).exp();
        let e = envelope(&p, Time::offset(tau)).unwrap();
        assert!(e.x_plus < 0.0 && e.x_minus > 0.0);
        assert!(e.eta_plus > 0.0 && e.eta_minus < 0.0);
        assert!(jacobian(&p, Time::offset(tau), e.eta_plus).abs() < 1e-12 * tau);
        let xm = 0.3 * e.x_minus;
        let c = classify_point(&p, Time::offset(tau), xm).unwrap();
        assert_eq!(c.region, Region::Triple);
        for y in [c.roots.minus, c.roots.zero, c.roots.plus].into_iter().flatten() {
            let r = characteristic_position(&p, Time::offset(tau), y) - xm;
            assert!(r.abs() <= 1e-12 * xm.abs());
        }
    }
}
