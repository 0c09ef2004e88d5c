//! Shock curves issuing from the blowup point.
//!
//! Near blowup the Rankine–Hugoniot ODE `phi' = a(y+(t, phi), y-(t, phi))` is
//! singular, so the curve is first built in rescaled variables `(s, lambda)`
//! by Picard iteration on the integral form of the rescaled equation, then
//! optionally continued in physical time with an adaptive Runge–Kutta
//! scheme.
//!
//! Finite family: `tau = s^{2k}`, `phi = s^{2k+1} lambda`, and
//! `s lambda' + (2k+2) lambda = D(s, lambda)` with
//! `D = lambda + (2k/s) a(y+, y-)`.
//!
//! Infinite family: `tau = exp(-s^{-p})`, `phi = s tau lambda`, and
//! `lambda(s) = s^{-2} ∫_{v_s}^∞ exp(v_s - v) w^2 d(w, lambda(w)) dv` with
//! `v = w^{-p}` and `d = a/s + s^p lambda / p`.

use serde::{Deserialize, Serialize};

use crate::characteristics::{
    envelope, invert_with, sample_at_root, solution_value, Branch, Envelope, FieldSample, Time,
};
use crate::error::{Error, Result};
use crate::numeric;
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Regime {
    #[serde(rename = "finite")]
    Finite { k: u32 },
    #[serde(rename = "infinite")]
    Infinite { p: f64 },
}

impl Regime {
    pub fn of(profile: &Profile) -> Self {
        match (profile.finite_order(), profile.infinite_order()) {
            (Some(k), _) => Regime::Finite { k },
            (None, Some(p)) => Regime::Infinite { p },
            (None, None) => unreachable!("every profile has a degeneracy order"),
        }
    }

    pub fn tau_of_s(self, s: f64) -> f64 {
        match self {
            Regime::Finite { k } => s.powi(2 * k as i32),
            Regime::Infinite { p } => (-s.powf(-p)).exp(),
        }
    }

    pub fn s_of_tau(self, tau: f64) -> f64 {
        match self {
            Regime::Finite { k } => tau.powf(1.0 / (2.0 * k as f64)),
            Regime::Infinite { p } => tau.ln().abs().powf(-1.0 / p),
        }
    }

    /// `phi / lambda` at parameter `s`.
    pub fn scale(self, s: f64) -> f64 {
        match self {
            Regime::Finite { k } => s.powi(2 * k as i32 + 1),
            Regime::Infinite { p } => s * (-s.powf(-p)).exp(),
        }
    }

    /// `d lambda / d s` for a curve point given in physical form.
    fn lambda_slope(self, s: f64, lambda: f64, phi_prime: f64) -> f64 {
        match self {
            Regime::Finite { k } => {
                let n = 2 * k as i32;
                (phi_prime * n as f64 * s.powi(n - 1) - (n + 1) as f64 * s.powi(n) * lambda)
                    / s.powi(n + 1)
            }
            Regime::Infinite { p } => {
                let sp = s.powf(-p);
                (phi_prime * p * sp / s - (1.0 + p * sp) * lambda) / s
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PicardLog {
    pub sweeps: usize,
    pub updates: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Infinite family only: `|lambda(s_min)| / s_min` from the extrapolated tail.
    pub start_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockCurve {
    pub regime: Regime,
    pub center: f64,
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `d lambda / d s`.
    pub lambda_prime: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub y_minus: Vec<f64>,
    pub y_plus: Vec<f64>,
    pub u_left: Vec<f64>,
    pub u_right: Vec<f64>,
    pub rh_residual: Vec<f64>,
    pub entropy_margin: Vec<f64>,
    pub picard: Option<PicardLog>,
}

impl ShockCurve {
    fn empty(regime: Regime, center: f64) -> Self {
        Self {
            regime,
            center,
            s: vec![],
            lambda: vec![],
            lambda_prime: vec![],
            tau: vec![],
            phi: vec![],
            phi_prime: vec![],
            y_minus: vec![],
            y_plus: vec![],
            u_left: vec![],
            u_right: vec![],
            rh_residual: vec![],
            entropy_margin: vec![],
            picard: None,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn tau_range(&self) -> (f64, f64) {
        let lo = self.tau.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Shock position at `tau`, by cubic Hermite interpolation of `lambda(s)`.
    pub fn phi_at(&self, tau: f64) -> Result<f64> {
        let (lo, hi) = self.tau_range();
        if !(tau >= lo && tau <= hi) || self.is_empty() {
            return Err(Error::OutOfRange { tau, lo, hi });
        }
        if tau == 0.0 {
            return Ok(self.center);
        }
        let s = self.regime.s_of_tau(tau);
        let n = self.s.len();
        let i = match self.s.partition_point(|&v| v <= s) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        if n == 1 {
            return Ok(self.phi[0]);
        }
        let lambda = numeric::hermite(
            self.s[i],
            self.s[i + 1],
            self.lambda[i],
            self.lambda[i + 1],
            self.lambda_prime[i],
            self.lambda_prime[i + 1],
            s,
        );
        Ok(self.center + self.regime.scale(s) * lambda)
    }

    /// Largest `|lambda(s)| / s` over the grid (nodes with `s > 0`).
    pub fn lambda_over_s(&self) -> f64 {
        self.s
            .iter()
            .zip(&self.lambda)
            .filter(|(s, _)| **s > 0.0)
            .map(|(s, l)| l.abs() / s)
            .fold(0.0, f64::max)
    }

    fn push_node(&mut self, profile: &Profile, s: f64, lambda: f64, lambda_prime: f64, tau: f64, trace: &Trace) {
        let phi = self.center + self.regime.scale(s) * lambda;
        let f = profile.flux();
        let (ul, ur) = (trace.u_left, trace.u_right);
        let jump = f.value(ur) - f.value(ul);
        self.s.push(s);
        self.lambda.push(lambda);
        self.lambda_prime.push(lambda_prime);
        self.tau.push(tau);
        self.phi.push(phi);
        self.phi_prime.push(trace.speed);
        self.y_minus.push(trace.y_minus);
        self.y_plus.push(trace.y_plus);
        self.u_left.push(ul);
        self.u_right.push(ur);
        self.rh_residual.push((trace.speed * (ur - ul) - jump).abs());
        self.entropy_margin
            .push((f.speed(ul) - trace.speed).min(trace.speed - f.speed(ur)));
    }
}

/// Both outer preimages of a point inside the cusp, and the chord speed.
#[derive(Debug, Clone, Copy)]
struct Trace {
    y_minus: f64,
    y_plus: f64,
    u_left: f64,
    u_right: f64,
    speed: f64,
}

fn trace_at(profile: &Profile, env: &Envelope, x: f64) -> Result<Trace> {
    if !env.contains(x) {
        return Err(Error::OutsideCusp {
            x,
            x_plus: env.x_plus,
            x_minus: env.x_minus,
        });
    }
    let time = Time::offset(env.tau);
    let y_minus = invert_with(profile, time, x, Branch::Minus, Some(env))?;
    let y_plus = invert_with(profile, time, x, Branch::Plus, Some(env))?;
    let u_left = profile.datum(y_minus);
    let u_right = profile.datum(y_plus);
    Ok(Trace {
        y_minus,
        y_plus,
        u_left,
        u_right,
        speed: profile.chord_of_states(u_right, u_left),
    })
}

fn trace_at_blowup(profile: &Profile) -> Trace {
    let c = profile.center();
    let u = profile.datum(c);
    Trace {
        y_minus: c,
        y_plus: c,
        u_left: u,
        u_right: u,
        speed: profile.flux().speed(u),
    }
}

fn require_finite(profile: &Profile) -> Result<u32> {
    profile
        .finite_order()
        .ok_or_else(|| Error::InvalidProfile("expected a finite-degeneracy profile".into()))
}

fn require_infinite(profile: &Profile) -> Result<f64> {
    profile
        .infinite_order()
        .ok_or_else(|| Error::InvalidProfile("expected an infinite-degeneracy profile".into()))
}

fn finite_rhs_with(profile: &Profile, k: u32, s: f64, env: &Envelope, lambda: f64) -> Result<(f64, Trace)> {
    let x = profile.center() + s.powi(2 * k as i32 + 1) * lambda;
    let tr = trace_at(profile, env, x)?;
    Ok((lambda + 2.0 * k as f64 / s * tr.speed, tr))
}

fn infinite_rhs_with(profile: &Profile, p: f64, s: f64, env: &Envelope, lambda: f64) -> Result<(f64, Trace)> {
    let x = profile.center() + s * env.tau * lambda;
    let tr = trace_at(profile, env, x)?;
    Ok((tr.speed / s + s.powf(p) * lambda / p, tr))
}

/// `D(s, lambda)` for the finite family.
pub fn rescaled_rhs_finite(profile: &Profile, s: f64, lambda: f64) -> Result<f64> {
    let k = require_finite(profile)?;
    let env = envelope(profile, Time::offset(s.powi(2 * k as i32)))?;
    Ok(finite_rhs_with(profile, k, s, &env, lambda)?.0)
}

/// `d(s, lambda)` for the infinite family.
pub fn rescaled_rhs_infinite(profile: &Profile, s: f64, lambda: f64) -> Result<f64> {
    let p = require_infinite(profile)?;
    let tau = Regime::Infinite { p }.tau_of_s(s);
    if !(tau >= 1e-300) {
        return Err(Error::STooSmall { s });
    }
    let env = envelope(profile, Time::offset(tau))?;
    Ok(infinite_rhs_with(profile, p, s, &env, lambda)?.0)
}

/// Fraction of the isolation limit used as the default upper end.
pub const ISOLATION_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    pub s_min: f64,
    pub s_max: f64,
    pub n_steps: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl PicardParams {
    pub fn finite(k: u32) -> Self {
        Self {
            s_min: 0.0,
            s_max: crate::defaults::s_max_finite(k),
            n_steps: crate::defaults::SHOCK_STEPS,
            tol: crate::defaults::PICARD_TOL,
            max_sweeps: crate::defaults::PICARD_MAX_SWEEPS,
        }
    }

    pub fn infinite(p: f64) -> Self {
        Self {
            s_min: crate::defaults::S_MIN_INFINITE,
            s_max: crate::defaults::s_max_infinite(p),
            n_steps: crate::defaults::SHOCK_STEPS,
            tol: crate::defaults::PICARD_TOL,
            max_sweeps: crate::defaults::PICARD_MAX_SWEEPS,
        }
    }

    /// Defaults for the profile's family, with the upper end pulled back to
    /// the range where the local cusp is isolated from secondary caustics.
    pub fn for_profile(profile: &Profile) -> Self {
        let regime = Regime::of(profile);
        let mut params = match regime {
            Regime::Finite { k } => Self::finite(k),
            Regime::Infinite { p } => Self::infinite(p),
        };
        let tau_max = regime.tau_of_s(params.s_max);
        let tau_iso = crate::characteristics::isolation_limit(profile, tau_max);
        if tau_iso < tau_max {
            params.s_max = regime.s_of_tau(ISOLATION_MARGIN * tau_iso).max(params.s_min);
        }
        params
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps < 8 || !(self.tol > 0.0) || !(self.s_max > self.s_min) || self.max_sweeps == 0 {
            return Err(Error::InvalidProfile(format!("bad shock grid parameters {self:?}")));
        }
        Ok(())
    }
}

/// Sweep bookkeeping shared by both Picard solvers.
struct SweepMonitor {
    log: PicardLog,
    growth: usize,
}

impl SweepMonitor {
    fn new() -> Self {
        Self {
            log: PicardLog::default(),
            growth: 0,
        }
    }

    /// Record one sweep; returns true once the tolerance is met.
    fn record(&mut self, update: f64, tol: f64, max_sweeps: usize) -> Result<bool> {
        if let Some(&prev) = self.log.updates.last() {
            if prev > 0.0 {
                self.log.ratios.push(update / prev);
            }
            if update > prev {
                self.growth += 1;
            } else {
                self.growth = 0;
            }
        }
        self.log.updates.push(update);
        self.log.sweeps += 1;
        if !update.is_finite() || self.growth >= 5 {
            return Err(Error::NonContraction {
                updates: self.log.updates.clone(),
            });
        }
        if update < tol {
            return Ok(true);
        }
        if self.log.sweeps >= max_sweeps {
            return Err(Error::NotConverged {
                sweeps: self.log.sweeps,
                last: update,
            });
        }
        Ok(false)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Picard solution of the finite-family rescaled equation on `[0, s_max]`.
pub fn integrate_shock_finite(profile: &Profile, params: &PicardParams) -> Result<ShockCurve> {
    let k = require_finite(profile)?;
    params.validate()?;
    let regime = Regime::Finite { k };
    let n = params.n_steps;
    let h = params.s_max / n as f64;
    let s: Vec<f64> = (0..=n).map(|i| h * i as f64).collect();
    let envs: Vec<Option<Envelope>> = s
        .iter()
        .map(|&si| {
            if si == 0.0 {
                Ok(None)
            } else {
                envelope(profile, Time::offset(regime.tau_of_s(si))).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    // cell weights of the product rule: sigma^{2k+1} times the linear
    // interpolant of D, integrated exactly
    let m = 2 * k as i32 + 1;
    let (gx, gw) = numeric::gauss_legendre(k as usize + 3);
    let mut w_left = vec![0.0; n + 1];
    let mut w_right = vec![0.0; n + 1];
    for i in 1..=n {
        let (a, b) = (s[i - 1], s[i]);
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        for (x, w) in gx.iter().zip(&gw) {
            let sig = mid + half * x;
            let base = w * half * sig.powi(m);
            w_left[i] += base * (b - sig) / h;
            w_right[i] += base * (sig - a) / h;
        }
    }

    let rhs = |i: usize, lambda: f64| -> Result<(f64, Trace)> {
        match &envs[i] {
            None => Ok((0.0, trace_at_blowup(profile))),
            Some(env) => finite_rhs_with(profile, k, s[i], env, lambda),
        }
    };

    let mut lambda = vec![0.0; n + 1];
    let mut monitor = SweepMonitor::new();
    loop {
        let d: Vec<f64> = (0..=n).map(|i| rhs(i, lambda[i]).map(|r| r.0)).collect::<Result<_>>()?;
        let mut next = vec![0.0; n + 1];
        let mut moment = 0.0;
        for i in 1..=n {
            moment += w_left[i] * d[i - 1] + w_right[i] * d[i];
            next[i] = moment / s[i].powi(m + 1);
        }
        let update = sup_diff(&next, &lambda);
        lambda = next;
        if monitor.record(update, params.tol, params.max_sweeps)? {
            break;
        }
    }

    let mut curve = ShockCurve::empty(regime, profile.center());
    let mut slopes = vec![0.0; n + 1];
    let mut traces = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (d, tr) = rhs(i, lambda[i])?;
        if i > 0 {
            slopes[i] = (d - (m + 1) as f64 * lambda[i]) / s[i];
        }
        traces.push(tr);
    }
    slopes[0] = lambda[1] / s[1];
    for i in 0..=n {
        curve.push_node(profile, s[i], lambda[i], slopes[i], regime.tau_of_s(s[i]), &traces[i]);
    }
    curve.picard = Some(monitor.log);
    Ok(curve)
}

/// `∫_0^Δ e^{-w} w dw / Δ`, accurate for small `Δ`.
fn ramp_weight(delta: f64) -> f64 {
    if delta < 1e-3 {
        delta * (0.5 - delta * (1.0 / 3.0 - delta / 8.0))
    } else {
        (1.0 - (1.0 + delta) * (-delta).exp()) / delta
    }
}

/// `int_0^inf e^{-w} G(v0 + w) dw` with `G` extrapolated beyond the grid as
/// the power law through `(v0, g0)` and `(v1, g1)`; a frozen value when the
/// two samples do not share a sign.
fn tail_memory(g0: f64, g1: f64, v0: f64, v1: f64) -> f64 {
    if !(g0 * g1 > 0.0) {
        return g0;
    }
    let m = -(g1 / g0).ln() / (v1 / v0).ln();
    let f = |w: f64| (-w).exp() * ((v0 + w) / v0).powf(-m);
    let panels = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let total: f64 = panels.windows(2).map(|ab| numeric::gauss16_integral(f, ab[0], ab[1])).sum();
    g0 * total
}

/// Picard solution of the infinite-family rescaled equation on `[s_min, s_max]`.
///
/// The memory integral is advanced in the variable `v = s^{-p}` with the
/// kernel `exp(v_i - v)` applied one cell at a time; only exponentials of
/// non-positive differences are ever formed. The part of the integral below
/// `s_min` comes from a power-law extrapolation of the integrand.
pub fn integrate_shock_infinite(profile: &Profile, params: &PicardParams) -> Result<ShockCurve> {
    let p = require_infinite(profile)?;
    params.validate()?;
    let regime = Regime::Infinite { p };
    let n = params.n_steps;
    let h = (params.s_max - params.s_min) / n as f64;
    let s: Vec<f64> = (0..=n).map(|i| params.s_min + h * i as f64).collect();
    let tau_min = regime.tau_of_s(s[0]);
    if !(params.s_min > 0.0) || !(tau_min >= 1e-300) {
        return Err(Error::STooSmall { s: params.s_min });
    }
    let v: Vec<f64> = s.iter().map(|si| si.powf(-p)).collect();
    let envs: Vec<Envelope> = s
        .iter()
        .map(|&si| envelope(profile, Time::offset(regime.tau_of_s(si))))
        .collect::<Result<_>>()?;
    for i in 1..=n {
        let exponent = v[i] - v[i - 1];
        if exponent > 0.0 {
            return Err(Error::KernelOverflow { exponent });
        }
    }

    let rhs = |i: usize, lambda: f64| infinite_rhs_with(profile, p, s[i], &envs[i], lambda);

    let mut lambda = vec![0.0; n + 1];
    let mut monitor = SweepMonitor::new();
    loop {
        let d: Vec<f64> = (0..=n).map(|i| rhs(i, lambda[i]).map(|r| r.0)).collect::<Result<_>>()?;
        let g: Vec<f64> = (0..=n).map(|i| s[i] * s[i] * d[i]).collect();
        let mut next = vec![0.0; n + 1];
        let mut memory = tail_memory(g[0], g[1], v[0], v[1]);
        next[0] = memory / (s[0] * s[0]);
        for i in 1..=n {
            let delta = v[i - 1] - v[i];
            let decay = (-delta).exp();
            memory = decay * memory + g[i] * (-(-delta).exp_m1()) + (g[i - 1] - g[i]) * ramp_weight(delta);
            next[i] = memory / (s[i] * s[i]);
        }
        let update = sup_diff(&next, &lambda);
        lambda = next;
        if monitor.record(update, params.tol, params.max_sweeps)? {
            break;
        }
    }
    monitor.log.start_ratio = Some(lambda[0].abs() / s[0]);

    let mut curve = ShockCurve::empty(regime, profile.center());
    for i in 0..=n {
        let (d, tr) = rhs(i, lambda[i])?;
        let slope = -2.0 * lambda[i] / s[i] + p * s[i].powf(-p - 1.0) * (d - lambda[i]);
        curve.push_node(profile, s[i], lambda[i], slope, regime.tau_of_s(s[i]), &tr);
    }
    curve.picard = Some(monitor.log);
    Ok(curve)
}

/// Build the shock curve with the solver matching the profile's family.
pub fn integrate_shock(profile: &Profile, params: &PicardParams) -> Result<ShockCurve> {
    match Regime::of(profile) {
        Regime::Finite { .. } => integrate_shock_finite(profile, params),
        Regime::Infinite { .. } => integrate_shock_infinite(profile, params),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step as a fraction of `|t_end - t0|`.
    pub first_step: f64,
    pub max_steps: usize,
}

impl Default for OdeParams {
    fn default() -> Self {
        Self {
            rtol: crate::defaults::ODE_RTOL,
            atol: crate::defaults::ODE_ATOL,
            first_step: 1e-3,
            max_steps: 200_000,
        }
    }
}

fn shock_speed(profile: &Profile, tau: f64, phi: f64) -> Result<(f64, Trace)> {
    let env = envelope(profile, Time::offset(tau))?;
    let tr = trace_at(profile, &env, phi)?;
    Ok((tr.speed, tr))
}

/// March the Rankine–Hugoniot ODE from `seed = (time, phi)` to `t_end` with
/// the Dormand–Prince 5(4) pair. Steps whose stages leave the cusp are
/// rejected and retried with a smaller step.
pub fn continue_shock_ode(profile: &Profile, seed: (Time, f64), t_end: Time, opts: &OdeParams) -> Result<ShockCurve> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let regime = Regime::of(profile);
    let (t0, phi0) = (seed.0.tau(), seed.1);
    let t1 = t_end.tau();
    if !(t0 > 0.0) || !(t1 > 0.0) {
        return Err(Error::NoEnvelope { tau: t0.min(t1) });
    }
    let span = t1 - t0;
    let dir = span.signum();
    let mut curve = ShockCurve::empty(regime, profile.center());
    let record = |curve: &mut ShockCurve, tau: f64, phi: f64, tr: &Trace| {
        let s = regime.s_of_tau(tau);
        let lambda = (phi - curve.center) / regime.scale(s);
        let slope = regime.lambda_slope(s, lambda, tr.speed);
        curve.push_node(profile, s, lambda, slope, tau, tr);
    };
    let (mut k1, tr0) = shock_speed(profile, t0, phi0)?;
    record(&mut curve, t0, phi0, &tr0);
    if span == 0.0 {
        return Ok(curve);
    }
    let (mut tau, mut phi) = (t0, phi0);
    let mut step = opts.first_step * span.abs();
    for _ in 0..opts.max_steps {
        if (t1 - tau) * dir <= 0.0 {
            break;
        }
        step = step.min((t1 - tau).abs());
        if step <= 1e-15 * tau.abs().max(1e-300) {
            return Err(Error::StepUnderflow { tau });
        }
        let hstep = dir * step;
        let mut k = [0.0; 7];
        k[0] = k1;
        let mut failed = false;
        let mut last_trace = None;
        for j in 1..7 {
            let mut y = phi;
            for (l, kl) in k.iter().enumerate().take(j) {
                y += hstep * A[j][l] * kl;
            }
            match shock_speed(profile, tau + C[j] * hstep, y) {
                Ok((v, tr)) => {
                    k[j] = v;
                    if j == 6 {
                        last_trace = Some((y, tr));
                    }
                }
                Err(Error::OutsideCusp { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            step *= 0.25;
            continue;
        }
        let (y_new, tr_new) = last_trace.expect("seventh stage evaluated");
        let err: f64 = hstep * E.iter().zip(&k).map(|(e, kv)| e * kv).sum::<f64>();
        let scale = opts.atol + opts.rtol * phi.abs().max(y_new.abs());
        let ratio = err.abs() / scale;
        if ratio <= 1.0 {
            tau += hstep;
            phi = y_new;
            k1 = k[6];
            record(&mut curve, tau, phi, &tr_new);
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).min(5.0) };
            step *= grow;
        } else {
            step *= (0.9 * ratio.powf(-0.2)).max(0.2);
        }
    }
    if (t1 - tau) * dir > 0.0 {
        return Err(Error::StepUnderflow { tau });
    }
    Ok(curve)
}

/// Value of the entropy solution built from `curve`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntropyValue {
    Smooth(FieldSample),
    /// On the shock: left and right traces.
    Jump { left: FieldSample, right: FieldSample },
}

impl EntropyValue {
    /// The smooth value, or the left trace on the shock.
    pub fn sample(&self) -> &FieldSample {
        match self {
            EntropyValue::Smooth(s) => s,
            EntropyValue::Jump { left, .. } => left,
        }
    }
}

pub fn entropy_solution(profile: &Profile, curve: &ShockCurve, time: Time, x: f64) -> Result<EntropyValue> {
    if time.tau() <= 0.0 {
        return solution_value(profile, time, x, Branch::Unique).map(EntropyValue::Smooth);
    }
    let phi = curve.phi_at(time.tau())?;
    let env = envelope(profile, time)?;
    let branch_sample = |branch: Branch| -> Result<FieldSample> {
        let y = invert_with(profile, time, x, branch, Some(&env))?;
        sample_at_root(profile, time, x, branch, y)
    };
    if x < phi {
        branch_sample(Branch::Minus).map(EntropyValue::Smooth)
    } else if x > phi {
        branch_sample(Branch::Plus).map(EntropyValue::Smooth)
    } else {
        Ok(EntropyValue::Jump {
            left: branch_sample(Branch::Minus)?,
            right: branch_sample(Branch::Plus)?,
        })
    }
}

/// Terms of the integral conservation law on a space-time rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationCheck {
    pub mass_before: f64,
    pub mass_after: f64,
    pub flux_left: f64,
    pub flux_right: f64,
    /// `mass_after - mass_before + flux_right - flux_left`.
    pub balance: f64,
}

fn entropy_u(profile: &Profile, curve: &ShockCurve, time: Time, x: f64) -> Result<f64> {
    match entropy_solution(profile, curve, time, x) {
        Ok(v) => Ok(v.sample().u),
        Err(Error::DerivativeSingular { u, .. }) => Ok(u),
        Err(e) => Err(e),
    }
}

fn panel_integral<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, panels: usize) -> Result<f64> {
    let (gx, gw) = numeric::gauss16();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for j in 0..panels {
        let lo = a + h * j as f64;
        let mid = lo + 0.5 * h;
        for (x, w) in gx.iter().zip(gw) {
            total += w * 0.5 * h * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(total)
}

/// Weak-form balance of `u_t + f(u)_x = 0` over `[t1, t2] x [x_left, x_right]`.
/// The space integrals are split at the shock.
pub fn conservation_balance(
    profile: &Profile,
    curve: &ShockCurve,
    t1: Time,
    t2: Time,
    x_left: f64,
    x_right: f64,
) -> Result<ConservationCheck> {
    const PANELS: usize = 32;
    let mass = |time: Time| -> Result<f64> {
        let u = |x: f64| entropy_u(profile, curve, time, x);
        if time.tau() <= 0.0 {
            return panel_integral(u, x_left, x_right, PANELS);
        }
        let phi = curve.phi_at(time.tau())?.clamp(x_left, x_right);
        Ok(panel_integral(u, x_left, phi, PANELS)? + panel_integral(u, phi, x_right, PANELS)?)
    };
    let f = profile.flux();
    let edge_flux = |x: f64| -> Result<f64> {
        let g = |tau: f64| entropy_u(profile, curve, Time::offset(tau), x).map(|u| f.value(u));
        let (a, b) = (t1.tau(), t2.tau());
        if a < 0.0 && b > 0.0 {
            Ok(panel_integral(g, a, 0.0, PANELS)? + panel_integral(g, 0.0, b, PANELS)?)
        } else {
            panel_integral(g, a, b, PANELS)
        }
    };
    let mass_before = mass(t1)?;
    let mass_after = mass(t2)?;
    let flux_left = edge_flux(x_left)?;
    let flux_right = edge_flux(x_right)?;
    Ok(ConservationCheck {
        mass_before,
        mass_after,
        flux_left,
        flux_right,
        balance: mass_after - mass_before + flux_right - flux_left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::R0Kind;

    #[test]
    fn odd_profiles_have_flat_rhs() {
        let p = Profile::finite(1, &[]).unwrap();
        for &s in &[0.01, 0.1, 0.4] {
            assert!(rescaled_rhs_finite(&p, s, 0.0).unwrap().abs() < 1e-14);
        }
        let q = Profile::infinite(1.0, R0Kind::Zero).unwrap();
        for &s in &[0.06, 0.2, 0.4] {
            assert!(rescaled_rhs_infinite(&q, s, 0.0).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_rejects_points_outside_cusp() {
        let p = Profile::finite(1, &[]).unwrap();
        assert!(matches!(
            rescaled_rhs_finite(&p, 0.1, 5.0),
            Err(Error::OutsideCusp { .. })
        ));
        let q = Profile::infinite(2.0, R0Kind::Zero).unwrap();
        assert!(matches!(
            rescaled_rhs_infinite(&q, 0.03, 0.0),
            Err(Error::STooSmall { .. })
        ));
    }

    #[test]
    fn odd_finite_curve_is_flat() {
        let p = Profile::finite(1, &[]).unwrap();
        let c = integrate_shock_finite(&p, &PicardParams::finite(1)).unwrap();
        assert!(c.phi.iter().all(|v| v.abs() <= 1e-12));
        for i in 1..c.len() {
            assert!((c.y_plus[i] + c.y_minus[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn odd_seed_continues_flat_with_full_margin() {
        let p = Profile::finite(1, &[]).unwrap();
        let c = continue_shock_ode(&p, (Time::from_t(2.0), 0.0), Time::from_t(2.2), &OdeParams::default()).unwrap();
        assert!(c.phi.iter().all(|v| v.abs() < 1e-13));
        assert!((c.entropy_margin[0] - 0.353553390593).abs() < 1e-9);
        let jump = c.u_right[0] - c.u_left[0];
        assert!((jump + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn entropy_solution_examples() {
        let p = Profile::finite(1, &[]).unwrap();
        let c = continue_shock_ode(&p, (Time::from_t(2.0), 0.0), Time::from_t(2.1), &OdeParams::default()).unwrap();
        match entropy_solution(&p, &c, Time::from_t(2.0), -0.1).unwrap() {
            EntropyValue::Smooth(s) => {
                assert_eq!(s.branch, Branch::Minus);
                assert!(s.u > 0.0);
            }
            other => panic!("{other:?}"),
        }
        match entropy_solution(&p, &c, Time::from_t(2.0), 0.0).unwrap() {
            EntropyValue::Jump { left, right } => {
                assert!((right.u - left.u + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9)
            }
            other => panic!("{other:?}"),
        }
        let v = entropy_solution(&p, &c, Time::from_t(0.5), 0.3).unwrap();
        assert!(matches!(v, EntropyValue::Smooth(FieldSample { branch: Branch::Unique, .. })));
    }

    #[test]
    fn picard_contracts_on_correction_example() {
        let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
        let c = integrate_shock_finite(&p, &PicardParams::for_profile(&p)).unwrap();
        let log = c.picard.as_ref().unwrap();
        assert!(log.sweeps >= 3);
        assert!(log.ratios.iter().skip(1).all(|r| *r < 0.9), "{:?}", log.ratios);
        for i in 1..c.len() {
            let env = envelope(&p, Time::offset(c.tau[i])).unwrap();
            assert!(env.contains(c.phi[i]));
        }
    }

    #[test]
    fn picard_and_ode_agree_on_overlap() {
        let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
        let params = PicardParams::for_profile(&p);
        let c = integrate_shock_finite(&p, &params).unwrap();
        let mid = c.len() / 2;
        let seed = (Time::offset(c.tau[mid]), c.phi[mid]);
        let end = Time::offset(*c.tau.last().unwrap());
        let ode = continue_shock_ode(&p, seed, end, &OdeParams::default()).unwrap();
        let mut worst: f64 = 0.0;
        for (tau, phi) in ode.tau.iter().zip(&ode.phi) {
            worst = worst.max((c.phi_at(*tau).unwrap() - phi).abs());
        }
        assert!(worst < 1e-8, "max deviation {worst}");
        assert!(ode.entropy_margin.iter().all(|m| *m > 0.0));
    }
}
