use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use shockfit::asymptotics::{verify_profile_with, Section, VerifyParams, VerifyReport};
use shockfit::characteristics::{classify_point, sample_cusp, Time};
use shockfit::defaults;
use shockfit::numeric::{linspace, logspace};
use shockfit::oracle::{lax_oleinik_shock, VariationalState};
use shockfit::profile::{locate_blowup, Profile, R0Kind};
use shockfit::shock::{
    continue_shock_ode, entropy_solution, integrate_shock, OdeParams, PicardParams, Regime, ShockCurve,
};
use shockfit::Error;

use crate::args::{Command, Common, Family, Format, Lemma, ShockGrid, TauWindow, XSlice, R0};
use crate::table::{fmt_f64, Cell, Table};
use crate::{Failure, Outcome, UsageError};

pub fn dispatch(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Blowup { common } => blowup(common),
        Command::Envelope { common, window } => envelope(common, window),
        Command::Branches { common, tau, slice } => branches(common, *tau, slice),
        Command::Shock { common, grid } => shock(common, grid),
        Command::OracleCompare {
            common,
            grid,
            window,
            oracle_grid,
            oracle_window,
            tol,
        } => oracle_compare(common, grid, window, *oracle_grid, *oracle_window, *tol),
        Command::SampleField {
            common,
            grid,
            tau_min,
            tau_max,
            tau_samples,
            slice,
        } => sample_field(common, grid, (*tau_min, *tau_max, *tau_samples), slice),
        Command::Verify {
            common,
            grid,
            lemma,
            bound_samples,
            seed,
        } => verify(common, grid, lemma, *bound_samples, *seed),
    }
}

/// `"4:1,6:-0.5"` into `[(4, 1.0), (6, -0.5)]`.
pub fn parse_monomials(spec: &str) -> Result<Vec<(u32, f64)>, UsageError> {
    spec.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|term| {
            let (d, c) = term
                .split_once(':')
                .ok_or_else(|| UsageError(format!("--r term {term:?} is not degree:coef")))?;
            let d = d.trim().parse::<u32>().map_err(|e| UsageError(format!("--r degree {d:?}: {e}")))?;
            let c = c.trim().parse::<f64>().map_err(|e| UsageError(format!("--r coefficient {c:?}: {e}")))?;
            Ok((d, c))
        })
        .collect()
}

pub fn build_profile(common: &Common) -> Result<Profile, Failure> {
    let profile = match common.family {
        Family::Finite => {
            let r = match &common.r {
                Some(spec) => parse_monomials(spec)?,
                None => vec![],
            };
            Profile::finite(common.k, &r)?
        }
        Family::Infinite => {
            if common.r.is_some() {
                return Err(UsageError("--r applies to the finite family; use --r0 for the infinite one".into()).into());
            }
            let r0 = match common.r0 {
                R0::Zero => R0Kind::Zero,
                R0::Quadratic => R0Kind::Quadratic,
            };
            Profile::infinite(common.p, r0)?
        }
    };
    if !common.center.is_finite() {
        return Err(UsageError("--center must be finite".into()).into());
    }
    Ok(profile.centered_at(common.center))
}

fn grid_size(name: &str, n: usize, min: usize) -> Result<usize, UsageError> {
    if n < min {
        return Err(UsageError(format!("--{name} must be at least {min}, got {n}")));
    }
    Ok(n)
}

fn positive(name: &str, v: f64) -> Result<f64, UsageError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(UsageError(format!("--{name} must be positive, got {v}")));
    }
    Ok(v)
}

pub fn picard_params(profile: &Profile, grid: &ShockGrid) -> Result<PicardParams, UsageError> {
    let mut p = PicardParams::for_profile(profile);
    if let Some(n) = grid.n_steps {
        p.n_steps = grid_size("n-steps", n, 8)?;
    }
    if let Some(v) = grid.s_min {
        if !(v >= 0.0) {
            return Err(UsageError(format!("--s-min must be non-negative, got {v}")));
        }
        p.s_min = v;
    }
    if let Some(v) = grid.s_max {
        p.s_max = positive("s-max", v)?;
    }
    if let Some(v) = grid.picard_tol {
        p.tol = positive("picard-tol", v)?;
    }
    if let Some(n) = grid.max_sweeps {
        p.max_sweeps = grid_size("max-sweeps", n, 1)?;
    }
    if !(p.s_max > p.s_min) {
        return Err(UsageError(format!("need s-min < s-max, got {} and {}", p.s_min, p.s_max)));
    }
    Ok(p)
}

fn tau_window(w: &TauWindow, default: (f64, f64), default_samples: usize) -> Result<Vec<f64>, UsageError> {
    let lo = positive("tau-min", w.tau_min.unwrap_or(default.0))?;
    let hi = positive("tau-max", w.tau_max.unwrap_or(default.1))?;
    if !(hi > lo) {
        return Err(UsageError(format!("need tau-min < tau-max, got {lo} and {hi}")));
    }
    let n = grid_size("samples", w.samples.unwrap_or(default_samples), 8)?;
    Ok(logspace(lo, hi, n))
}

fn fit_window(profile: &Profile) -> (f64, f64) {
    match Regime::of(profile) {
        Regime::Finite { .. } => defaults::FIT_WINDOW_FINITE,
        Regime::Infinite { .. } => defaults::FIT_WINDOW_INFINITE,
    }
}

fn x_slice(s: &XSlice) -> Result<Vec<f64>, UsageError> {
    if !(s.x_max > s.x_min) {
        return Err(UsageError(format!("need x-min < x-max, got {} and {}", s.x_min, s.x_max)));
    }
    Ok(linspace(s.x_min, s.x_max, grid_size("x-samples", s.x_samples, 8)?))
}

fn render(table: &Table, format: Format, extra: Option<serde_json::Value>) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let v = match extra {
                Some(mut obj) => {
                    obj["rows"] = table.to_json_value();
                    obj
                }
                None => table.to_json_value(),
            };
            to_json(&v)
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn blowup(common: &Common) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let c = profile.center();
    // the data are only modeled within the locality radius
    let (a, b) = defaults::BLOWUP_INTERVAL;
    let r = profile.locality_radius();
    let data = locate_blowup(&profile, (c + a.max(-r), c + b.min(r)))?;
    // a signed zero would print as "-0"
    let summary = format!("t*={} x*={}", fmt_f64(data.t_star + 0.0), fmt_f64(data.x_star + 0.0));
    let body = match common.out {
        None => String::new(),
        Some(_) => {
            let mut t = Table::new(&["t_star", "x_star", "x_min", "g_min"]);
            t.push(vec![data.t_star.into(), data.x_star.into(), data.x_min.into(), data.g_min.into()]);
            match common.format.unwrap_or(Format::Csv) {
                Format::Csv => t.to_csv(),
                Format::Json => to_json(&data),
            }
        }
    };
    Ok(Outcome {
        body,
        summary,
        pass: true,
    })
}

fn envelope(common: &Common, window: &TauWindow) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let taus = tau_window(window, fit_window(&profile), defaults::FIT_SAMPLES)?;
    let geo = sample_cusp(&profile, &taus)?;
    let mut t = Table::new(&["t", "eta_minus", "eta_plus", "x_plus", "x_minus"]);
    for i in 0..geo.tau.len() {
        t.push(vec![
            geo.tau[i].into(),
            geo.eta_minus[i].into(),
            geo.eta_plus[i].into(),
            geo.x_plus[i].into(),
            geo.x_minus[i].into(),
        ]);
    }
    let summary = format!(
        "envelope: {} samples, t - t* in [{}, {}]",
        taus.len(),
        fmt_f64(taus[0]),
        fmt_f64(taus[taus.len() - 1])
    );
    Ok(Outcome {
        body: render(&t, common.format.unwrap_or(Format::Csv), None),
        summary,
        pass: true,
    })
}

fn branches(common: &Common, tau: f64, slice: &XSlice) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    if !tau.is_finite() {
        return Err(UsageError("--tau must be finite".into()).into());
    }
    let xs = x_slice(slice)?;
    let time = Time::offset(tau);
    let rows: Vec<_> = xs
        .par_iter()
        .map(|&x| classify_point(&profile, time, x))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["t", "x", "region", "y_minus", "y_zero", "y_plus", "y_unique"]);
    let mut triple = 0;
    for r in &rows {
        if r.roots.zero.is_some() {
            triple += 1;
        }
        t.push(vec![
            tau.into(),
            r.x.into(),
            r.region.label().into(),
            r.roots.minus.into(),
            r.roots.zero.into(),
            r.roots.plus.into(),
            r.roots.unique.into(),
        ]);
    }
    let summary = format!("branches: {} points at t - t* = {}, {} with three preimages", rows.len(), fmt_f64(tau), triple);
    Ok(Outcome {
        body: render(&t, common.format.unwrap_or(Format::Csv), None),
        summary,
        pass: true,
    })
}

fn regime_json(regime: Regime) -> serde_json::Value {
    match regime {
        Regime::Finite { k } => json!({ "regime": "finite", "k": k }),
        Regime::Infinite { p } => json!({ "regime": "infinite", "p": p }),
    }
}

fn shock(common: &Common, grid: &ShockGrid) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let params = picard_params(&profile, grid)?;
    let curve = integrate_shock(&profile, &params)?;
    let mut t = Table::new(&["s", "t", "phi", "phi_prime", "u_left", "u_right", "rh_residual", "entropy_margin"]);
    for i in 0..curve.len() {
        t.push(vec![
            curve.s[i].into(),
            curve.tau[i].into(),
            curve.phi[i].into(),
            curve.phi_prime[i].into(),
            curve.u_left[i].into(),
            curve.u_right[i].into(),
            curve.rh_residual[i].into(),
            curve.entropy_margin[i].into(),
        ]);
    }
    let (lo, hi) = curve.tau_range();
    let sweeps = curve.picard.as_ref().map_or(0, |p| p.sweeps);
    let worst_ratio = curve
        .picard
        .as_ref()
        .map_or(0.0, |p| p.ratios.iter().cloned().fold(0.0, f64::max));
    let max_rh = curve.rh_residual.iter().cloned().fold(0.0, f64::max);
    let body = match common.format.unwrap_or(Format::Csv) {
        Format::Csv => t.to_csv(),
        Format::Json => {
            let mut obj = regime_json(curve.regime);
            obj["grid"] = json!({
                "s_min": params.s_min,
                "s_max": params.s_max,
                "n_steps": params.n_steps,
                "nodes": curve.len(),
                "picard_tol": params.tol,
                "max_sweeps": params.max_sweeps,
            });
            obj["picard"] = json!({
                "sweeps": sweeps,
                "updates": curve.picard.as_ref().map(|p| p.updates.clone()),
                "ratios": curve.picard.as_ref().map(|p| p.ratios.clone()),
                "start_ratio": curve.picard.as_ref().and_then(|p| p.start_ratio),
            });
            obj["lambda_over_s"] = json!(curve.lambda_over_s());
            obj["tau_range"] = json!([lo, hi]);
            render(&t, Format::Json, Some(obj))
        }
    };
    let summary = format!(
        "shock: {} nodes, t - t* in [{}, {}], {} Picard sweeps (worst ratio {}), max rh residual {}",
        curve.len(),
        fmt_f64(lo),
        fmt_f64(hi),
        sweeps,
        fmt_f64(worst_ratio),
        fmt_f64(max_rh)
    );
    Ok(Outcome { body, summary, pass: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub tau: f64,
    /// `None` when the shock ODE could not reach `tau`.
    pub phi_ode: Option<f64>,
    pub phi_lo: Option<f64>,
}

impl OracleRow {
    pub fn abs_diff(&self) -> Option<f64> {
        Some((self.phi_ode? - self.phi_lo?).abs())
    }
}

/// Shock curve from the Picard construction, continued by the RK45
/// integrator past its upper end when `tau_max` asks for more.
pub fn shock_through(profile: &Profile, params: &PicardParams, tau_max: f64) -> Result<(ShockCurve, Option<ShockCurve>), Error> {
    let curve = integrate_shock(profile, params)?;
    let (_, hi) = curve.tau_range();
    if tau_max <= hi {
        return Ok((curve, None));
    }
    let last = curve.len() - 1;
    let seed = (Time::offset(curve.tau[last]), curve.phi[last]);
    let tail = continue_shock_ode(profile, seed, Time::offset(tau_max), &OdeParams::default());
    Ok((curve, tail.ok()))
}

/// `phi` from the shock construction and from the variational oracle at each
/// offset. Rows the ODE or the oracle cannot produce carry `None`.
pub fn compare_with_oracle(profile: &Profile, params: &PicardParams, oracle: &VariationalState, taus: &[f64]) -> Result<Vec<OracleRow>, Error> {
    let tau_max = taus.iter().cloned().fold(0.0, f64::max);
    let (curve, tail) = shock_through(profile, params, tau_max)?;
    Ok(taus
        .par_iter()
        .map(|&tau| {
            let phi_ode = curve
                .phi_at(tau)
                .ok()
                .or_else(|| tail.as_ref().and_then(|t| t.phi_at(tau).ok()));
            let phi_lo = lax_oleinik_shock(oracle, Time::offset(tau)).ok().map(|s| s.phi);
            OracleRow { tau, phi_ode, phi_lo }
        })
        .collect())
}

fn oracle_compare(
    common: &Common,
    grid: &ShockGrid,
    window: &TauWindow,
    oracle_grid: Option<usize>,
    oracle_window: Option<f64>,
    tol: f64,
) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let params = picard_params(&profile, grid)?;
    let default = match Regime::of(&profile) {
        Regime::Finite { .. } => (1e-3, 1e-1),
        Regime::Infinite { .. } => (1e-6, 5e-2),
    };
    let taus = tau_window(window, default, 24)?;
    let tol = positive("tol", tol)?;
    let n = grid_size("oracle-grid", oracle_grid.unwrap_or(defaults::ORACLE_GRID), 8)?;
    let w = positive("oracle-window", oracle_window.unwrap_or(profile.locality_radius()))?;
    let oracle = VariationalState::new(&profile, w, n)?;
    let rows = compare_with_oracle(&profile, &params, &oracle, &taus)?;
    let mut t = Table::new(&["t", "phi_ode", "phi_lo", "abs_diff"]);
    for r in &rows {
        t.push(vec![r.tau.into(), r.phi_ode.into(), r.phi_lo.into(), r.abs_diff().into()]);
    }
    let missing = rows.iter().filter(|r| r.abs_diff().is_none()).count();
    let worst = rows.iter().filter_map(OracleRow::abs_diff).fold(0.0, f64::max);
    let pass = missing == 0 && worst <= tol;
    let summary = format!(
        "oracle-compare: {} {} times, max |phi_ode - phi_lo| = {} (tol {}), {} missing",
        if pass { "PASS" } else { "FAIL" },
        rows.len(),
        fmt_f64(worst),
        fmt_f64(tol),
        missing
    );
    Ok(Outcome {
        body: render(&t, common.format.unwrap_or(Format::Csv), None),
        summary,
        pass,
    })
}

fn sample_field(common: &Common, grid: &ShockGrid, taus: (f64, f64, usize), slice: &XSlice) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let (lo, hi, n) = taus;
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) || n == 0 {
        return Err(UsageError(format!("bad time slices [{lo}, {hi}] x {n}")).into());
    }
    let times = if n == 1 { vec![lo] } else { linspace(lo, hi, n) };
    let xs = x_slice(slice)?;
    let curve = if hi > 0.0 {
        let params = picard_params(&profile, grid)?;
        let (curve, tail) = shock_through(&profile, &params, hi)?;
        Some(match tail {
            Some(tail) if tail.tau_range().1 >= hi => merge_tail(curve, tail),
            _ => curve,
        })
    } else {
        None
    };
    let points: Vec<(f64, f64)> = times.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(tau, x)| field_row(&profile, curve.as_ref(), tau, x))
        .collect();
    let mut t = Table::new(&["t", "x", "region", "y", "u", "du_dt", "du_dx", "denom"]);
    let mut blank = 0;
    for r in rows {
        if matches!(r[4], Cell::Empty) {
            blank += 1;
        }
        t.push(r);
    }
    let summary = format!(
        "sample-field: {} points on {} time slices, {} without a value",
        points.len(),
        times.len(),
        blank
    );
    Ok(Outcome {
        body: render(&t, common.format.unwrap_or(Format::Csv), None),
        summary,
        pass: true,
    })
}

/// Picard nodes followed by the RK45 continuation nodes past them.
fn merge_tail(mut curve: ShockCurve, tail: ShockCurve) -> ShockCurve {
    let hi = curve.tau_range().1;
    for i in 0..tail.len() {
        if tail.tau[i] <= hi {
            continue;
        }
        curve.s.push(tail.s[i]);
        curve.lambda.push(tail.lambda[i]);
        curve.lambda_prime.push(tail.lambda_prime[i]);
        curve.tau.push(tail.tau[i]);
        curve.phi.push(tail.phi[i]);
        curve.phi_prime.push(tail.phi_prime[i]);
        curve.y_minus.push(tail.y_minus[i]);
        curve.y_plus.push(tail.y_plus[i]);
        curve.u_left.push(tail.u_left[i]);
        curve.u_right.push(tail.u_right[i]);
        curve.rh_residual.push(tail.rh_residual[i]);
        curve.entropy_margin.push(tail.entropy_margin[i]);
    }
    curve
}

fn field_row(profile: &Profile, curve: Option<&ShockCurve>, tau: f64, x: f64) -> Vec<Cell> {
    let time = Time::offset(tau);
    let region = match classify_point(profile, time, x) {
        Ok(c) => c.region.label(),
        Err(_) => "unresolved",
    };
    let mut row: Vec<Cell> = vec![tau.into(), x.into(), region.into()];
    let value = match curve {
        Some(c) => entropy_solution(profile, c, time, x).map(|v| *v.sample()),
        None => entropy_solution_pre(profile, time, x),
    };
    match value {
        Ok(s) => row.extend([s.y.into(), s.u.into(), s.du_dt.into(), s.du_dx.into(), s.denom.into()]),
        Err(Error::DerivativeSingular { u, denom }) => {
            row.extend([Cell::Empty, u.into(), Cell::Empty, Cell::Empty, denom.into()])
        }
        Err(_) => row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]),
    }
    row
}

fn entropy_solution_pre(profile: &Profile, time: Time, x: f64) -> Result<shockfit::characteristics::FieldSample, Error> {
    shockfit::characteristics::solution_value(profile, time, x, shockfit::characteristics::Branch::Unique)
}

pub fn sections(lemmas: &[Lemma]) -> Vec<Section> {
    let mut out = vec![];
    for l in lemmas {
        let add: &[Section] = match l {
            Lemma::All => &Section::ALL,
            Lemma::Envelope => &[Section::Envelope],
            Lemma::Branches => &[Section::Branches],
            Lemma::Shock => &[Section::Shock],
            Lemma::Bounds => &[Section::Bounds],
        };
        for s in add {
            if !out.contains(s) {
                out.push(*s);
            }
        }
    }
    // report order does not depend on flag order
    out.sort_by_key(|s| Section::ALL.iter().position(|a| a == s));
    out
}

fn report_table(report: &VerifyReport) -> Table {
    let mut t = Table::new(&["entry", "check", "value", "target", "tolerance", "rule", "pass"]);
    for e in &report.entries {
        for c in &e.checks {
            let rule = serde_json::to_value(c.rule).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            t.push(vec![
                e.name.as_str().into(),
                c.name.as_str().into(),
                c.value.into(),
                c.target.into(),
                c.tolerance.into(),
                rule.as_str().into(),
                if c.pass { "true" } else { "false" }.into(),
            ]);
        }
    }
    for b in &report.bounds {
        let pass: Cell = if b.pass { "true" } else { "false" }.into();
        t.push(vec![
            "bounds".into(),
            format!("{}.max", b.name).as_str().into(),
            b.max.into(),
            Cell::Empty,
            Cell::Empty,
            "reported".into(),
            pass.clone(),
        ]);
        t.push(vec![
            "bounds".into(),
            format!("{}.min", b.name).as_str().into(),
            b.min.into(),
            b.limit.into(),
            Cell::Empty,
            if b.limit.is_some() { "at_least" } else { "reported" }.into(),
            pass,
        ]);
    }
    t
}

fn verify(common: &Common, grid: &ShockGrid, lemmas: &[Lemma], bound_samples: Option<usize>, seed: Option<u64>) -> Result<Outcome, Failure> {
    let profile = build_profile(common)?;
    let mut knobs = VerifyParams::for_profile(&profile);
    knobs.picard = picard_params(&profile, grid)?;
    if let Some(n) = bound_samples {
        knobs.bound_samples = grid_size("bound-samples", n, 8)?;
    }
    if let Some(s) = seed {
        knobs.bound_seed = s;
    }
    let secs = sections(lemmas);
    let report = verify_profile_with(&profile, &secs, &knobs)?;
    let body = match common.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => report_table(&report).to_csv(),
    };
    let checks: usize = report.entries.iter().map(|e| e.checks.len()).sum::<usize>() + report.bounds.len();
    let failed: Vec<String> = report
        .entries
        .iter()
        .flat_map(|e| e.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}/{}", e.name, c.name)))
        .chain(report.bounds.iter().filter(|b| !b.pass).map(|b| format!("bounds/{}", b.name)))
        .collect();
    let names: Vec<&str> = secs
        .iter()
        .map(|s| match s {
            Section::Envelope => "envelope",
            Section::Branches => "branches",
            Section::Shock => "shock",
            Section::Bounds => "bounds",
        })
        .collect();
    let summary = if failed.is_empty() {
        format!("verify [{}]: PASS {} checks", names.join(","), checks)
    } else {
        format!("verify [{}]: FAIL {} of {} checks: {}", names.join(","), failed.len(), checks, failed.join(" "))
    };
    Ok(Outcome {
        body,
        summary,
        pass: report.pass,
    })
}
