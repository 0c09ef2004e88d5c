//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails other than the ones listed in
//! `KNOWN_RED`, which cannot be met as stated and are reported as is.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shockfit::asymptotics::{verify_branches, verify_envelope, verify_field_bounds, verify_shock, Entry};
use shockfit::characteristics::{
    characteristic_position, envelope, isolation_limit, jacobian, solution_value, Branch, Time,
};
use shockfit::defaults;
use shockfit::numeric::logspace;
use shockfit::oracle::VariationalState;
use shockfit::profile::{Profile, R0Kind};
use shockfit::shock::{conservation_balance, integrate_shock, PicardParams, ShockCurve};
use shockfit_cli::commands::compare_with_oracle;

/// Criteria whose stated target is out of reach; see the README.
const KNOWN_RED: &[&str] = &["3b", "5.k2"];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: impl Into<String>) -> Line {
    Line {
        id,
        pass,
        detail: detail.into(),
    }
}

fn finite(k: u32, r: &[(u32, f64)]) -> Profile {
    Profile::finite(k, r).unwrap()
}

fn infinite(p: f64, r0: R0Kind) -> Profile {
    Profile::infinite(p, r0).unwrap()
}

/// Remark-type correction `r = x^{2k+2}`.
fn corrected(k: u32) -> Profile {
    finite(k, &[(2 * k + 2, 1.0)])
}

fn curve(p: &Profile) -> ShockCurve {
    integrate_shock(p, &PicardParams::for_profile(p)).unwrap()
}

fn value(e: &Entry, name: &str) -> f64 {
    e.check(name).map_or(f64::NAN, |c| c.value)
}

fn passes(e: &Entry, name: &str) -> bool {
    e.check(name).is_some_and(|c| c.pass)
}

fn failing(e: &Entry) -> String {
    let bad: Vec<&str> = e.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if bad.is_empty() {
        String::new()
    } else {
        format!(" failing: {}", bad.join(" "))
    }
}

fn c1_envelope_exponents() -> Vec<Line> {
    let mut out = vec![];
    for k in 1..=3 {
        let e = verify_envelope(&finite(k, &[])).unwrap();
        let detail = format!(
            "k={k} eta exp {:.5} (target {:.5}) coef {:.6} (target {:.6}); |x| exp {:.5} coef {:.6} (tol 2%/1%/2%/2%){}",
            value(&e, "eta_plus.exponent"),
            1.0 / (2.0 * k as f64),
            value(&e, "eta_plus.coefficient"),
            (2.0 * k as f64 + 1.0).powf(-1.0 / (2.0 * k as f64)),
            value(&e, "x_minus.exponent"),
            value(&e, "x_minus.coefficient"),
            failing(&e)
        );
        out.push(line("1", e.pass, detail));
    }
    out
}

fn c2_second_order() -> Vec<Line> {
    let e = verify_envelope(&corrected(1)).unwrap();
    let (p, m) = (value(&e, "eta_plus.second_order"), value(&e, "eta_minus.second_order"));
    let pass = passes(&e, "eta_plus.second_order") && passes(&e, "eta_minus.second_order");
    vec![line(
        "2",
        pass,
        format!("k=1 r=x^4: eta+ {p:.6}, eta- {m:.6} vs -2/9 = {:.6} (tol 10%)", -2.0 / 9.0),
    )]
}

fn c3_shock_regularity() -> Vec<Line> {
    let mut out = vec![];
    let mut exps = vec![];
    let mut all = true;
    let mut k1 = None;
    for k in 1..=3 {
        let p = corrected(k);
        let e = verify_shock(&p, &curve(&p), None);
        all &= passes(&e, "phi.exponent");
        exps.push(format!("k={k} {:.4} vs {:.4}", value(&e, "phi.exponent"), (k as f64 + 1.0) / k as f64));
        if k == 1 {
            k1 = Some(e);
        }
    }
    out.push(line("3a", all, format!("phi exponent (tol 5%): {}", exps.join(", "))));
    let e = k1.unwrap();
    let coef = value(&e, "phi.coefficient");
    out.push(line(
        "3b",
        passes(&e, "phi.coefficient"),
        format!(
            "k=1 phi coefficient {coef:.5} vs -1 (tol 10%); variational limit is +1/5 = 0.2, scaled phi at smallest tau {:.5}",
            value(&e, "phi.scaled_at_smallest_tau")
        ),
    ));
    out
}

fn all_profiles() -> Vec<(&'static str, Profile)> {
    vec![
        ("k1", finite(1, &[])),
        ("k2", finite(2, &[])),
        ("k3", finite(3, &[])),
        ("k1 r=x^4", corrected(1)),
        ("k2 r=x^6", corrected(2)),
        ("k3 r=x^8", corrected(3)),
        ("p1 r0=0", infinite(1.0, R0Kind::Zero)),
        ("p2 r0=0", infinite(2.0, R0Kind::Zero)),
        ("p1 r0=x^2", infinite(1.0, R0Kind::Quadratic)),
        ("p2 r0=x^2", infinite(2.0, R0Kind::Quadratic)),
    ]
}

fn c4_jump_conditions() -> Vec<Line> {
    let mut worst_rh: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    let mut pass = true;
    let mut bad = vec![];
    for (name, p) in all_profiles() {
        let e = verify_shock(&p, &curve(&p), None);
        worst_rh = worst_rh.max(value(&e, "rankine_hugoniot"));
        worst_margin = worst_margin.min(value(&e, "entropy_margin_min"));
        let ok = passes(&e, "rankine_hugoniot") && passes(&e, "entropy_margin_min");
        if !ok {
            bad.push(name);
        }
        pass &= ok;
    }
    vec![line(
        "4",
        pass,
        format!(
            "10 curves: max normalized rh residual {worst_rh:.3e} (<= 1e-8), min entropy margin {worst_margin:.3e} (> 0){}",
            if bad.is_empty() { String::new() } else { format!(" failing: {}", bad.join(", ")) }
        ),
    )]
}

fn c5_oracle() -> Vec<Line> {
    const TOL: f64 = 1e-5;
    let taus = logspace(1e-3, 0.1, 24);
    let mut out = vec![];
    for (id, k) in [("5.k1", 1u32), ("5.k2", 2)] {
        let p = corrected(k);
        let oracle = VariationalState::for_profile(&p).unwrap();
        let rows = compare_with_oracle(&p, &PicardParams::for_profile(&p), &oracle, &taus).unwrap();
        let diffs: Vec<f64> = rows.iter().filter_map(|r| r.abs_diff()).collect();
        let worst = diffs.iter().cloned().fold(0.0, f64::max);
        let missing = rows.len() - diffs.len();
        let covered = rows.iter().filter(|r| r.abs_diff().is_some()).map(|r| r.tau).fold(0.0, f64::max);
        let pass = missing == 0 && worst <= TOL;
        let mut detail = format!("k={k} r=x^{}: sup |phi_ode - phi_lo| {worst:.3e} over t-t* in [1e-3, 0.1] (tol 1e-5)", 2 * k + 2);
        if missing > 0 {
            let iso = isolation_limit(&p, 0.1);
            detail.push_str(&format!(
                "; {missing} of {} times unreachable past the secondary-caustic limit t-t* = {iso:.4}; covered window [1e-3, {covered:.4}] {}",
                rows.len(),
                if worst <= TOL { "passes" } else { "fails" }
            ));
        }
        out.push(line(id, pass, detail));
    }
    out
}

fn c6_symmetry() -> Vec<Line> {
    let mut pass = true;
    let mut parts = vec![];
    for (name, p) in [
        ("k1", finite(1, &[])),
        ("k2", finite(2, &[])),
        ("p1", infinite(1.0, R0Kind::Zero)),
        ("p2", infinite(2.0, R0Kind::Zero)),
    ] {
        let e = verify_shock(&p, &curve(&p), None);
        pass &= passes(&e, "odd_phi_max") && passes(&e, "odd_trace_symmetry");
        parts.push(format!(
            "{name} |phi| {:.1e} |y+ + y-| {:.1e}",
            value(&e, "odd_phi_max"),
            value(&e, "odd_trace_symmetry")
        ));
    }
    vec![line("6", pass, format!("{} (<= 1e-12, 1e-10)", parts.join(", ")))]
}

fn c7_infinite_bounds() -> Vec<Line> {
    let mut out = vec![];
    for (id, p) in [("7.p1", 1.0), ("7.p2", 2.0)] {
        let prof = infinite(p, R0Kind::Quadratic);
        let params = PicardParams::for_profile(&prof);
        let base = integrate_shock(&prof, &params).unwrap();
        let fine = integrate_shock(&prof, &PicardParams { n_steps: 2 * params.n_steps, ..params }).unwrap();
        let e = verify_shock(&prof, &base, Some(&fine));
        let pass = passes(&e, "lambda_over_s.refined") && passes(&e, "phi_over_s2tau.refined");
        out.push(line(
            id,
            pass,
            format!(
                "p={p}: |lambda|/s <= {:.5} (x2 grid {:.5}), |phi|/(s^2 tau) <= {:.5} (x2 grid {:.5}) (tol 20%); |phi|/tau log-exponent {:.3} vs 2/p = {:.3} and 1+2/p = {:.3} (reported)",
                base.lambda_over_s(),
                value(&e, "lambda_over_s.refined"),
                e.check("phi_over_s2tau.refined").and_then(|c| c.target).unwrap_or(f64::NAN),
                value(&e, "phi_over_s2tau.refined"),
                value(&e, "phi_over_tau.log_exponent"),
                2.0 / p,
                1.0 + 2.0 / p
            ),
        ));
    }
    out
}

fn c8_branches() -> Vec<Line> {
    let mut out = vec![];
    for (id, p) in [("8.k1", corrected(1)), ("8.k2", corrected(2)), ("8.p1", infinite(1.0, R0Kind::Quadratic))] {
        let entries = verify_branches(&p);
        let worst_dev = entries
            .iter()
            .map(|e| value(e, "deviation_at_smallest_scale"))
            .fold(0.0, f64::max);
        let bad: Vec<&str> = entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect();
        out.push(line(
            id,
            bad.is_empty(),
            format!(
                "{} expansions, worst deviation at smallest scale {worst_dev:.3e} (<= 0.1), residual orders >= stated - 0.1{}",
                entries.len(),
                if bad.is_empty() { String::new() } else { format!(" failing: {}", bad.join(" ")) }
            ),
        ));
    }
    out
}

fn c9_field_bounds() -> Vec<Line> {
    let mut out = vec![];
    for (id, p) in [
        ("9.k1", corrected(1)),
        ("9.k2", corrected(2)),
        ("9.p1", infinite(1.0, R0Kind::Quadratic)),
        ("9.p2", infinite(2.0, R0Kind::Quadratic)),
    ] {
        let reports = verify_field_bounds(&p, &curve(&p), defaults::BOUND_SAMPLES, defaults::BOUND_SEED).unwrap();
        let pass = reports.iter().all(|r| r.pass);
        let parts: Vec<String> = reports
            .iter()
            .filter(|r| !r.name.ends_with(".shrunk"))
            .map(|r| {
                if r.name.starts_with("denom_floor") {
                    format!("{} min {:.3e}", r.name, r.min)
                } else {
                    format!("{} max {:.3e}", r.name, r.max)
                }
            })
            .collect();
        let n = reports.first().map_or(0, |r| r.count);
        out.push(line(id, pass, format!("{n} samples: {}", parts.join(", "))));
    }
    out
}

fn c10_conservation() -> Vec<Line> {
    const TOL: f64 = 1e-6;
    let configs = [
        ("symmetric k=1", finite(1, &[]), (0.99, 1.05), 0.05),
        ("k=1 r=x^4", corrected(1), (0.99, 1.05), 0.05),
        ("p=1 r0=x^2", infinite(1.0, R0Kind::Quadratic), (0.99, 1.02), 0.02),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (name, p, (t1, t2), half) in configs {
        let c = curve(&p);
        let bal = conservation_balance(&p, &c, Time::from_t(t1), Time::from_t(t2), -half, half).unwrap();
        pass &= bal.balance.abs() <= TOL;
        parts.push(format!("{name} {:.2e}", bal.balance.abs()));
    }
    vec![line("10", pass, format!("|balance| {} (tol 1e-6)", parts.join(", ")))]
}

fn c11_derivatives() -> Vec<Line> {
    const POINTS: usize = 1000;
    // the solution varies on an x-scale of order denom^2, so the step
    // follows it; rounding stays far below the tolerance down to denom = 1e-2
    const H_REL: f64 = 1e-2;
    const H_MAX: f64 = 1e-5;
    let profiles = [finite(1, &[]), corrected(1), corrected(2), infinite(1.0, R0Kind::Quadratic)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    let mut draws = 0;
    while taken < POINTS && draws < 100 * POINTS {
        draws += 1;
        let p = &profiles[taken % profiles.len()];
        let tau = if rng.gen_bool(0.5) { -rng.gen_range(1e-3..0.5) } else { rng.gen_range(1e-3..0.05) };
        let y = rng.gen_range(-0.4..0.4);
        let time = Time::offset(tau);
        let denom = jacobian(p, time, y);
        if denom.abs() <= 1e-2 {
            continue;
        }
        let h = (H_REL * denom * denom).min(H_MAX);
        let branch = if tau <= 0.0 {
            Branch::Unique
        } else {
            let e = envelope(p, time).unwrap();
            if y < e.eta_minus {
                Branch::Minus
            } else if y > e.eta_plus {
                Branch::Plus
            } else {
                Branch::Zero
            }
        };
        let x = characteristic_position(p, time, y);
        let u = |tau: f64, x: f64| solution_value(p, Time::offset(tau), x, branch).map(|s| s.u);
        let five = |f: &dyn Fn(f64) -> Option<f64>| -> Option<f64> {
            Some((f(-2.0)? - 8.0 * f(-1.0)? + 8.0 * f(1.0)? - f(2.0)?) / (12.0 * h))
        };
        // stencils must stay on the same side of t*
        if tau.abs() <= 2.0 * h {
            continue;
        }
        let (Some(dx), Some(dt)) = (
            five(&|j| u(tau, x + j * h).ok()),
            five(&|j| u(tau + j * h, x).ok()),
        ) else {
            continue;
        };
        let s = solution_value(p, time, x, branch).unwrap();
        let rel = |num: f64, ana: f64| (num - ana).abs() / ana.abs().max(1e-12);
        worst = worst.max(rel(dx, s.du_dx)).max(rel(dt, s.du_dt));
        taken += 1;
    }
    let pass = taken == POINTS && worst <= 1e-6;
    vec![line(
        "11",
        pass,
        format!("{taken} points with |denom| > 1e-2: worst relative error {worst:.3e} (tol 1e-6, five-point stencil h = min(1e-2 denom^2, 1e-5))"),
    )]
}

fn c12_determinism() -> Vec<Line> {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut sizes = vec![];
    for (tag, args) in [
        ("finite", vec!["--family", "finite", "--k", "1", "--r", "4:1"]),
        ("infinite", vec!["--family", "infinite", "--p", "1", "--r0", "quadratic"]),
    ] {
        let mut bytes = vec![];
        for run in 0..2 {
            let path = dir.path().join(format!("{tag}{run}.json"));
            let mut argv = vec!["shockfit", "verify"];
            argv.extend(&args);
            let path_str = path.to_str().unwrap().to_string();
            let mut argv: Vec<String> = argv.into_iter().map(String::from).collect();
            argv.extend(["--out".to_string(), path_str]);
            let code = shockfit_cli::run(argv);
            assert!(code <= 1, "verify exited with {code}");
            bytes.push(std::fs::read(&path).unwrap());
        }
        pass &= bytes[0] == bytes[1] && !bytes[0].is_empty();
        sizes.push(format!("{tag} {} bytes", bytes[0].len()));
    }
    vec![line("12", pass, format!("two verify runs byte-identical: {}", sizes.join(", ")))]
}

fn main() {
    let start = Instant::now();
    let groups: [fn() -> Vec<Line>; 12] = [
        c1_envelope_exponents,
        c2_second_order,
        c3_shock_regularity,
        c4_jump_conditions,
        c5_oracle,
        c6_symmetry,
        c7_infinite_bounds,
        c8_branches,
        c9_field_bounds,
        c10_conservation,
        c11_derivatives,
        c12_determinism,
    ];
    let mut unexpected = vec![];
    for group in groups {
        for l in group() {
            let red = KNOWN_RED.contains(&l.id);
            let tag = match (l.pass, red) {
                (true, _) => "PASS",
                (false, true) => "FAIL (known)",
                (false, false) => "FAIL",
            };
            println!("criterion {:<5} {tag}: {}", l.id, l.detail);
            if !l.pass && !red {
                unexpected.push(l.id);
            }
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
