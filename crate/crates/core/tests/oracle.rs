use shockfit::characteristics::Time;
use shockfit::numeric::logspace;
use shockfit::oracle::{lax_oleinik_shock, VariationalState};
use shockfit::profile::{Profile, R0Kind};
use shockfit::shock::{integrate_shock, PicardParams};

/// Largest `|phi_picard - phi_lo| / |phi_lo|` (or absolute, when `relative` is off).
fn worst_gap(profile: &Profile, taus: &[f64], relative: bool) -> f64 {
    let curve = integrate_shock(profile, &PicardParams::for_profile(profile)).unwrap();
    let state = VariationalState::for_profile(profile).unwrap();
    taus.iter()
        .map(|&tau| {
            let lo = lax_oleinik_shock(&state, Time::offset(tau)).unwrap();
            let gap = (curve.phi_at(tau).unwrap() - lo.phi).abs();
            if relative { gap / lo.phi.abs() } else { gap }
        })
        .fold(0.0, f64::max)
}

#[test]
fn picard_curve_matches_variational_shock_finite() {
    let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
    assert!(worst_gap(&p, &logspace(1e-3, 0.1, 8), false) < 1e-8);
}

#[test]
fn picard_curve_matches_variational_shock_infinite() {
    let p = Profile::infinite(1.0, R0Kind::Quadratic).unwrap();
    let gap = worst_gap(&p, &logspace(1e-8, 5e-2, 6), true);
    assert!(gap < 1e-4, "{gap}");
}

/// Leading shock coefficient `phi / tau^{(k+1)/k}` read from the variational
/// solution alone; it approaches `1/(2k+3)` for `r = x^{2k+2}`.
#[test]
fn variational_shock_coefficient() {
    for (k, tau, tol) in [(1u32, 1e-4, 0.02), (2, 1e-4, 0.05)] {
        let p = Profile::finite(k, &[(2 * k + 2, 1.0)]).unwrap();
        let state = VariationalState::for_profile(&p).unwrap();
        let lo = lax_oleinik_shock(&state, Time::offset(tau)).unwrap();
        let ratio = lo.phi / tau.powf((k as f64 + 1.0) / k as f64);
        let target = 1.0 / (2.0 * k as f64 + 3.0);
        assert!((ratio - target).abs() < tol * target, "k={k}: {ratio}");
    }
}
