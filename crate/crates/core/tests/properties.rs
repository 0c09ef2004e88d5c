use proptest::prelude::*;
use shockfit::characteristics::{
    characteristic_position, envelope, invert_branch, jacobian, solution_value, Branch, Time,
};
use shockfit::profile::{Profile, R0Kind};

fn profiles() -> Vec<Profile> {
    vec![
        Profile::finite(1, &[]).unwrap(),
        Profile::finite(1, &[(4, 1.0)]).unwrap(),
        Profile::finite(2, &[(6, 1.0)]).unwrap(),
        Profile::infinite(1.0, R0Kind::Quadratic).unwrap(),
    ]
}

/// Offsets kept below the secondary-caustic limit of every profile above.
fn offset() -> impl Strategy<Value = f64> {
    prop_oneof![-0.5..-1e-9f64, 1e-9..0.05f64]
}

/// Branch owning the characteristic issued from `y` at `time`.
fn branch_of(p: &Profile, time: Time, y: f64) -> Branch {
    if time.tau() <= 0.0 {
        return Branch::Unique;
    }
    let e = envelope(p, time).unwrap();
    if y < e.eta_minus {
        Branch::Minus
    } else if y > e.eta_plus {
        Branch::Plus
    } else {
        Branch::Zero
    }
}

fn well_conditioned(p: &Profile, time: Time, y: f64) -> bool {
    jacobian(p, time, y).abs() > 1e-3 * (time.tau().abs() + 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inversion_round_trips(which in 0usize..4, tau in offset(), w in -0.4..0.4f64) {
        let p = &profiles()[which];
        let time = Time::offset(tau);
        prop_assume!(well_conditioned(p, time, w));
        let x = characteristic_position(p, time, w);
        let branch = branch_of(p, time, w);
        let y = invert_branch(p, time, x, branch).unwrap();
        prop_assert!((y - w).abs() <= 1e-10, "tau {tau} w {w} branch {branch:?} got {y}");
    }

    #[test]
    fn transport_identity(which in 0usize..4, tau in offset(), w in -0.4..0.4f64) {
        let p = &profiles()[which];
        let time = Time::offset(tau);
        prop_assume!(well_conditioned(p, time, w));
        let x = characteristic_position(p, time, w);
        let f = solution_value(p, time, x, branch_of(p, time, w)).unwrap();
        prop_assert!((f.u - p.datum(f.y)).abs() == 0.0);
        prop_assert!((f.du_dt + f.u * f.du_dx).abs() <= 1e-12 * f.du_dx.abs().max(1.0));
    }

    #[test]
    fn derivative_matches_central_difference(which in 0usize..4, tau in offset(), w in -0.4..0.4f64) {
        let p = &profiles()[which];
        let time = Time::offset(tau);
        prop_assume!(jacobian(p, time, w).abs() > 1e-2);
        let x = characteristic_position(p, time, w);
        let branch = branch_of(p, time, w);
        let h = 1e-6;
        let u = |x: f64| solution_value(p, time, x, branch).map(|f| f.u);
        let (Ok(m2), Ok(m1), Ok(p1), Ok(p2), Ok(mid)) = (
            u(x - 2.0 * h),
            u(x - h),
            u(x + h),
            u(x + 2.0 * h),
            solution_value(p, time, x, branch),
        ) else {
            return Err(TestCaseError::reject("stencil leaves the branch"));
        };
        let fd = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        prop_assert!((fd - mid.du_dx).abs() <= 1e-6 * mid.du_dx.abs(), "{fd} vs {}", mid.du_dx);
    }

    #[test]
    fn branches_are_monotone(which in 0usize..4, tau in 1e-6..0.05f64, f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
        let p = &profiles()[which];
        let time = Time::offset(tau);
        let e = envelope(p, time).unwrap();
        let (a, b) = (f1.min(f2), f1.max(f2));
        prop_assume!(b - a > 1e-6);
        let reach = 0.5 * e.width() + 1e-3;
        let at = |x: f64, br: Branch| invert_branch(p, time, x, br).unwrap();
        let (x1, x2) = (e.x_plus + a * e.width(), e.x_plus + b * e.width());
        prop_assert!(at(x1, Branch::Zero) > at(x2, Branch::Zero));
        let (x1, x2) = (e.x_plus + a * reach, e.x_plus + b * reach);
        prop_assert!(at(x1, Branch::Plus) < at(x2, Branch::Plus));
        let (x1, x2) = (e.x_minus - b * reach, e.x_minus - a * reach);
        prop_assert!(at(x1, Branch::Minus) < at(x2, Branch::Minus));
    }

    #[test]
    fn chord_speed_is_symmetric(which in 0usize..4, x in -0.5..0.5f64, d in prop_oneof![-1e-10..1e-10f64, -0.3..0.3f64]) {
        let p = &profiles()[which];
        let y = x + d;
        let (a, b) = (p.chord_speed(x, y), p.chord_speed(y, x));
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        let (ux, uy) = (p.datum(x), p.datum(y));
        let mean = 0.5 * (ux + uy);
        // the divided difference loses eps / |ux - uy| to cancellation
        let slack = 4.0 * f64::EPSILON * (ux * ux + uy * uy) / (ux - uy).abs().max(1e-9);
        prop_assert!((a - mean).abs() <= 1e-14 * mean.abs() + slack);
    }
}
