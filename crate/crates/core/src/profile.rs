//! Initial-data families, their analytic derivatives, chord speed and blowup location.
//!
//! A profile is stored in local coordinates `w = x - center`. The speed is
//! written as `g(x) = -w + q(w)` where `q` is the degenerate excess: the
//! polynomial `w^{2k+1} + r(w)` in the finite family, and
//! `exp(-|w|^{-p}) (w/p + r0(w))` in the infinite family. All geometry code
//! works with `q` and `q'` directly so that `1 + t g'` never has to be formed
//! by cancelling two numbers of size one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Exponents below this are treated as exact zeros.
pub const EXP_FLOOR: f64 = -700.0;
/// Below this jump the chord speed switches to quadrature.
pub const CHORD_SWITCH: f64 = 1e-9;
pub const DEFAULT_LOCALITY_RADIUS: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub degree: u32,
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum R0Kind {
    Zero,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Degeneracy {
    Finite { k: u32, r: Vec<Monomial> },
    Infinite { p: f64, r0: R0Kind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flux {
    /// f(u) = u^2 / 2 paired with u0 = g.
    Burgers,
}

impl Flux {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Flux::Burgers => 0.5 * u * u,
        }
    }

    pub fn speed(self, u: f64) -> f64 {
        match self {
            Flux::Burgers => u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    degeneracy: Degeneracy,
    flux: Flux,
    center: f64,
    locality_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupData {
    pub x_min: f64,
    pub t_star: f64,
    pub x_star: f64,
    pub g_min: f64,
}

/// `exp(-a) * a^m` with `a = |w|^{-p}`, clamped to zero below the floor.
fn flat_weight(w: f64, p: f64, m: i32) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let ln_abs = w.abs().ln();
    let a = (-p * ln_abs).exp();
    if !a.is_finite() || -a < EXP_FLOOR {
        return 0.0;
    }
    (-a + m as f64 * (-p * ln_abs)).exp()
}

impl Profile {
    pub fn finite(k: u32, r: &[(u32, f64)]) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidProfile("k must be at least 1".into()));
        }
        let min_degree = 2 * k + 2;
        let mut terms: Vec<Monomial> = Vec::new();
        for &(degree, coeff) in r {
            if !coeff.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "coefficient of x^{degree} is not finite"
                )));
            }
            if degree < min_degree {
                return Err(Error::InvalidProfile(format!(
                    "monomial x^{degree} has degree below 2k+2 = {min_degree}"
                )));
            }
            if coeff == 0.0 {
                continue;
            }
            match terms.iter_mut().find(|m| m.degree == degree) {
                Some(m) => m.coeff += coeff,
                None => terms.push(Monomial { degree, coeff }),
            }
        }
        terms.sort_by_key(|m| m.degree);
        Ok(Self::with_degeneracy(Degeneracy::Finite { k, r: terms }))
    }

    pub fn infinite(p: f64, r0: R0Kind) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidProfile(format!("p must be positive, got {p}")));
        }
        Ok(Self::with_degeneracy(Degeneracy::Infinite { p, r0 }))
    }

    fn with_degeneracy(degeneracy: Degeneracy) -> Self {
        let mut profile = Self {
            degeneracy,
            flux: Flux::Burgers,
            center: 0.0,
            locality_radius: DEFAULT_LOCALITY_RADIUS,
        };
        profile.locality_radius = profile.strict_minimum_radius(DEFAULT_LOCALITY_RADIUS);
        profile
    }

    /// Largest radius up to `cap` on which `g' > -1` away from the center,
    /// so that the center is the only point of steepest descent.
    fn strict_minimum_radius(&self, cap: f64) -> f64 {
        const N: usize = 4000;
        let mut radius = cap;
        for side in [-1.0, 1.0] {
            let mut prev = 0.0;
            for i in 1..=N {
                let w = cap * i as f64 / N as f64;
                if self.excess_prime(side * w) < 0.0 {
                    let root = numeric::bisect(|v| self.excess_prime(side * v), prev, w);
                    radius = radius.min(root);
                    break;
                }
                prev = w;
            }
        }
        radius
    }

    /// Translate the profile so the degenerate point sits at `x0`.
    pub fn centered_at(mut self, x0: f64) -> Self {
        self.center = x0;
        self
    }

    pub fn with_locality_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "locality radius must be positive, got {radius}"
            )));
        }
        self.locality_radius = radius;
        Ok(self)
    }

    pub fn degeneracy(&self) -> &Degeneracy {
        &self.degeneracy
    }

    pub fn flux(&self) -> Flux {
        self.flux
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn locality_radius(&self) -> f64 {
        self.locality_radius
    }

    pub fn finite_order(&self) -> Option<u32> {
        match self.degeneracy {
            Degeneracy::Finite { k, .. } => Some(k),
            Degeneracy::Infinite { .. } => None,
        }
    }

    pub fn infinite_order(&self) -> Option<f64> {
        match self.degeneracy {
            Degeneracy::Finite { .. } => None,
            Degeneracy::Infinite { p, .. } => Some(p),
        }
    }

    /// True when `g` is odd about the center.
    pub fn is_odd(&self) -> bool {
        match &self.degeneracy {
            Degeneracy::Finite { r, .. } => r.iter().all(|m| m.degree % 2 == 1),
            Degeneracy::Infinite { r0, .. } => *r0 == R0Kind::Zero,
        }
    }

    /// Coefficient of `w^{2k+2}` in `g`, i.e. `g^{(2k+2)}(x0) / (2k+2)!`.
    /// Zero for the infinite family.
    pub fn leading_correction(&self) -> f64 {
        match &self.degeneracy {
            Degeneracy::Finite { k, r } => r
                .iter()
                .find(|m| m.degree == 2 * k + 2)
                .map_or(0.0, |m| m.coeff),
            Degeneracy::Infinite { .. } => 0.0,
        }
    }

    /// `g^{(2k+2)}(x0)` evaluated from the coefficients.
    pub fn correction_derivative(&self) -> f64 {
        match self.degeneracy {
            Degeneracy::Finite { k, .. } => {
                let n = 2 * k + 2;
                let fact: f64 = (1..=n).map(f64::from).product();
                fact * self.leading_correction()
            }
            Degeneracy::Infinite { .. } => 0.0,
        }
    }

    /// Degenerate excess `q(w) = g(x0 + w) + w`.
    pub fn excess(&self, w: f64) -> f64 {
        match &self.degeneracy {
            Degeneracy::Finite { k, r } => {
                let mut v = w.powi(2 * *k as i32 + 1);
                for m in r {
                    v += m.coeff * w.powi(m.degree as i32);
                }
                v
            }
            Degeneracy::Infinite { p, r0 } => {
                let e = flat_weight(w, *p, 0);
                if e == 0.0 {
                    return 0.0;
                }
                let r0v = match r0 {
                    R0Kind::Zero => 0.0,
                    R0Kind::Quadratic => w * w,
                };
                e * (w / p + r0v)
            }
        }
    }

    /// `q'(w) = g'(x0 + w) + 1`.
    pub fn excess_prime(&self, w: f64) -> f64 {
        match &self.degeneracy {
            Degeneracy::Finite { k, r } => {
                let n = 2 * *k as i32 + 1;
                let mut v = n as f64 * w.powi(n - 1);
                for m in r {
                    v += m.coeff * m.degree as f64 * w.powi(m.degree as i32 - 1);
                }
                v
            }
            Degeneracy::Infinite { p, r0 } => {
                if w == 0.0 {
                    return 0.0;
                }
                let p = *p;
                let e = flat_weight(w, p, 0);
                let ea = flat_weight(w, p, 1);
                match r0 {
                    R0Kind::Zero => ea + e / p,
                    R0Kind::Quadratic => ea * (1.0 + p * w) + e * (1.0 / p + 2.0 * w),
                }
            }
        }
    }

    /// `q''(w) = g''(x0 + w)`.
    pub fn excess_second(&self, w: f64) -> f64 {
        match &self.degeneracy {
            Degeneracy::Finite { k, r } => {
                let n = 2 * *k as i32 + 1;
                let mut v = (n * (n - 1)) as f64 * w.powi(n - 2);
                for m in r {
                    let d = m.degree as i32;
                    v += m.coeff * (d * (d - 1)) as f64 * w.powi(d - 2);
                }
                v
            }
            Degeneracy::Infinite { p, r0 } => {
                if w == 0.0 {
                    return 0.0;
                }
                let p = *p;
                // q' = E (a + p a r0/w + 1/p + r0') with a = |w|^{-p}, E' = E p a / w
                let e = flat_weight(w, p, 0);
                let ea = flat_weight(w, p, 1);
                let ea2 = flat_weight(w, p, 2);
                match r0 {
                    R0Kind::Zero => {
                        // E p a/w (a + 1/p) - E p a / w
                        (p * ea2 + ea - p * ea) / w
                    }
                    R0Kind::Quadratic => {
                        let bracket_w = p * ea2 * (1.0 + p * w) / w + ea * (1.0 / p + 2.0 * w) * p / w;
                        let derivative = -p * ea / w + p * (1.0 - p) * ea + 2.0 * e;
                        bracket_w + derivative
                    }
                }
            }
        }
    }

    /// Speed `g(x)`.
    pub fn speed(&self, x: f64) -> f64 {
        let w = x - self.center;
        self.excess(w) - w
    }

    pub fn speed_prime(&self, x: f64) -> f64 {
        self.excess_prime(x - self.center) - 1.0
    }

    pub fn speed_second(&self, x: f64) -> f64 {
        self.excess_second(x - self.center)
    }

    /// Initial datum `u0(x)`; for the Burgers pairing this is `g` itself.
    pub fn datum(&self, x: f64) -> f64 {
        match self.flux {
            Flux::Burgers => self.speed(x),
        }
    }

    pub fn datum_prime(&self, x: f64) -> f64 {
        match self.flux {
            Flux::Burgers => self.speed_prime(x),
        }
    }

    /// Chord speed `a(x, y)`: the divided difference of `f` between the
    /// data at `x` and `y`.
    pub fn chord_speed(&self, x: f64, y: f64) -> f64 {
        let (ux, uy) = (self.datum(x), self.datum(y));
        self.chord_of_states(ux, uy)
    }

    /// Divided difference of the flux between two states.
    pub fn chord_of_states(&self, ux: f64, uy: f64) -> f64 {
        let f = self.flux;
        if (ux - uy).abs() < CHORD_SWITCH {
            numeric::gauss16_integral(|theta| f.speed(theta * ux + (1.0 - theta) * uy), 0.0, 1.0)
        } else {
            (f.value(ux) - f.value(uy)) / (ux - uy)
        }
    }

    /// Antiderivative of `q`, `Q(w) = ∫_0^w q`.
    pub fn excess_antiderivative(&self, w: f64) -> f64 {
        match &self.degeneracy {
            Degeneracy::Finite { k, r } => {
                let n = 2 * *k as i32 + 2;
                let mut v = w.powi(n) / n as f64;
                for m in r {
                    let d = m.degree as i32 + 1;
                    v += m.coeff * w.powi(d) / d as f64;
                }
                v
            }
            Degeneracy::Infinite { .. } => {
                if w == 0.0 {
                    return 0.0;
                }
                numeric::adaptive_simpson(&|v: f64| self.excess(v), 0.0, w, 1e-15)
            }
        }
    }

    /// Antiderivative of the datum, normalized to vanish at the center.
    pub fn datum_antiderivative(&self, x: f64) -> f64 {
        let w = x - self.center;
        match self.flux {
            Flux::Burgers => self.excess_antiderivative(w) - 0.5 * w * w,
        }
    }
}

/// Locate the minimum of `g'` on `[a, b]` and the resulting blowup point.
pub fn locate_blowup(profile: &Profile, interval: (f64, f64)) -> Result<BlowupData> {
    let (a, b) = (interval.0.min(interval.1), interval.0.max(interval.1));
    if !(b > a) {
        return Err(Error::InvalidProfile("empty search interval".into()));
    }
    const N: usize = 2000;
    let h = (b - a) / N as f64;
    let grid: Vec<f64> = (0..=N).map(|i| a + h * i as f64).collect();
    // scan q' = g' + 1 so that near-flat minima are not lost to rounding;
    // the center goes first so ties resolve to it
    let c = profile.center();
    let slope = |x: f64| profile.excess_prime(x - c);
    let mut best = (f64::INFINITY, a);
    for &x in std::iter::once(&c).chain(grid.iter()) {
        if x < a || x > b {
            continue;
        }
        let v = slope(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    let x0 = best.1;
    let lo = (x0 - h).max(a);
    let hi = (x0 + h).min(b);
    let (s_lo, s_hi) = (profile.speed_second(lo), profile.speed_second(hi));
    let x_min = if best.0 == 0.0 && x0 == c {
        c
    } else if s_lo < 0.0 && s_hi > 0.0 {
        let r = numeric::bisect(|x| profile.speed_second(x), lo, hi);
        if slope(r) <= best.0 {
            r
        } else {
            x0
        }
    } else {
        let (x, v) = numeric::golden_min(slope, lo, hi, 1e-12);
        if v <= best.0 {
            x
        } else {
            x0
        }
    };
    let g_min = profile.speed_prime(x_min);
    if !(g_min < 0.0) {
        return Err(Error::NoBlowup { g_min });
    }
    let t_star = -1.0 / g_min;
    Ok(BlowupData {
        x_min,
        t_star,
        x_star: x_min + t_star * profile.speed(x_min),
        g_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_profile_matches_polynomial() {
        let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
        for &x in &[-0.6f64, -0.1, 0.0, 0.25, 0.7] {
            let g = -x + x * x * x + x.powi(4);
            assert!((p.speed(x) - g).abs() < 1e-15);
            let gp = -1.0 + 3.0 * x * x + 4.0 * x.powi(3);
            assert!((p.speed_prime(x) - gp).abs() < 1e-15);
        }
        assert_eq!(p.correction_derivative(), 24.0);
    }

    #[test]
    fn low_degree_correction_rejected() {
        assert!(matches!(
            Profile::finite(2, &[(3, 1.0)]),
            Err(Error::InvalidProfile(_))
        ));
        assert!(Profile::finite(0, &[]).is_err());
        assert!(Profile::infinite(0.0, R0Kind::Zero).is_err());
        assert!(Profile::infinite(-1.0, R0Kind::Zero).is_err());
    }

    #[test]
    fn infinite_profile_is_flat_at_center() {
        let p = Profile::infinite(2.0, R0Kind::Zero).unwrap();
        assert_eq!(p.speed(0.0), 0.0);
        assert_eq!(p.speed_prime(0.0), -1.0);
        let q = Profile::infinite(1.0, R0Kind::Zero).unwrap();
        for &x in &[0.01, 0.1, 0.3, 0.7] {
            assert_eq!(q.speed(-x), -q.speed(x));
        }
        let x: f64 = 0.4;
        let quad = Profile::infinite(1.0, R0Kind::Quadratic).unwrap();
        let expected = -x + (-1.0 / x).exp() * (x + x * x);
        assert!((quad.speed(x) - expected).abs() < 1e-15);
    }

    #[test]
    fn no_denormals_near_center() {
        let p = Profile::infinite(1.0, R0Kind::Quadratic).unwrap();
        for &w in &[1e-3, 1e-10, 1e-300, 5e-324] {
            assert_eq!(p.excess(w), 0.0);
            assert_eq!(p.excess_prime(w), 0.0);
            assert_eq!(p.excess_second(w), 0.0);
        }
    }

    #[test]
    fn blowup_of_builtin_families() {
        let b = locate_blowup(&Profile::finite(1, &[]).unwrap(), (-0.75, 0.75)).unwrap();
        assert_eq!((b.x_min, b.t_star, b.x_star, b.g_min), (0.0, 1.0, 0.0, -1.0));
        let b = locate_blowup(&Profile::infinite(1.0, R0Kind::Zero).unwrap(), (-0.75, 0.75)).unwrap();
        assert_eq!((b.x_min, b.t_star, b.x_star, b.g_min), (0.0, 1.0, 0.0, -1.0));
        let shifted = Profile::finite(1, &[]).unwrap().centered_at(0.5);
        let b = locate_blowup(&shifted, (-0.2, 1.3)).unwrap();
        assert!((b.x_min - 0.5).abs() < 1e-12);
        assert!((b.t_star - 1.0).abs() < 1e-12);
        assert!((b.x_star - 0.5).abs() < 1e-12);
    }

    #[test]
    fn locality_radius_stops_before_secondary_minimum() {
        assert_eq!(Profile::finite(1, &[(4, 1.0)]).unwrap().locality_radius(), 0.75);
        let r = Profile::infinite(2.0, R0Kind::Quadratic).unwrap().locality_radius();
        assert!(r < 0.5 && r > 0.4, "{r}");
        let p = Profile::infinite(1.0, R0Kind::Quadratic).unwrap();
        let b = locate_blowup(&p, (-p.locality_radius(), p.locality_radius())).unwrap();
        assert_eq!((b.x_min, b.t_star), (0.0, 1.0));
    }

    #[test]
    fn blowup_requires_negative_slope() {
        let p = Profile::finite(1, &[]).unwrap();
        assert!(matches!(
            locate_blowup(&p, (5.0, 6.0)),
            Err(Error::NoBlowup { .. })
        ));
    }

    #[test]
    fn chord_speed_examples() {
        let p = Profile::finite(1, &[]).unwrap();
        let h = 0.5f64.sqrt();
        assert!(p.chord_speed(h, -h).abs() < 1e-16);
        for &x in &[-0.3, 0.0, 0.2] {
            assert!((p.chord_speed(x, x) - p.speed(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn chord_speed_remainder_is_quadratic() {
        let p = Profile::finite(1, &[(4, 1.0)]).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..50 {
            for j in 1..50 {
                let x = -0.2 + 0.4 * i as f64 / 50.0;
                let y = -0.2 + 0.4 * j as f64 / 50.0;
                let b = p.chord_speed(x, y) + 0.5 * (x + y);
                worst = worst.max(b.abs() / (x * x + y * y));
            }
        }
        assert!(worst < 1.0, "ratio {worst}");
    }

    #[test]
    fn antiderivative_differentiates_to_datum() {
        for p in [
            Profile::finite(2, &[(6, 0.5), (7, -1.0)]).unwrap(),
            Profile::infinite(1.0, R0Kind::Quadratic).unwrap(),
        ] {
            for &x in &[-0.5, -0.2, 0.15, 0.6] {
                let h = 1e-5;
                let d = (p.datum_antiderivative(x + h) - p.datum_antiderivative(x - h)) / (2.0 * h);
                assert!((d - p.datum(x)).abs() < 1e-9, "{x}: {d} vs {}", p.datum(x));
            }
        }
    }
}
