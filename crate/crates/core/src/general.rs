//! Left-continuous point contributions `X in {-1, 0, 1, ...}` at `beta = 1/2`.
//!
//! With `eta(t) = E t^(X+1)`, `alpha = P(X >= 0)` and `m = E X`,
//!
//! ```text
//! h(t) = 4 / (1 - alpha) * t (eta(t) - t) / ((1 - t) eta(t))
//! ```
//!
//! and the regime is read off the sign of
//! `h'(1) = 2 (-m (1 - m) - Var X) / (1 - alpha)` provided `h` is unimodal.
//! `(eta(t) - t) / (1 - t)` is formed as an exact polynomial quotient, so `h`
//! is a ratio of polynomials with no removable singularity at `t = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytics::{maximize_h, Regime, Tail, CRITICAL_TOL, T0_TOL};
use crate::error::{Error, Result};
use crate::params::XLaw;
use crate::poly::{Poly, Rational};

/// Grid size of the unimodality scan.
pub const UNIMODAL_GRID: usize = 10_000;

fn check_law(law: &XLaw) -> Result<()> {
    if law.prob(-1) <= 0.0 {
        return Err(Error::Unsupported(
            "P(X = -1) = 0: every node adds runoff and h is undefined".into(),
        ));
    }
    Ok(())
}

fn check_unit(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

fn eta_poly(law: &XLaw) -> Poly {
    Poly::new(law.eta_coefficients().to_vec())
}

/// `h` for `beta = 1/2` as a ratio of polynomials.
pub fn h_rational_general(law: &XLaw) -> Result<Rational> {
    check_law(law)?;
    let eta = eta_poly(law);
    let (q, _) = (&eta - &Poly::monomial(1.0, 1)).div_one_minus_t();
    let scale = 4.0 / (1.0 - law.alpha());
    let num = &Poly::monomial(scale, 1) * &q;
    Ok(Rational::new(num, eta))
}

pub fn h_general(t: f64, law: &XLaw) -> Result<f64> {
    check_unit(t)?;
    Ok(h_rational_general(law)?.eval(t))
}

/// `h` for a general left-drain probability `beta`. Evaluation only: no
/// regime theory is attached to it for `beta != 1/2`.
pub fn h_general_beta(t: f64, law: &XLaw, beta: f64) -> Result<f64> {
    check_unit(t)?;
    check_law(law)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "(0, 1)",
        });
    }
    let eta = eta_poly(law);
    let (r, _) = (&Poly::new(vec![1.0]) - &eta).div_one_minus_t();
    let (e, r) = (eta.eval(t), r.eval(t));
    let bb = beta * (1.0 - beta);
    let d2 = (1.0 - 2.0 * beta).powi(2);
    let c2 = beta * beta + (1.0 - beta) * (1.0 - beta);
    let alpha = law.alpha();
    let num = d2 * e * r + (1.0 - alpha) * d2 * e - 2.0 * c2 * e - r + 1.0 + t;
    Ok(num / (4.0 * bb * bb * (1.0 - alpha) * e))
}

/// `2 (-m (1 - m) - Var X) / (1 - alpha)`.
pub fn hprime1_closed(law: &XLaw) -> Result<f64> {
    check_law(law)?;
    let m = law.mean();
    Ok(2.0 * (-m * (1.0 - m) - law.variance()) / (1.0 - law.alpha()))
}

fn regime_of(hprime1: f64) -> Regime {
    if hprime1.abs() <= CRITICAL_TOL {
        Regime::Critical
    } else if hprime1 > 0.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    pub hprime1: f64,
    /// Numerical maximiser of `h` on `[0, 1]`.
    pub t0: f64,
    pub h_max: f64,
    /// `h'` changes sign at most once on the scan grid, from `+` to `-`.
    pub unimodal: bool,
    /// The numerical maximiser agrees with the sign of `h'(1)`.
    pub consistent: bool,
}

fn is_unimodal(h: &Rational) -> bool {
    let s = h.stationary_numerator();
    let vals: Vec<f64> = (1..=UNIMODAL_GRID)
        .map(|k| s.eval(k as f64 / UNIMODAL_GRID as f64))
        .collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-12 * scale.max(1e-300);
    let mut seen_negative = false;
    for v in vals {
        if v < -eps {
            seen_negative = true;
        } else if v > eps && seen_negative {
            return false;
        }
    }
    true
}

pub fn classify_general(law: &XLaw) -> Result<Classification> {
    let h = h_rational_general(law)?;
    let hprime1 = hprime1_closed(law)?;
    let regime = regime_of(hprime1);
    if regime == Regime::Subcritical && law.mean() >= 0.0 {
        return Err(Error::Inconsistent(format!(
            "h'(1) = {hprime1} > 0 but E X = {} is not negative",
            law.mean()
        )));
    }
    let (t_num, h_max) = maximize_h(&h, true, T0_TOL);
    let consistent = match regime {
        Regime::Supercritical => t_num < 1.0 - 1e-9,
        Regime::Subcritical => t_num >= 1.0 - 1e-9,
        Regime::Critical => t_num >= 1.0 - 1e-6,
    };
    Ok(Classification {
        regime,
        hprime1,
        t0: t_num,
        h_max,
        unimodal: is_unimodal(&h),
        consistent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralSolution {
    pub regime: Regime,
    pub m: f64,
    pub var_x: f64,
    pub alpha: f64,
    pub p0: f64,
    pub expected_w: f64,
    pub t0: f64,
    pub h_at_t0: f64,
    pub h_at_one: f64,
    pub hprime1: f64,
    pub tail: Tail,
}

pub fn solve_general(law: &XLaw) -> Result<GeneralSolution> {
    let c = classify_general(law)?;
    if !c.unimodal || !c.consistent {
        return Err(Error::Inconsistent(format!(
            "h is not unimodal on [0, 1] (h'(1) = {}, numerical maximiser {}); \
             the closed forms do not apply",
            c.hprime1, c.t0
        )));
    }
    let h = h_rational_general(law)?;
    let m = law.mean();
    let var_x = law.variance();
    let alpha = law.alpha();
    let h_at_one = h.eval(1.0);
    let (p0, expected_w, t0, h_at_t0, tail) = match c.regime {
        Regime::Subcritical | Regime::Critical => {
            let p0 = 2.0 * (-m / (1.0 - alpha)).max(0.0).sqrt() - 1.0;
            let ew = (-2.0 * m - (2.0 * (-m * (1.0 - m) - var_x)).max(0.0).sqrt()).max(0.0);
            let tail = if c.regime == Regime::Critical {
                let h2 = h.second_derivative_at(1.0);
                Tail::PowerLaw {
                    exponent: 1.5,
                    constant: (-h2 * (1.0 - alpha) / (8.0 * PI)).max(0.0).sqrt(),
                }
            } else {
                Tail::AllMomentsFinite
            };
            (p0, ew, 1.0, h_at_one, tail)
        }
        Regime::Supercritical => {
            let tail = Tail::PowerLaw {
                exponent: 0.5,
                constant: ((c.h_max - h_at_one) * (1.0 - alpha) / PI).max(0.0).sqrt(),
            };
            (c.h_max.sqrt() - 1.0, f64::INFINITY, c.t0, c.h_max, tail)
        }
    };
    Ok(GeneralSolution {
        regime: c.regime,
        m,
        var_x,
        alpha,
        p0: p0.clamp(0.0, 1.0),
        expected_w,
        t0,
        h_at_t0,
        h_at_one,
        hprime1: c.hprime1,
        tail,
    })
}

/// `h'(1)` for `P(X = 1) = a`, `P(X = 0) = b`, `P(X = -1) = 1 - a - b`.
pub fn example1_hprime1(a: f64, b: f64) -> f64 {
    4.0 * ((1.0 - b).powi(2) + 4.0 * a * a - a * (5.0 - 4.0 * b)) / (1.0 - a - b)
}

/// The critical `a` for a given `b`: the smaller root of
/// `4 a^2 - (5 - 4b) a + (1 - b)^2 = 0`.
pub fn example1_critical_a(b: f64) -> Option<f64> {
    if !(0.0..1.0).contains(&b) {
        return None;
    }
    Some((5.0 - 4.0 * b - (9.0 - 8.0 * b).sqrt()) / 8.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub a: f64,
    pub b: f64,
    pub hprime1: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub points: Vec<PhasePoint>,
    /// `(a, b)` pairs on the critical curve.
    pub critical_curve: Vec<(f64, f64)>,
}

/// Regimes over `{(a, b): a, b >= 0, a + b < 1}` on a square grid.
pub fn example1_phase_grid(step: f64) -> Result<PhaseGrid> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::invalid("step", format!("{step} is not in (0, 0.1]")));
    }
    let n = (1.0 / step).ceil() as usize;
    let mut points = Vec::new();
    for i in 0..=n {
        let a = i as f64 * step;
        for j in 0..=n {
            let b = j as f64 * step;
            if a + b >= 1.0 - 1e-9 {
                break;
            }
            let hprime1 = example1_hprime1(a, b);
            points.push(PhasePoint {
                a,
                b,
                hprime1,
                regime: regime_of(hprime1),
            });
        }
    }
    let critical_curve = (0..=n)
        .map(|j| j as f64 * step)
        .filter_map(|b| example1_critical_a(b).map(|a| (a, b)))
        .collect();
    Ok(PhaseGrid {
        points,
        critical_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use crate::params::{binary_as_xlaw, BinaryParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ex1(a: f64, b: f64) -> XLaw {
        XLaw::new([(1, a), (0, b), (-1, 1.0 - a - b)]).unwrap()
    }

    fn binary(alpha: f64) -> XLaw {
        binary_as_xlaw(&BinaryParams::new(alpha, 0.5).unwrap())
    }

    #[test]
    fn h_values() {
        assert_eq!(h_general(0.0, &binary(0.3)).unwrap(), 0.0);
        let h = h_general(3.0 / 7.0, &binary(0.49)).unwrap();
        assert!((h - 1.680672).abs() < 1e-6);
        let p = BinaryParams::new(0.49, 0.5).unwrap();
        assert_relative_eq!(h, analytics::h_eval(3.0 / 7.0, &p).unwrap(), max_relative = 1e-13);
        let law = ex1(0.1, 0.3);
        assert_relative_eq!(h_general(1.0, &law).unwrap(), 4.0 * 0.5 / 0.6, max_relative = 1e-13);
        assert!(h_general(1.5, &law).is_err());
    }

    #[test]
    fn h_near_one_is_smooth() {
        let law = ex1(0.1, 0.3);
        let h1 = h_general(1.0, &law).unwrap();
        for k in 4..12 {
            let t = 1.0 - 10f64.powi(-k);
            let v = h_general(t, &law).unwrap();
            assert!((v - h1).abs() < 10.0 * 10f64.powi(-k), "t = {t}: {v} vs {h1}");
        }
    }

    #[test]
    fn general_beta_matches_binary_h() {
        for (a, b) in [(0.2, 0.1), (0.3, 0.25), (0.49, 0.5), (0.4, 0.35)] {
            let p = BinaryParams::new(a, b).unwrap();
            let law = p.to_xlaw();
            for t in [0.05, 0.3, 0.6, 0.95, 1.0] {
                let general = h_general_beta(t, &law, b).unwrap();
                let direct = analytics::h_eval(t, &p).unwrap();
                assert_relative_eq!(general, direct, max_relative = 1e-9);
            }
        }
        let law = ex1(0.1, 0.3);
        assert_relative_eq!(
            h_general_beta(0.4, &law, 0.5).unwrap(),
            h_general(0.4, &law).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn classification_examples() {
        for alpha in [0.1, 0.2, 0.25, 0.3, 0.4] {
            let c = classify_general(&binary(alpha)).unwrap();
            assert_eq!(c.regime, analytics::classify(&BinaryParams::new(alpha, 0.5).unwrap()));
        }
        let c = classify_general(&ex1(0.1, 0.3)).unwrap();
        assert_eq!(c.regime, Regime::Subcritical);
        assert!((c.hprime1 - 1.0).abs() < 1e-12);
        let c = classify_general(&ex1(0.2, 0.3)).unwrap();
        assert_eq!(c.regime, Regime::Supercritical);
        assert!((c.hprime1 + 0.88).abs() < 1e-12);
        assert!(c.unimodal && c.consistent);
    }

    #[test]
    fn inconsistent_and_unsupported_laws() {
        // mean 7.1 yet h'(1) > 0
        let law = XLaw::new([(-1, 0.1), (8, 0.9)]).unwrap();
        assert!(hprime1_closed(&law).unwrap() > 0.0);
        assert!(matches!(classify_general(&law), Err(Error::Inconsistent(_))));
        let law = XLaw::new([(0, 0.5), (1, 0.5)]).unwrap();
        assert!(matches!(solve_general(&law), Err(Error::Unsupported(_))));
    }

    #[test]
    fn example1_solution() {
        let s = solve_general(&ex1(0.1, 0.3)).unwrap();
        assert_eq!(s.regime, Regime::Subcritical);
        assert!((s.m + 0.5).abs() < 1e-15);
        assert!((s.var_x - 0.45).abs() < 1e-14);
        assert!((s.p0 - (2.0 * (0.5f64 / 0.6).sqrt() - 1.0)).abs() < 1e-14);
        assert!((s.p0 - 0.8257419).abs() < 5e-8);
        assert!((s.expected_w - (1.0 - 0.6f64.sqrt())).abs() < 1e-14);
        assert!((s.expected_w - 0.2254033).abs() < 5e-8);
    }

    #[test]
    fn nonpositive_x_gives_no_runoff() {
        let s = solve_general(&XLaw::new([(-1, 0.4), (0, 0.6)]).unwrap()).unwrap();
        assert!((s.p0 - 1.0).abs() < 1e-12);
        assert!(s.expected_w.abs() < 1e-12);
    }

    #[test]
    fn reduces_to_binary_results() {
        for alpha in [0.1, 0.2, 0.25, 0.3, 0.49] {
            let p = BinaryParams::new(alpha, 0.5).unwrap();
            let exact = analytics::solve(&p).unwrap();
            let general = solve_general(&binary(alpha)).unwrap();
            assert_eq!(general.regime, exact.regime);
            assert!((general.p0 - exact.p0).abs() <= 1e-12);
            assert!((general.t0 - exact.t0).abs() <= 1e-12);
            if exact.expected_w.is_finite() {
                assert!((general.expected_w - exact.expected_w).abs() <= 1e-12);
            } else {
                assert!(general.expected_w.is_infinite());
            }
            assert_eq!(general.tail.exponent(), exact.tail.exponent());
            if let (Some(a), Some(b)) = (general.tail.constant(), exact.tail.constant()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn phase_grid_examples() {
        assert_eq!(example1_critical_a(0.0), Some(0.25));
        assert_eq!(example1_hprime1(0.25, 0.0), 0.0);
        let grid = example1_phase_grid(0.05).unwrap();
        let find = |a: f64, b: f64| {
            grid.points
                .iter()
                .find(|p| (p.a - a).abs() < 1e-9 && (p.b - b).abs() < 1e-9)
                .unwrap()
        };
        assert_eq!(find(0.1, 0.3).regime, Regime::Subcritical);
        assert_eq!(find(0.2, 0.3).regime, Regime::Supercritical);
        assert_eq!(find(0.25, 0.0).regime, Regime::Critical);
        assert!(grid.critical_curve.contains(&(0.25, 0.0)));
        assert!(grid.points.iter().all(|p| p.a + p.b < 1.0));
        assert!(example1_phase_grid(0.2).is_err());
        assert!(example1_phase_grid(0.0).is_err());
    }

    #[test]
    fn critical_curve_in_simplex() {
        let mut prev = example1_critical_a(0.0).unwrap();
        for k in 1..1000 {
            let b = k as f64 / 1000.0;
            let a = example1_critical_a(b).unwrap();
            assert!(a >= 0.0 && a + b < 1.0);
            assert!((a - prev).abs() < 0.01);
            assert!(example1_hprime1(a, b).abs() < 1e-9);
            prev = a;
        }
        // the discriminant 9 - 8b stays positive on [0, 1]
        assert!(example1_critical_a(1.0).is_none());
    }

    fn law_strategy() -> impl Strategy<Value = XLaw> {
        prop::collection::vec(0.0f64..1.0, 2..=7).prop_filter_map("mass at -1", |w| {
            if w[0] < 0.05 {
                return None;
            }
            let total: f64 = w.iter().sum();
            XLaw::new(w.iter().enumerate().map(|(k, x)| (k as i64 - 1, x / total))).ok()
        })
    }

    proptest! {
        #[test]
        fn hprime1_matches_numeric(law in law_strategy()) {
            let h = h_rational_general(&law).unwrap();
            let step = 1e-6;
            let numeric = (h.eval(1.0 + step) - h.eval(1.0 - step)) / (2.0 * step);
            let closed = hprime1_closed(&law).unwrap();
            prop_assert!((numeric - closed).abs() <= 1e-6 * closed.abs().max(1.0));
            prop_assert!((h.derivative_at(1.0) - closed).abs() <= 1e-9 * closed.abs().max(1.0));
        }

        #[test]
        fn solutions_are_in_range(law in law_strategy()) {
            if let Ok(s) = solve_general(&law) {
                prop_assert!((0.0..=1.0).contains(&s.p0));
                prop_assert!(s.expected_w >= 0.0);
                if s.regime == Regime::Subcritical {
                    prop_assert!(s.var_x < -s.m * (1.0 - s.m));
                }
            }
        }

        #[test]
        fn phase_formula_matches_general(a in 0.0f64..0.9, b in 0.0f64..0.9) {
            prop_assume!(a + b < 0.95);
            let law = ex1(a, b);
            let closed = hprime1_closed(&law).unwrap();
            prop_assert!((closed - example1_hprime1(a, b)).abs() < 1e-9 * closed.abs().max(1.0));
        }
    }
}
