//! Closed-form results for two-point point contributions.
//!
//! With `P(X = 1) = alpha` and `P(X = -1) = 1 - alpha` the root runoff `W`
//! satisfies `W = (W_L I_L + W_R I_R + X) v 0`, where `I_L ~ Bern(1 - beta)`
//! and `I_R ~ Bern(beta)`. Its pgf `f` solves a quadratic whose
//! discriminant is controlled by
//!
//! ```text
//! h(t) = t [1 - a(g + t) - a^2 (1 - g)(1 - t^2)] / (4 (1 - a) b^2 (1 - b)^2 (1 - a (1 - t^2)))
//! ```
//!
//! with `a = alpha`, `b = beta`, `g = 4 b (1 - b)`. Everything hinges on the
//! maximiser `t0` of `h` on `[0, 1]`.
//!
//! All functions fold `beta` onto `[0, 1/2]` using the symmetry
//! `beta <-> 1 - beta`, except [`alpha_c`], which takes `beta` as given.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::params::{BinaryParams, BranchKind};
use crate::poly::{Poly, Rational};
use crate::search;

/// `|alpha - alpha_c|` at or below this is classified critical.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Default tolerance on the location of `t0`.
pub const T0_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

/// Behaviour of `P(W > x)` for large `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    AllMomentsFinite,
    /// `P(W > x) ~ constant * x^(-exponent)`.
    PowerLaw { exponent: f64, constant: f64 },
    /// `W = infinity` almost surely.
    Infinite,
}

impl Tail {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Tail::PowerLaw { exponent, .. } => Some(*exponent),
            _ => None,
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Tail::PowerLaw { constant, .. } => Some(*constant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub regime: Regime,
    pub alpha_c: f64,
    pub p0: f64,
    pub expected_w: f64,
    pub t0: f64,
    pub h_at_t0: Option<f64>,
    pub tail: Tail,
}

/// Finite numbers as JSON numbers, infinity as `"inf"`, NaN as null.
pub fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        Value::Null
    }
}

impl ExactSolution {
    /// The fixed-field JSON object used by the command line tool.
    pub fn to_json_value(&self) -> Value {
        json!({
            "regime": self.regime.as_str(),
            "alpha_c": json_number(self.alpha_c),
            "p0": json_number(self.p0),
            "expected_w": json_number(self.expected_w),
            "t0": json_number(self.t0),
            "tail_exponent": self.tail.exponent().map_or(Value::Null, json_number),
            "tail_constant": self.tail.constant().map_or(Value::Null, json_number),
        })
    }
}

/// The critical rainfall probability for left-drain probability `beta`.
pub fn alpha_c(beta: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&beta) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "[0, 1/2]",
        });
    }
    let bb = beta * (1.0 - beta);
    Ok(0.5 * (1.0 + bb - (bb * (2.0 + bb)).sqrt()))
}

pub fn classify(p: &BinaryParams) -> Regime {
    let ac = alpha_c(p.folded_beta()).expect("folded beta lies in [0, 1/2]");
    let a = p.alpha();
    if (a - ac).abs() <= CRITICAL_TOL {
        Regime::Critical
    } else if a < ac {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// `h` as an exact ratio of polynomials. Needs `0 < beta < 1` and
/// `alpha < 1`.
pub fn h_rational(p: &BinaryParams) -> Result<Rational> {
    if p.branch() == BranchKind::ZeroBeta {
        return Err(Error::Unsupported(
            "h is undefined for beta = 0; use the geometric law".into(),
        ));
    }
    if p.alpha() >= 1.0 {
        return Err(Error::Unsupported("h is undefined for alpha = 1".into()));
    }
    let a = p.alpha();
    let b = p.folded_beta();
    let bb = b * (1.0 - b);
    let g = 4.0 * bb;
    let c0 = 1.0 - a * g - a * a * (1.0 - g);
    let num = Poly::new(vec![0.0, c0, -a, a * a * (1.0 - g)]);
    let k = 4.0 * (1.0 - a) * bb * bb;
    let den = Poly::new(vec![k * (1.0 - a), 0.0, k * a]);
    Ok(Rational::new(num, den))
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

pub fn h_eval(t: f64, p: &BinaryParams) -> Result<f64> {
    check_unit(t)?;
    Ok(h_rational(p)?.eval(t))
}

/// `h'(1)` in closed form.
pub fn h_prime_at_one(p: &BinaryParams) -> Result<f64> {
    h_rational(p)?;
    let a = p.alpha();
    let b = p.folded_beta();
    let bb = b * (1.0 - b);
    Ok((1.0 + 4.0 * a * a - 4.0 * a * (1.0 + bb)) / (4.0 * (1.0 - a) * bb * bb))
}

/// `h''(1)` from the exact polynomial derivatives of `h`.
pub fn h_second_derivative_at_one(p: &BinaryParams) -> Result<f64> {
    Ok(h_rational(p)?.second_derivative_at(1.0))
}

/// Maximiser `t0` of `h` on `[0, 1]` and `h(t0)`. Returns `t0 = 1` whenever
/// `alpha <= alpha_c`.
pub fn t_max(p: &BinaryParams, tol: f64) -> Result<(f64, f64)> {
    let h = h_rational(p)?;
    Ok(maximize_h(&h, classify(p) == Regime::Supercritical, tol))
}

pub(crate) fn maximize_h(h: &Rational, supercritical: bool, tol: f64) -> (f64, f64) {
    if !supercritical {
        return (1.0, h.eval(1.0));
    }
    let s = h.stationary_numerator();
    let f = |t: f64| h.eval(t);
    let slope = |t: f64| s.eval(t);
    search::maximize(&f, Some(&slope), 0.0, 1.0, tol)
}

/// `P(W = 0)`.
pub fn p_zero(p: &BinaryParams) -> Result<f64> {
    let a = p.alpha();
    if a == 0.0 {
        return Ok(1.0);
    }
    if p.branch() == BranchKind::ZeroBeta {
        return Ok(match w_law_beta0(a)? {
            Beta0Law::Geometric { p0, .. } => p0,
            Beta0Law::Infinite => 0.0,
        });
    }
    if a == 1.0 {
        return Ok(0.0);
    }
    let b = p.folded_beta();
    let bb = b * (1.0 - b);
    let p0 = match classify(p) {
        Regime::Subcritical | Regime::Critical => {
            let disc = (1.0 - 4.0 * bb * a / (1.0 - a)).max(0.0);
            (2.0 * bb - 1.0 + disc.sqrt()) / (2.0 * bb)
        }
        Regime::Supercritical => {
            let (_, h0) = t_max(p, T0_TOL)?;
            h0.sqrt() - (b * b + (1.0 - b) * (1.0 - b)) / (2.0 * bb)
        }
    };
    Ok(p0.clamp(0.0, 1.0))
}

/// `E W`, or `f64::INFINITY` above the critical point.
pub fn expected_w(p: &BinaryParams) -> Result<f64> {
    let a = p.alpha();
    if a == 0.0 {
        return Ok(0.0);
    }
    if p.branch() == BranchKind::ZeroBeta {
        return Ok(match w_law_beta0(a)? {
            Beta0Law::Geometric { mean, .. } => mean,
            Beta0Law::Infinite => f64::INFINITY,
        });
    }
    if classify(p) == Regime::Supercritical {
        return Ok(f64::INFINITY);
    }
    let b = p.folded_beta();
    let bb = b * (1.0 - b);
    let disc = (1.0 - 4.0 * a * (1.0 - a + bb)).max(0.0);
    Ok((1.0 - 2.0 * a - disc.sqrt()) / (2.0 * bb))
}

pub fn tail_asymptote(p: &BinaryParams) -> Result<Tail> {
    let a = p.alpha();
    if a == 0.0 {
        return Ok(Tail::AllMomentsFinite);
    }
    if p.branch() == BranchKind::ZeroBeta {
        return Ok(match w_law_beta0(a)? {
            Beta0Law::Geometric { .. } => Tail::AllMomentsFinite,
            Beta0Law::Infinite => Tail::Infinite,
        });
    }
    let b = p.folded_beta();
    if a == 1.0 {
        // W is the tree size
        return Ok(Tail::PowerLaw {
            exponent: 0.5,
            constant: 1.0 / (PI * b * (1.0 - b)).sqrt(),
        });
    }
    Ok(match classify(p) {
        Regime::Subcritical => Tail::AllMomentsFinite,
        Regime::Critical => {
            let h2 = h_second_derivative_at_one(p)?;
            Tail::PowerLaw {
                exponent: 1.5,
                constant: (-h2 * (1.0 - a) / (8.0 * PI)).max(0.0).sqrt(),
            }
        }
        Regime::Supercritical => {
            let (_, h0) = t_max(p, T0_TOL)?;
            let h1 = h_eval(1.0, p)?;
            Tail::PowerLaw {
                exponent: 0.5,
                constant: ((h0 - h1) * (1.0 - a) / PI).max(0.0).sqrt(),
            }
        }
    })
}

/// Discriminant `g(t)` of the pgf quadratic,
/// `g = (1 - t) [4 (1 - a) b^2 (1 - b)^2 q h* - t N(t)]` with
/// `q = 1 - a (1 - t^2)`, `N` the bracket in the numerator of `h` and
/// `h* = (p0 + (b^2 + (1 - b)^2) / (2 b (1 - b)))^2`.
pub fn pgf_discriminant(t: f64, p: &BinaryParams) -> Result<f64> {
    let h = h_rational(p)?;
    let hstar = h_star(p)?;
    Ok((1.0 - t) * (h.den.eval(t) * hstar - h.num.eval(t)))
}

fn h_star(p: &BinaryParams) -> Result<f64> {
    let b = p.folded_beta();
    let c2 = b * b + (1.0 - b) * (1.0 - b);
    Ok((p_zero(p)? + c2 / (2.0 * b * (1.0 - b))).powi(2))
}

/// Pgf `f(t) = E t^W` on `[0, 1]`, using the `+` root of the quadratic on
/// `[0, t0]` and the `-` root on `(t0, 1]`.
pub fn pgf_eval(t: f64, p: &BinaryParams) -> Result<f64> {
    check_unit(t)?;
    let a = p.alpha();
    if a == 0.0 {
        return Ok(1.0);
    }
    if p.branch() == BranchKind::ZeroBeta {
        return match w_law_beta0(a)? {
            Beta0Law::Geometric { p0, .. } => Ok(p0 / (1.0 - (1.0 - p0) * t)),
            Beta0Law::Infinite => Err(Error::Unsupported(
                "W is infinite almost surely; it has no pgf".into(),
            )),
        };
    }
    let b = p.folded_beta();
    let bb = b * (1.0 - b);
    let c2 = b * b + (1.0 - b) * (1.0 - b);
    if a == 1.0 {
        // pgf of the tree size: f = t (b + (1 - b) f)((1 - b) + b f)
        let lin = 1.0 - c2 * t;
        let disc = (lin * lin - 4.0 * bb * bb * t * t).max(0.0);
        return Ok(2.0 * bb * t / (lin + disc.sqrt()));
    }
    let q = 1.0 - a * (1.0 - t * t);
    let g = pgf_discriminant(t, p)?.max(0.0);
    let (t0, _) = t_max(p, T0_TOL)?;
    let root = if t <= t0 { g.sqrt() } else { -g.sqrt() };
    Ok((t - c2 * q + root) / (2.0 * bb * q))
}

/// The law of `W` when `beta = 0`, where the drainage tree is a single path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta0Law {
    /// `P(W = k) = p0 (1 - p0)^k`.
    Geometric { p0: f64, mean: f64 },
    Infinite,
}

pub fn w_law_beta0(alpha: f64) -> Result<Beta0Law> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in [0, 1]")));
    }
    if alpha >= 0.5 {
        return Ok(Beta0Law::Infinite);
    }
    Ok(Beta0Law::Geometric {
        p0: (1.0 - 2.0 * alpha) / (1.0 - alpha),
        mean: alpha / (1.0 - 2.0 * alpha),
    })
}

/// `[P(Y = -1), P(Y = 0), P(Y = 1)]` for the net contribution
/// `Y = W - (W_L I_L + W_R I_R)`.
pub fn y_distribution(p: &BinaryParams) -> Result<[f64; 3]> {
    let a = p.alpha();
    let b = p.folded_beta();
    let p0 = p_zero(p)?;
    let dry_inflow = (b + (1.0 - b) * p0) * (1.0 - b + b * p0);
    let zero = (1.0 - a) * dry_inflow;
    Ok([1.0 - a - zero, zero, a])
}

/// `E Y = 2 alpha - 1 + (1 - alpha)(beta + (1 - beta) p0)(1 - beta + beta p0)`.
pub fn expected_y(p: &BinaryParams) -> Result<f64> {
    let [neg, _, pos] = y_distribution(p)?;
    Ok(pos - neg)
}

/// Large-`n` approximation `n^(-3/2) / (2 sqrt(pi beta (1 - beta)))` to the
/// tree-size pmf.
pub fn nt_pmf_asymptote(n: u64, beta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain {
            what: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "(0, 1/2]",
        });
    }
    Ok((n as f64).powf(-1.5) / (2.0 * (PI * beta * (1.0 - beta)).sqrt()))
}

/// Everything above for one parameter pair.
///
/// For `beta = 0` there is no `h`: `t0` is reported as 1. For `alpha = 1`
/// the maximiser of `h` tends to 0 and `t0 = 0` is reported.
pub fn solve(p: &BinaryParams) -> Result<ExactSolution> {
    let regime = classify(p);
    let ac = alpha_c(p.folded_beta())?;
    let (t0, h_at_t0) = if p.branch() == BranchKind::ZeroBeta {
        (1.0, None)
    } else if p.alpha() == 1.0 {
        (0.0, None)
    } else {
        let (t0, h0) = t_max(p, T0_TOL)?;
        (t0, Some(h0))
    };
    let mut expected_w = expected_w(p)?;
    if p.branch() == BranchKind::ZeroBeta && regime == Regime::Critical {
        expected_w = f64::INFINITY;
    }
    Ok(ExactSolution {
        regime,
        alpha_c: ac,
        p0: p_zero(p)?,
        expected_w,
        t0,
        h_at_t0,
        tail: tail_asymptote(p)?,
    })
}
