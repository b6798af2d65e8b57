//! Dense real polynomials, just enough for rational functions like `h`.

use std::ops::{Add, Mul, Sub};

/// `coeffs[k]` is the coefficient of `t^k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    /// The monomial `c t^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Division by `(1 - t)`: returns `(q, r)` with `self = (1 - t) q + r`.
    ///
    /// `r = self(1)` and the coefficients of `q` are partial sums, so no
    /// cancellation happens near `t = 1`.
    pub fn div_one_minus_t(&self) -> (Poly, f64) {
        let n = self.coeffs.len();
        if n == 1 {
            return (Poly::new(vec![0.0]), self.coeffs[0]);
        }
        let remainder: f64 = self.coeffs.iter().sum();
        let mut q = Vec::with_capacity(n - 1);
        let mut acc = -remainder;
        for &c in &self.coeffs[..n - 1] {
            acc += c;
            q.push(acc);
        }
        (Poly::new(q), remainder)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        + rhs.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

/// A ratio of polynomials `num / den`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    pub fn new(num: Poly, den: Poly) -> Self {
        Rational { num, den }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.num.eval(t) / self.den.eval(t)
    }

    /// Numerator of the first derivative, `num' den - num den'`. Its sign is
    /// the sign of the derivative wherever `den != 0`.
    pub fn stationary_numerator(&self) -> Poly {
        &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative())
    }

    pub fn derivative_at(&self, t: f64) -> f64 {
        let d = self.den.eval(t);
        self.stationary_numerator().eval(t) / (d * d)
    }

    pub fn second_derivative_at(&self, t: f64) -> f64 {
        let n = self.num.eval(t);
        let n1 = self.num.derivative().eval(t);
        let n2 = self.num.derivative().derivative().eval(t);
        let d = self.den.eval(t);
        let d1 = self.den.derivative().eval(t);
        let d2 = self.den.derivative().derivative().eval(t);
        ((n2 * d - n * d2) * d - 2.0 * d1 * (n1 * d - n * d1)) / (d * d * d)
    }
}
