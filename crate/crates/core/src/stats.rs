//! Small statistical toolkit: summary statistics, tail fitting and
//! goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Fraction of the sample used by [`fit_tail`].
pub const TAIL_FRACTION: f64 = 0.01;

/// Fewest order statistics [`fit_tail`] will regress on.
pub const MIN_TAIL_POINTS: usize = 500;

/// Fewest points [`fit_tail_below`] will fit.
pub const MIN_CENSORED_POINTS: usize = 50;

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a proportion estimated from `n` trials.
pub fn proportion_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `P(X > x) ~ constant * x^(-exponent)`, fitted over `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub constant: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

/// Why [`fit_tail`] produced no fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailFitNote {
    TooFewSamples { needed: usize, have: usize },
    NonPositiveTail,
}

/// Least-squares slope of `log(i / n)` on `log x_(i)` for the top
/// [`TAIL_FRACTION`] of the sample, `x_(1) >= x_(2) >= ...`.
pub fn fit_tail(samples: &[f64]) -> Result<TailFit, TailFitNote> {
    let n = samples.len();
    let k = (n as f64 * TAIL_FRACTION).floor() as usize;
    if k < MIN_TAIL_POINTS {
        return Err(TailFitNote::TooFewSamples {
            needed: (MIN_TAIL_POINTS as f64 / TAIL_FRACTION).ceil() as usize,
            have: n,
        });
    }
    let mut top = top_k(samples, k);
    top.sort_by(|a, b| b.total_cmp(a));
    if top[k - 1] <= 0.0 {
        return Err(TailFitNote::NonPositiveTail);
    }
    let pts: Vec<(f64, f64)> = top
        .iter()
        .enumerate()
        .map(|(i, &x)| (x.ln(), ((i + 1) as f64 / n as f64).ln()))
        .collect();
    let (slope, intercept) = ols(&pts);
    Ok(TailFit {
        exponent: -slope,
        constant: intercept.exp(),
        x_min: top[k - 1],
        x_max: top[0],
        points: k,
    })
}

/// [`fit_tail`] over the same top order statistics, keeping only those
/// below `ceiling`. Ranks still count every larger observation, so right
/// censored values at or above `ceiling` do not bias the points kept.
/// `None` when fewer than [`MIN_CENSORED_POINTS`] points remain.
pub fn fit_tail_below(samples: &[f64], ceiling: f64) -> Option<TailFit> {
    let n = samples.len();
    let k = (n as f64 * TAIL_FRACTION).floor() as usize;
    if k < MIN_TAIL_POINTS {
        return None;
    }
    let mut top = top_k(samples, k);
    top.sort_by(|a, b| b.total_cmp(a));
    let pts: Vec<(f64, f64)> = top
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0 && x < ceiling)
        .map(|(i, &x)| (x.ln(), ((i + 1) as f64 / n as f64).ln()))
        .collect();
    if pts.len() < MIN_CENSORED_POINTS || pts.first()?.0 == pts.last()?.0 {
        return None;
    }
    let (slope, intercept) = ols(&pts);
    Some(TailFit {
        exponent: -slope,
        constant: intercept.exp(),
        x_min: pts.last()?.0.exp(),
        x_max: pts.first()?.0.exp(),
        points: pts.len(),
    })
}

/// Hill estimator of the tail index from the `k` largest observations.
pub fn hill_estimator(samples: &[f64], k: usize) -> Option<f64> {
    if k == 0 || k >= samples.len() {
        return None;
    }
    let mut top = top_k(samples, k + 1);
    top.sort_by(|a, b| b.total_cmp(a));
    let threshold = top[k];
    if threshold <= 0.0 {
        return None;
    }
    let mean_log = top[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if mean_log > 0.0 {
        Some(1.0 / mean_log)
    } else {
        None
    }
}

fn top_k(samples: &[f64], k: usize) -> Vec<f64> {
    let mut v = samples.to_vec();
    let idx = v.len() - k;
    v.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    v.split_off(idx)
}

fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    (d, kolmogorov_q(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square goodness of fit. Returns `(statistic, dof, p_value)`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, usize, f64) {
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = expected_probs.iter().filter(|&&p| p > 0.0).count().saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).expect("dof >= 1").cdf(stat);
    (stat, dof, p)
}
