//! Parameter types shared by every sampler and solver.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(pmf) - 1` accepted by [`XLaw::new`].
pub const PMF_SUM_TOL: f64 = 1e-12;

/// Largest support value accepted for a point-contribution law.
pub const MAX_SUPPORT: i64 = 1 << 16;

/// Which part of the exact machinery applies to a set of binary parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// `beta` is 0 or 1: the drainage tree is a single infinite path and the
    /// runoff is geometric (or infinite).
    ZeroBeta,
    /// `0 < beta < 1`: the quadratic pgf machinery applies.
    PositiveBeta,
}

/// Two-point point contribution `P(X = 1) = alpha`, `P(X = -1) = 1 - alpha`,
/// on a drainage tree whose cells drain left with probability `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryParams {
    alpha: f64,
    beta: f64,
}

impl BinaryParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_probability("alpha", alpha)?;
        check_probability("beta", beta)?;
        Ok(BinaryParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_bar(&self) -> f64 {
        1.0 - self.beta
    }

    /// `beta` folded onto `[0, 1/2]`; the model is symmetric under
    /// `beta <-> 1 - beta`.
    pub fn folded_beta(&self) -> f64 {
        self.beta.min(1.0 - self.beta)
    }

    pub fn branch(&self) -> BranchKind {
        if self.folded_beta() == 0.0 {
            BranchKind::ZeroBeta
        } else {
            BranchKind::PositiveBeta
        }
    }

    pub fn to_xlaw(&self) -> XLaw {
        binary_as_xlaw(self)
    }
}

fn check_probability(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(
            field,
            format!("{value} is not a probability in [0, 1]"),
        ));
    }
    Ok(())
}

/// Validate `(alpha, beta)` and report which analytic branch applies.
pub fn validate_binary(alpha: f64, beta: f64) -> Result<(BinaryParams, BranchKind)> {
    let p = BinaryParams::new(alpha, beta)?;
    Ok((p, p.branch()))
}

/// The two-point law `{1: alpha, -1: 1 - alpha}` as a general [`XLaw`].
pub fn binary_as_xlaw(p: &BinaryParams) -> XLaw {
    XLaw::from_dense(vec![p.alpha_bar(), 0.0, p.alpha()])
}

/// A finitely supported law on `{-1, 0, 1, ..., K}`.
///
/// Stored densely: `probs[k] = P(X = k - 1)`, so the coefficients of the
/// shifted pgf `eta(t) = E t^(X+1)` are exactly `probs`.
#[derive(Debug, Clone, PartialEq)]
pub struct XLaw {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl XLaw {
    /// Build a law from `(value, probability)` pairs. Repeated values are
    /// summed.
    pub fn new<I>(pmf: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut dense: Vec<f64> = Vec::new();
        for (value, prob) in pmf {
            if value < -1 {
                return Err(Error::invalid(
                    "x-pmf",
                    format!("support value {value} is below -1"),
                ));
            }
            if value > MAX_SUPPORT {
                return Err(Error::invalid(
                    "x-pmf",
                    format!("support value {value} exceeds {MAX_SUPPORT}"),
                ));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::invalid(
                    "x-pmf",
                    format!("P(X = {value}) = {prob} is not a nonnegative number"),
                ));
            }
            let idx = (value + 1) as usize;
            if dense.len() <= idx {
                dense.resize(idx + 1, 0.0);
            }
            dense[idx] += prob;
        }
        let total: f64 = dense.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::invalid(
                "x-pmf",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        while dense.len() > 1 && dense.last() == Some(&0.0) {
            dense.pop();
        }
        Ok(Self::from_dense(dense))
    }

    /// Parse the `{"-1": 0.6, "0": 0.3, "1": 0.1}` config form.
    pub fn from_string_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut pairs = Vec::with_capacity(map.len());
        for (key, &prob) in map {
            let value: i64 = key.trim().parse().map_err(|_| {
                Error::invalid("x-pmf", format!("support key {key:?} is not an integer"))
            })?;
            pairs.push((value, prob));
        }
        Self::new(pairs)
    }

    fn from_dense(probs: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        XLaw { probs, cdf }
    }

    /// `P(X = value)`.
    pub fn prob(&self, value: i64) -> f64 {
        if value < -1 {
            return 0.0;
        }
        self.probs.get((value + 1) as usize).copied().unwrap_or(0.0)
    }

    /// Nonzero `(value, probability)` pairs in increasing order of value.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k as i64 - 1, p))
    }

    pub fn max_value(&self) -> i64 {
        self.probs.len() as i64 - 2
    }

    /// Coefficients of `eta(t) = sum_k probs[k] t^k`.
    pub fn eta_coefficients(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(v, p)| v as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support()
            .map(|(v, p)| {
                let d = v as f64 - m;
                d * d * p
            })
            .sum()
    }

    /// `P(X >= 0)`.
    pub fn alpha(&self) -> f64 {
        self.probs[1..].iter().sum()
    }

    /// `eta(t) = E t^(X+1)` for `t` in `[0, 1]`.
    pub fn eta(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                domain: "[0, 1]",
            });
        }
        Ok(self.eta_at(t))
    }

    /// Horner evaluation of `eta` at any real `t`.
    pub(crate) fn eta_at(&self, t: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.probs.len() - 1) as i64 - 1
    }
}

/// Parameters as they appear in a JSON config object: either the binary
/// `{"alpha": .., "beta": ..}` form or a general `{"x_pmf": {..}}` law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsConfig {
    Binary {
        alpha: f64,
        beta: f64,
    },
    General {
        x_pmf: BTreeMap<String, f64>,
    },
}

impl ParamsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn into_binary(self) -> Result<BinaryParams> {
        match self {
            ParamsConfig::Binary { alpha, beta } => BinaryParams::new(alpha, beta),
            ParamsConfig::General { .. } => Err(Error::invalid(
                "config",
                "expected {\"alpha\", \"beta\"}, found x_pmf",
            )),
        }
    }

    pub fn into_xlaw(self) -> Result<XLaw> {
        match self {
            ParamsConfig::Binary { alpha, beta } => {
                Ok(binary_as_xlaw(&BinaryParams::new(alpha, beta)?))
            }
            ParamsConfig::General { x_pmf } => XLaw::from_string_map(&x_pmf),
        }
    }
}

/// A reproducible random stream: one master seed, many independent streams.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// keystreams for the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    /// Another stream under the same master seed.
    pub fn with_index(self, stream_index: u64) -> Self {
        RngStream {
            stream_index,
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
