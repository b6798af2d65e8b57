//! Monte Carlo estimation and independent numerical oracles.
//!
//! Replicate `i` of a run with master seed `s` always uses
//! `RngStream::new(s, i)`, so results do not depend on the thread count.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::analytics::{self, ExactSolution, Regime};
use crate::error::{Error, Result};
use crate::params::{BinaryParams, RngStream, XLaw};
use crate::stats::{self, TailFit, TailFitNote};
use crate::tree::{bernoulli, SampleCaps};

/// Smallest replicate count [`estimate`] accepts.
pub const MIN_REPLICATES: u64 = 1000;

/// Summary of one sampled labelled tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSample {
    pub n_nodes: u64,
    pub height: u32,
    pub w0: i64,
    pub contrib_height: u32,
    pub truncated: bool,
}

impl TreeSample {
    pub fn height_fraction(&self) -> f64 {
        self.contrib_height as f64 / self.height.max(1) as f64
    }
}

struct Frame {
    generation: u32,
    acc: i64,
    contrib: i64,
    pending: u8,
}

/// Grow a drainage tree depth first while computing the root runoff and the
/// contributing height, keeping only the current root path in memory.
///
/// Each node draws its point contribution, then its left and right inflow
/// indicators. Once a cap fires no further nodes are created and the sample
/// is flagged; the runoff of the partial tree is reported.
pub fn sample_runoff_tree<R: Rng + ?Sized>(
    beta: f64,
    law: &XLaw,
    rng: &mut R,
    caps: SampleCaps,
) -> TreeSample {
    let beta_bar = 1.0 - beta;
    let frame = |rng: &mut R, generation: u32| {
        let x = law.sample(rng);
        let left = bernoulli(rng, beta_bar) as u8;
        let right = bernoulli(rng, beta) as u8;
        Frame {
            generation,
            acc: x,
            contrib: -1,
            pending: left + right,
        }
    };
    let mut stack = vec![frame(rng, 0)];
    let mut n_nodes = 1u64;
    let mut height = 0u32;
    let mut truncated = false;
    loop {
        let top = stack.last_mut().expect("stack holds the root path");
        if top.pending > 0 {
            top.pending -= 1;
            let g = top.generation + 1;
            if truncated || n_nodes >= caps.max_nodes || g as u64 > caps.max_height {
                truncated = true;
                continue;
            }
            n_nodes += 1;
            height = height.max(g);
            let child = frame(rng, g);
            stack.push(child);
            continue;
        }
        let done = stack.pop().expect("non-empty");
        let w = done.acc.max(0);
        let contrib = if w > 0 {
            done.contrib.max(done.generation as i64)
        } else {
            -1
        };
        match stack.last_mut() {
            Some(parent) => {
                parent.acc += w;
                parent.contrib = parent.contrib.max(contrib);
            }
            None => {
                return TreeSample {
                    n_nodes,
                    height,
                    w0: w,
                    contrib_height: contrib.max(0) as u32,
                    truncated,
                }
            }
        }
    }
}

/// Replicates `first..first + count` under one master seed, in replicate
/// order.
pub fn simulate_range(
    beta: f64,
    law: &XLaw,
    caps: SampleCaps,
    master_seed: u64,
    first: u64,
    count: u64,
) -> Vec<TreeSample> {
    (first..first + count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i).rng();
            sample_runoff_tree(beta, law, &mut rng, caps)
        })
        .collect()
}

pub fn simulate_replicates(
    beta: f64,
    law: &XLaw,
    replicates: u64,
    caps: SampleCaps,
    master_seed: u64,
) -> Vec<TreeSample> {
    simulate_range(beta, law, caps, master_seed, 0, replicates)
}

/// Sample mean of `W`, or why there is none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MeanEstimate {
    Estimated {
        mean: f64,
        stderr: f64,
        /// Set at criticality: the variance of `W` is infinite and the
        /// standard error is not trustworthy.
        slow_convergence: bool,
    },
    Diverges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContribSummary {
    pub mean_height: f64,
    pub mean_fraction: f64,
    pub fraction_ge_0_9: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub alpha: f64,
    pub beta: f64,
    pub master_seed: u64,
    pub replicates: u64,
    pub truncated_fraction: f64,
    pub p0_hat: f64,
    pub p0_stderr: f64,
    pub mean_w: MeanEstimate,
    pub tail_fit: Option<TailFit>,
    pub tail_note: Option<String>,
    /// Smallest root runoff among truncated trees. Truncated values are
    /// lower bounds, so the empirical survival function is exact below it.
    pub censor_floor: Option<f64>,
    /// The tail fit restricted to values below `censor_floor`.
    pub tail_fit_below_censoring: Option<TailFit>,
    pub hill_exponent: Option<f64>,
    pub contrib: ContribSummary,
    pub exact: ExactSolution,
    pub z_p0: f64,
    pub z_mean: Option<f64>,
}

/// Sample `replicates` labelled trees for two-point `X` and compare with the
/// exact solution.
pub fn estimate(
    p: &BinaryParams,
    replicates: u64,
    caps: SampleCaps,
    master_seed: u64,
) -> Result<(McReport, Vec<TreeSample>)> {
    if replicates < MIN_REPLICATES {
        return Err(Error::invalid(
            "replicates",
            format!("{replicates} is below the minimum of {MIN_REPLICATES}"),
        ));
    }
    caps.validate()?;
    let exact = analytics::solve(p)?;
    let samples = simulate_replicates(p.beta(), &p.to_xlaw(), replicates, caps, master_seed);
    let report = summarize(p, &exact, master_seed, &samples);
    Ok((report, samples))
}

pub fn summarize(
    p: &BinaryParams,
    exact: &ExactSolution,
    master_seed: u64,
    samples: &[TreeSample],
) -> McReport {
    let n = samples.len();
    let nf = n as f64;
    let truncated = samples.iter().filter(|s| s.truncated).count();
    let zeros = samples.iter().filter(|s| s.w0 == 0).count();
    let p0_hat = zeros as f64 / nf;
    let p0_stderr = stats::proportion_stderr(p0_hat, n);
    let w: Vec<f64> = samples.iter().map(|s| s.w0 as f64).collect();

    let mean_w = match exact.regime {
        _ if exact.expected_w.is_infinite() => MeanEstimate::Diverges,
        r => {
            let (mean, stderr) = stats::mean_stderr(&w);
            MeanEstimate::Estimated {
                mean,
                stderr,
                slow_convergence: r == Regime::Critical,
            }
        }
    };
    let (tail_fit, tail_note) = match stats::fit_tail(&w) {
        Ok(fit) => (Some(fit), None),
        Err(TailFitNote::TooFewSamples { needed, have }) => (
            None,
            Some(format!("tail fit needs {needed} replicates, have {have}")),
        ),
        Err(TailFitNote::NonPositiveTail) => (
            None,
            Some("the top order statistics include W = 0".to_string()),
        ),
    };
    let censor_floor = samples
        .iter()
        .filter(|s| s.truncated)
        .map(|s| s.w0 as f64)
        .reduce(f64::min);
    let tail_fit_below_censoring = censor_floor.and_then(|c| stats::fit_tail_below(&w, c));
    let hill_exponent = tail_fit.and_then(|fit| stats::hill_estimator(&w, fit.points));
    let contrib = ContribSummary {
        mean_height: samples.iter().map(|s| s.contrib_height as f64).sum::<f64>() / nf,
        mean_fraction: samples.iter().map(|s| s.height_fraction()).sum::<f64>() / nf,
        fraction_ge_0_9: samples.iter().filter(|s| s.height_fraction() >= 0.9).count() as f64 / nf,
    };
    let z_p0 = (p0_hat - exact.p0) / p0_stderr;
    let z_mean = match mean_w {
        MeanEstimate::Estimated { mean, stderr, .. } if exact.expected_w.is_finite() => {
            Some((mean - exact.expected_w) / stderr)
        }
        _ => None,
    };
    McReport {
        alpha: p.alpha(),
        beta: p.beta(),
        master_seed,
        replicates: n as u64,
        truncated_fraction: truncated as f64 / nf,
        p0_hat,
        p0_stderr,
        mean_w,
        tail_fit,
        tail_note,
        censor_floor,
        tail_fit_below_censoring,
        hill_exponent,
        contrib,
        exact: *exact,
        z_p0,
        z_mean,
    }
}

/// A pmf of `W` on `{0, ..., N}` plus the mass `deficit` lying beyond `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WPmf {
    pub probs: Vec<f64>,
    pub deficit: f64,
    pub iterations: usize,
}

impl WPmf {
    pub fn point_mass_at_zero(n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max + 1];
        probs[0] = 1.0;
        WPmf {
            probs,
            deficit: 0.0,
            iterations: 0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn p0(&self) -> f64 {
        self.probs[0]
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `sum_i i p_i` over the tracked support.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    /// `E[W ^ (N + 1)]`: the deficit counted at `N + 1`.
    pub fn censored_mean(&self) -> f64 {
        self.mean() + (self.n_max() + 1) as f64 * self.deficit
    }

    /// `P(W > k)`, counting the deficit as lying beyond every tracked value.
    pub fn survival(&self, k: usize) -> f64 {
        self.probs.iter().skip(k + 1).sum::<f64>() + self.deficit
    }
}

/// Self-convolution, by FFT for long inputs.
struct SelfConvolver {
    len: usize,
    plan: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, usize)>,
}

const FFT_THRESHOLD: usize = 512;

impl SelfConvolver {
    fn new(len: usize) -> Self {
        let plan = (len >= FFT_THRESHOLD).then(|| {
            let size = (2 * len - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(size), planner.plan_fft_inverse(size), size)
        });
        SelfConvolver { len, plan }
    }

    fn convolve(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.len);
        let out_len = 2 * self.len - 1;
        match &self.plan {
            None => {
                let mut out = vec![0.0; out_len];
                for (i, &a) in p.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (j, &b) in p.iter().enumerate() {
                        out[i + j] += a * b;
                    }
                }
                out
            }
            Some((fwd, inv, size)) => {
                let mut buf: Vec<Complex<f64>> = p
                    .iter()
                    .map(|&x| Complex::new(x, 0.0))
                    .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                    .take(*size)
                    .collect();
                fwd.process(&mut buf);
                buf.iter_mut().for_each(|z| *z = *z * *z);
                inv.process(&mut buf);
                let scale = 1.0 / *size as f64;
                buf[..out_len].iter().map(|z| (z.re * scale).max(0.0)).collect()
            }
        }
    }
}

/// Iterates the distributional map `W -> (W_L I_L + W_R I_R + X) v 0`
/// starting from `W = 0`. After `k` steps the pmf is the law of the runoff
/// of the tree cut off below generation `k - 1`.
pub struct PmfIterator {
    beta: f64,
    law: XLaw,
    conv: SelfConvolver,
    current: WPmf,
}

impl PmfIterator {
    pub fn new(beta: f64, law: XLaw, n_max: usize) -> Result<Self> {
        if n_max < 10 {
            return Err(Error::invalid("n-max", format!("{n_max} is below 10")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("{beta} is not in [0, 1]")));
        }
        Ok(PmfIterator {
            beta,
            law,
            conv: SelfConvolver::new(n_max + 1),
            current: WPmf::point_mass_at_zero(n_max),
        })
    }

    pub fn current(&self) -> &WPmf {
        &self.current
    }

    pub fn step(&mut self) -> &WPmf {
        let n = self.current.n_max();
        let (b, bb) = (self.beta, self.beta * (1.0 - self.beta));
        let c2 = b * b + (1.0 - b) * (1.0 - b);
        let p = &self.current.probs;
        let d = self.current.deficit;

        // S = W_L I_L + W_R I_R on the tracked part
        let mut s = self.conv.convolve(p);
        for k in 0..=n {
            s[k] = bb * s[k] + c2 * p[k];
        }
        for v in s.iter_mut().skip(n + 1) {
            *v *= bb;
        }
        s[0] += bb;
        let s_deficit = 1.0 - (1.0 - (1.0 - b) * d) * (1.0 - b * d);

        let mut suffix = vec![0.0; s.len() + 1];
        for k in (0..s.len()).rev() {
            suffix[k] = suffix[k + 1] + s[k];
        }
        let mut q = vec![0.0; n + 1];
        let mut beyond = 0.0;
        for (x, px) in self.law.support() {
            // values s with s + x <= 0 land at zero
            let zero_upto = (-x).max(-1);
            if zero_upto >= 0 {
                q[0] += px * (suffix[0] - suffix[(zero_upto as usize + 1).min(s.len())]);
            }
            for (j, qj) in q.iter_mut().enumerate().skip(1) {
                let k = j as i64 - x;
                if k >= 0 && (k as usize) < s.len() {
                    *qj += px * s[k as usize];
                }
            }
            let first_beyond = (n as i64 + 1 - x).max(0) as usize;
            beyond += px * suffix[first_beyond.min(s.len())];
        }
        self.current = WPmf {
            probs: q,
            deficit: s_deficit + beyond,
            iterations: self.current.iterations + 1,
        };
        &self.current
    }
}

/// The pmf of `W` by `iters` steps of fixed-point iteration from `W = 0`.
pub fn pmf_fixed_point(p: &BinaryParams, n_max: usize, iters: usize) -> Result<WPmf> {
    pmf_fixed_point_law(p.beta(), &p.to_xlaw(), n_max, iters)
}

pub fn pmf_fixed_point_law(beta: f64, law: &XLaw, n_max: usize, iters: usize) -> Result<WPmf> {
    if iters == 0 {
        return Err(Error::invalid("iters", "need at least one iteration"));
    }
    let mut it = PmfIterator::new(beta, law.clone(), n_max)?;
    for _ in 0..iters {
        it.step();
    }
    Ok(it.current().clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Some `p_i` went negative: `p0` was too small.
    Low(usize),
    /// Total mass exceeded 1: `p0` was too large.
    High(usize),
    Survived,
}

fn shoot(p: &BinaryParams, p0: f64, n_max: usize, out: &mut Vec<f64>) -> Shot {
    let (a, b) = (p.alpha(), p.folded_beta());
    let abar = 1.0 - a;
    let bb = b * (1.0 - b);
    let c2 = b * b + (1.0 - b) * (1.0 - b);
    out.clear();
    out.push(p0);
    let lead = c2 + 2.0 * bb * p0;
    // S_k: law of W_L I_L + W_R I_R
    let mut s = vec![bb * p0 * p0 + c2 * p0 + bb];
    s.push(p0 / abar - s[0]);
    let mut mass = p0;
    for i in 0..n_max {
        let conv: f64 = (1..=i).map(|j| out[j] * out[i + 1 - j]).sum();
        let next = (s[i + 1] - bb * conv) / lead;
        if next < 0.0 {
            return Shot::Low(i + 1);
        }
        mass += next;
        if mass > 1.0 {
            return Shot::High(i + 1);
        }
        out.push(next);
        if i + 1 < n_max {
            // p_{i+1} = a S_i + abar S_{i+2}
            let s_next = (next - a * s[i]) / abar;
            s.push(s_next);
        }
    }
    Shot::Survived
}

/// The pmf of `W` for two-point `X` by shooting on `p0`.
///
/// Given `p0` the coefficients `p_1, p_2, ...` follow from the fixed-point
/// equation term by term. A `p0` that is too small eventually drives some
/// `p_i` negative and one that is too large pushes the total mass above 1.
/// Bisection brackets the values of `p0` that survive to `n_max`, and the
/// midpoint of that bracket is used. Useful where plain iteration converges
/// slowly, notably at criticality.
pub fn pmf_shooting(p: &BinaryParams, n_max: usize) -> Result<WPmf> {
    if n_max < 10 {
        return Err(Error::invalid("n-max", format!("{n_max} is below 10")));
    }
    if p.alpha() <= 0.0 || p.alpha() >= 1.0 || p.folded_beta() <= 0.0 {
        return Err(Error::Unsupported(
            "shooting needs 0 < alpha < 1 and 0 < beta < 1".into(),
        ));
    }
    let mut buf = Vec::new();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (0usize, 0.5);
    let mut survivor = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match shoot(p, mid, n_max, &mut buf) {
            Shot::Survived => {
                survivor = Some(mid);
                break;
            }
            Shot::Low(k) => {
                if k > best.0 {
                    best = (k, mid);
                }
                lo = mid;
            }
            Shot::High(k) => {
                if k > best.0 {
                    best = (k, mid);
                }
                hi = mid;
            }
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let p0 = match survivor {
        None => best.1,
        Some(s) => {
            let edge = |mut inside: f64, mut outside: f64| {
                for _ in 0..200 {
                    let m = 0.5 * (inside + outside);
                    if m == inside || m == outside {
                        break;
                    }
                    let mut b = Vec::new();
                    if shoot(p, m, n_max, &mut b) == Shot::Survived {
                        inside = m;
                    } else {
                        outside = m;
                    }
                }
                inside
            };
            let left = edge(s, lo);
            let right = edge(s, hi);
            0.5 * (left + right)
        }
    };
    shoot(p, p0, n_max, &mut buf);
    let mut probs = buf.clone();
    probs.resize(n_max + 1, 0.0);
    let deficit = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(WPmf {
        probs,
        deficit,
        iterations: 0,
    })
}

/// First passage of a lattice walk below its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HittingTime {
    Hit(u64),
    /// The walk had not hit `-1` after `cap` steps.
    Censored(u64),
}

impl HittingTime {
    pub fn value(&self) -> u64 {
        match self {
            HittingTime::Hit(n) | HittingTime::Censored(n) => *n,
        }
    }
}

/// First time the walk with steps `I_L + I_R - 1` (so `-1`, `0`, `+1` with
/// probabilities `b(1 - b)`, `b^2 + (1 - b)^2`, `b(1 - b)`) started at 0
/// reaches `-1`. Has the law of the tree size.
pub fn nt_hitting_time<R: Rng + ?Sized>(beta: f64, rng: &mut R, cap: u64) -> Result<HittingTime> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "need 0 < beta < 1"));
    }
    let mut s = 0i64;
    for n in 1..=cap {
        s += bernoulli(rng, 1.0 - beta) as i64 + bernoulli(rng, beta) as i64 - 1;
        if s == -1 {
            return Ok(HittingTime::Hit(n));
        }
    }
    Ok(HittingTime::Censored(cap))
}

/// Exact tree-size pmf `P(N = n) = P(S_n = -1) / n`, with `S_n` the walk of
/// [`nt_hitting_time`].
pub fn nt_pmf_exact(n: u64, beta: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let bb = beta * (1.0 - beta);
    let c2 = beta * beta + (1.0 - beta) * (1.0 - beta);
    let nf = n as f64;
    let mut total = 0.0;
    // j up-steps, j + 1 down-steps, the rest flat
    for j in 0..=(n - 1) / 2 {
        let jf = j as f64;
        let flat = nf - 2.0 * jf - 1.0;
        let log_term = ln_gamma(nf + 1.0)
            - ln_gamma(jf + 1.0)
            - ln_gamma(jf + 2.0)
            - ln_gamma(flat + 1.0)
            + (2.0 * jf + 1.0) * bb.ln()
            + if flat > 0.0 { flat * c2.ln() } else { 0.0 };
        total += log_term.exp();
    }
    total / nf
}

/// Conditioned contribution statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContribExperiment {
    pub min_height: u32,
    pub replicates_used: u64,
    pub conditioned: u64,
    pub target: u64,
    pub sufficient: bool,
    pub mean_contrib_height: f64,
    pub contrib_height_stderr: f64,
    pub mean_fraction: f64,
    pub count_fraction_ge_0_9: u64,
    pub fraction_ge_0_9: f64,
    pub truncated_fraction: f64,
}

/// Sample trees in batches until `target` of them reach height
/// `min_height`, or `max_replicates` have been drawn, and summarise the
/// contributing heights of those that do.
pub fn contrib_experiment(
    p: &BinaryParams,
    min_height: u32,
    target: u64,
    max_replicates: u64,
    caps: SampleCaps,
    master_seed: u64,
) -> Result<ContribExperiment> {
    if min_height < 10 {
        return Err(Error::invalid("min-height", "must be at least 10"));
    }
    caps.validate()?;
    const BATCH: u64 = 10_000;
    let law = p.to_xlaw();
    let mut kept: Vec<TreeSample> = Vec::new();
    let mut used = 0u64;
    let mut truncated = 0u64;
    while (kept.len() as u64) < target && used < max_replicates {
        let count = BATCH.min(max_replicates - used);
        let batch = simulate_range(p.beta(), &law, caps, master_seed, used, count);
        used += count;
        truncated += batch.iter().filter(|s| s.truncated).count() as u64;
        kept.extend(batch.into_iter().filter(|s| s.height >= min_height));
    }
    let heights: Vec<f64> = kept.iter().map(|s| s.contrib_height as f64).collect();
    let (mean, se) = stats::mean_stderr(&heights);
    let n = kept.len().max(1) as f64;
    let ge = kept.iter().filter(|s| s.height_fraction() >= 0.9).count() as u64;
    Ok(ContribExperiment {
        min_height,
        replicates_used: used,
        conditioned: kept.len() as u64,
        target,
        sufficient: kept.len() as u64 >= target,
        mean_contrib_height: mean,
        contrib_height_stderr: se,
        mean_fraction: kept.iter().map(|s| s.height_fraction()).sum::<f64>() / n,
        count_fraction_ge_0_9: ge,
        fraction_ge_0_9: ge as f64 / n,
        truncated_fraction: truncated as f64 / used.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use proptest::prelude::*;

    fn bp(alpha: f64, beta: f64) -> BinaryParams {
        BinaryParams::new(alpha, beta).unwrap()
    }

    #[test]
    fn zero_alpha_is_point_mass() {
        let pmf = pmf_fixed_point(&bp(0.0, 0.5), 50, 1).unwrap();
        assert_eq!(pmf.p0(), 1.0);
        assert_eq!(pmf.deficit, 0.0);
    }

    #[test]
    fn fixed_point_subcritical() {
        let pmf = pmf_fixed_point(&bp(0.2, 0.5), 2000, 500).unwrap();
        assert!((pmf.p0() - 0.7320508).abs() < 1e-4, "{}", pmf.p0());
        assert!((pmf.mean() - 0.4).abs() < 1e-3, "{}", pmf.mean());
    }

    #[test]
    fn fixed_point_beta_zero_is_geometric() {
        let pmf = pmf_fixed_point(&bp(1.0 / 3.0, 0.0), 200, 400).unwrap();
        for k in 0..60 {
            let exact = 0.5f64.powi(k as i32 + 1);
            assert!((pmf.probs[k] - exact).abs() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn fft_and_direct_agree() {
        let p: Vec<f64> = (0..600).map(|i| 0.9f64.powi(i) * 0.1).collect();
        let fast = SelfConvolver::new(600).convolve(&p);
        let mut slow = SelfConvolver::new(600);
        slow.plan = None;
        let slow = slow.convolve(&p);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn general_law_fixed_point_matches_closed_form() {
        let law = XLaw::new([(1, 0.1), (0, 0.3), (-1, 0.6)]).unwrap();
        let pmf = pmf_fixed_point_law(0.5, &law, 1000, 400).unwrap();
        assert!((pmf.p0() - 0.8257419).abs() < 1e-6);
        assert!((pmf.mean() - 0.2254033).abs() < 1e-6);
    }

    #[test]
    fn shooting_at_criticality() {
        let p = bp(0.25, 0.5);
        let pmf = pmf_shooting(&p, 2000).unwrap();
        let p0 = analytics::p_zero(&p).unwrap();
        assert!((pmf.p0() - p0).abs() < 1e-6, "{} vs {p0}", pmf.p0());
        // tail mass beyond n is about 2 c n^{-1/2}
        assert!(pmf.deficit > 0.0 && pmf.deficit < 0.03);
    }

    #[test]
    fn shooting_is_rejected_outside_its_domain() {
        assert!(pmf_shooting(&bp(0.0, 0.5), 100).is_err());
        assert!(pmf_shooting(&bp(0.2, 0.0), 100).is_err());
    }

    #[test]
    fn hitting_time_first_step() {
        let mut rng = RngStream::new(9, 0).rng();
        let n = 200_000;
        let ones = (0..n)
            .filter(|_| nt_hitting_time(0.5, &mut rng, 1000).unwrap() == HittingTime::Hit(1))
            .count();
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.25).abs() < 4.0 * se);
        let mut rng = RngStream::new(9, 1).rng();
        assert!(matches!(nt_hitting_time(0.5, &mut rng, 1).unwrap(), HittingTime::Hit(1) | HittingTime::Censored(1)));
    }

    #[test]
    fn exact_tree_size_law() {
        assert!((nt_pmf_exact(1, 0.5) - 0.25).abs() < 1e-15);
        // two nodes: the root has one child, which has none
        assert!((nt_pmf_exact(2, 0.5) - 0.5 * 0.25).abs() < 1e-15);
        // P(N >= n) ~ 1 / sqrt(pi b (1 - b) n)
        let total: f64 = (1..2000).map(|n| nt_pmf_exact(n, 0.3)).sum();
        let tail = 1.0 / (pi_bb(0.3) * 2000.0).sqrt();
        assert!((total + tail - 1.0).abs() < 1e-3, "{}", total + tail);
        for n in [1000u64, 5000] {
            let rel = nt_pmf_exact(n, 0.5) / analytics::nt_pmf_asymptote(n, 0.5).unwrap();
            assert!((rel - 1.0).abs() < 0.01);
        }
    }

    fn pi_bb(beta: f64) -> f64 {
        std::f64::consts::PI * beta * (1.0 - beta)
    }

    #[test]
    fn streaming_sampler_runoff_law() {
        // P(W = 0) for a subcritical pair
        let p = bp(0.2, 0.5);
        let samples = simulate_replicates(0.5, &p.to_xlaw(), 40_000, SampleCaps::default(), 3);
        let p0_hat = samples.iter().filter(|s| s.w0 == 0).count() as f64 / 40_000.0;
        let se = stats::proportion_stderr(p0_hat, 40_000);
        assert!((p0_hat - 0.7320508).abs() < 4.0 * se);
    }

    #[test]
    fn replicates_are_independent_of_thread_count() {
        let law = bp(0.3, 0.5).to_xlaw();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let a = one.install(|| simulate_replicates(0.5, &law, 2000, SampleCaps::default(), 5));
        let b = two.install(|| simulate_replicates(0.5, &law, 2000, SampleCaps::default(), 5));
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_rejects_small_runs() {
        assert!(estimate(&bp(0.2, 0.5), 999, SampleCaps::default(), 1).is_err());
    }

    #[test]
    fn estimate_report_fields() {
        let (r, samples) = estimate(&bp(0.2, 0.5), 20_000, SampleCaps::default(), 11).unwrap();
        assert_eq!(samples.len(), 20_000);
        assert!(r.z_p0.abs() < 4.0);
        assert!(matches!(r.mean_w, MeanEstimate::Estimated { slow_convergence: false, .. }));
        assert!(r.z_mean.unwrap().abs() < 4.0);
        assert!(r.tail_fit.is_none() && r.tail_note.is_some());
        assert!(r.truncated_fraction < 1e-3);
        let (r, _) = estimate(&bp(0.4, 0.5), 2000, SampleCaps::default(), 11).unwrap();
        assert_eq!(r.mean_w, MeanEstimate::Diverges);
        assert!(r.z_mean.is_none());
    }

    #[test]
    fn contributions_vanish_without_rain() {
        let e = contrib_experiment(&bp(0.0, 0.5), 10, 200, 100_000, SampleCaps::default(), 1).unwrap();
        assert!(e.sufficient);
        assert_eq!(e.mean_contrib_height, 0.0);
        assert_eq!(e.count_fraction_ge_0_9, 0);
    }

    #[test]
    fn contribution_fraction_grows_with_alpha() {
        let caps = SampleCaps::default();
        let lo = contrib_experiment(&bp(0.2, 0.5), 50, 2000, 1_000_000, caps, 2).unwrap();
        let hi = contrib_experiment(&bp(0.4, 0.5), 50, 2000, 1_000_000, caps, 2).unwrap();
        assert!(hi.mean_fraction > lo.mean_fraction);
    }

    #[test]
    fn streaming_sampler_respects_caps() {
        let law = bp(0.5, 0.5).to_xlaw();
        let caps = SampleCaps::new(50, 8).unwrap();
        for i in 0..2000 {
            let s = sample_runoff_tree(0.5, &law, &mut RngStream::new(4, i).rng(), caps);
            assert!(s.n_nodes <= 50 && s.height <= 8);
            assert!(s.contrib_height <= s.height);
            assert!(s.w0 <= s.n_nodes as i64);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn iterates_increase_and_conserve_mass(a in 0.05f64..0.6, b in 0.05f64..=0.5, n_max in 10usize..700) {
            let mut it = PmfIterator::new(b, bp(a, b).to_xlaw(), n_max).unwrap();
            let mut prev = it.current().clone();
            for _ in 0..30 {
                let next = it.step().clone();
                prop_assert!((next.total_mass() + next.deficit - 1.0).abs() < 1e-12);
                prop_assert!(next.probs.iter().all(|&x| x >= 0.0));
                for k in 0..=n_max {
                    prop_assert!(next.survival(k) >= prev.survival(k) - 1e-12);
                }
                prev = next;
            }
        }

        #[test]
        fn streaming_w_bounded_by_size(seed in any::<u64>(), a in 0.0f64..=1.0) {
            let law = bp(a, 0.5).to_xlaw();
            let s = sample_runoff_tree(0.5, &law, &mut RngStream::new(seed, 0).rng(), SampleCaps::new(5000, 5000).unwrap());
            prop_assert!(s.w0 >= 0 && s.w0 <= s.n_nodes as i64);
            if a == 1.0 && !s.truncated {
                prop_assert_eq!(s.w0, s.n_nodes as i64);
            }
        }
    }
}
