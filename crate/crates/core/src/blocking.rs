//! Blocking-probability bounds and the prior-based approximation.
//!
//! The queue is observed over consecutive windows of one service time.
//! With `K` messages in service at the start of a window, `A` arrivals and
//! `D` departures within it, the number blocked is `max(K + A - D - n, 0)`
//! and the blocking probability is `E[blocked] / (E[blocked] + n)`.

use std::fmt;
use std::str::FromStr;

use crate::counts::CountPmf;
use crate::error::{Error, Result};

const TAIL_WARN: f64 = 1e-9;

/// Probability mass function over a contiguous signed integer range.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPmf {
    offset: i64,
    probs: Vec<f64>,
}

impl SignedPmf {
    pub fn new(offset: i64, probs: Vec<f64>) -> Self {
        Self { offset, probs }
    }

    pub fn from_counts(probs: &[f64]) -> Self {
        Self::new(0, probs.to_vec())
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_value(&self) -> i64 {
        self.offset + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, x: i64) -> f64 {
        let i = x - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Distribution of `-X`.
    pub fn reversed(&self) -> Self {
        let probs: Vec<f64> = self.probs.iter().rev().copied().collect();
        Self::new(-self.max_value(), probs)
    }

    /// Distribution of `X + Y` for independent `X`, `Y`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(self.offset + other.offset, out)
    }

    pub fn normalized(mut self) -> Self {
        let t = self.total();
        if t > 0.0 {
            self.probs.iter_mut().for_each(|p| *p /= t);
        }
        self
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.offset + i as i64) as f64 * p)
            .sum()
    }
}

/// How departures within a window are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DemodModel {
    /// Departures equal last window's accepted arrivals, `min(A, n)`.
    #[default]
    Clipped,
    /// All `n` servers complete within the window.
    Full,
}

impl DemodModel {
    pub const ALL: [DemodModel; 2] = [DemodModel::Clipped, DemodModel::Full];

    pub fn label(self) -> &'static str {
        match self {
            Self::Clipped => "clipped",
            Self::Full => "full",
        }
    }
}

impl fmt::Display for DemodModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DemodModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clipped" => Ok(Self::Clipped),
            "full" => Ok(Self::Full),
            other => Err(Error::UnknownLabel {
                kind: "demod model",
                label: other.to_string(),
            }),
        }
    }
}

/// Prior on the number of messages in service at the start of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// Arrival counts folded into `[0, n]`.
    General,
    /// Empty system at every window start (degenerate arrivals, one server).
    DegenerateN1,
}

impl PriorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::General => "general",
            Self::DegenerateN1 => "degenerate-n1",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::General),
            "degenerate-n1" => Ok(Self::DegenerateN1),
            other => Err(Error::UnknownLabel {
                kind: "prior",
                label: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockingReport {
    pub p_lower: f64,
    pub p_upper: f64,
    /// Approximation clamped into `[p_lower, p_upper]`.
    pub p_approx: f64,
    /// Approximation before clamping.
    pub p_raw: f64,
    pub prior_used: String,
    pub demod_model: DemodModel,
    /// Expected blocked messages per window.
    pub expected_blocked: f64,
    /// Set when the count pmf was truncated with more than 1e-9 residual mass.
    pub tail_warning: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Lower bound: nothing carried over from the previous window.
pub fn lower_bound(counts: &CountPmf, n: usize) -> f64 {
    let a = counts.with_tail_folded();
    let excess: f64 = a.iter().enumerate().skip(n + 1).map(|(k, p)| p * (k - n) as f64).sum();
    ratio(excess, n)
}

/// Upper bound: every server still busy when the window opens.
pub fn upper_bound(counts: &CountPmf, n: usize) -> f64 {
    let a = counts.with_tail_folded();
    let excess: f64 = a.iter().enumerate().skip(n).map(|(k, p)| p * k as f64).sum();
    ratio(excess, n)
}

fn ratio(blocked: f64, n: usize) -> f64 {
    if blocked <= 0.0 {
        0.0
    } else {
        blocked / (blocked + n as f64)
    }
}

/// Folds all mass at or above `n` onto `n`.
fn clip(a: &[f64], n: usize, window: f64) -> CountPmf {
    let mut probs = vec![0.0; n + 1];
    for (k, p) in a.iter().enumerate() {
        probs[k.min(n)] += p;
    }
    while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
        probs.pop();
    }
    CountPmf::from_parts(probs, 0.0, window)
}

/// Distribution of departures within one window.
pub fn demod_pmf(arrival_counts: &CountPmf, n: usize, model: DemodModel) -> CountPmf {
    match model {
        DemodModel::Full => CountPmf::point_mass(n, arrival_counts.window()),
        DemodModel::Clipped => clip(&arrival_counts.with_tail_folded(), n, arrival_counts.window()),
    }
}

/// Prior on the spill-over into a window, supported on `[0, n]`.
pub fn spillover_prior(arrival_counts: &CountPmf, n: usize, kind: PriorKind) -> CountPmf {
    match kind {
        PriorKind::DegenerateN1 => CountPmf::point_mass(0, arrival_counts.window()),
        PriorKind::General => clip(&arrival_counts.with_tail_folded(), n, arrival_counts.window()),
    }
}

/// Prior used when none is given explicitly: empty-system prior for
/// degenerate arrivals at one server, arrival counts folded into `[0, n]`
/// otherwise.
pub fn default_prior_kind(markovian: bool, n: usize) -> PriorKind {
    if !markovian && n == 1 {
        PriorKind::DegenerateN1
    } else {
        PriorKind::General
    }
}

struct Pass {
    report: BlockingReport,
    occupancy: SignedPmf,
}

fn single_pass(arrival_counts: &CountPmf, n: usize, prior: &CountPmf, model: DemodModel) -> Result<Pass> {
    let pp = prior.probs();
    if prior.tail_mass() > 0.0 || pp.iter().skip(n + 1).any(|&p| p != 0.0) {
        return Err(Error::PriorSupport { n, len: pp.len() });
    }
    let arrivals = SignedPmf::from_counts(&arrival_counts.with_tail_folded());
    let departures = SignedPmf::from_counts(demod_pmf(arrival_counts, n, model).probs());
    let z = arrivals.convolve(&departures.reversed());
    let x = SignedPmf::from_counts(pp).convolve(&z).normalized();

    let cap = n as i64;
    let expected_blocked: f64 = x
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| (x.offset() + i as i64, p))
        .filter(|(v, _)| *v > cap)
        .map(|(v, p)| (v - cap) as f64 * p)
        .sum();
    let p_raw = ratio(expected_blocked, n);
    let p_lower = lower_bound(arrival_counts, n);
    let p_upper = upper_bound(arrival_counts, n);
    Ok(Pass {
        report: BlockingReport {
            p_lower,
            p_upper,
            p_approx: p_raw.clamp(p_lower, p_upper),
            p_raw,
            prior_used: "given".to_string(),
            demod_model: model,
            expected_blocked,
            tail_warning: arrival_counts.tail_mass() > TAIL_WARN,
            iterations: 1,
            converged: true,
        },
        occupancy: x,
    })
}

/// Prior-based blocking approximation with its bounds.
///
/// Departures `D` come from [`demod_pmf`]; the window balance is
/// `X = prior + A - D` with the three terms taken independent, and
/// `X` renormalised. Mass of `X` above `n` is blocked.
pub fn approximate_blocking(
    arrival_counts: &CountPmf,
    n: usize,
    prior: &CountPmf,
    model: DemodModel,
) -> Result<BlockingReport> {
    single_pass(arrival_counts, n, prior, model).map(|p| p.report)
}

fn clamp_occupancy(x: &SignedPmf, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, p) in x.probs().iter().enumerate() {
        let v = (x.offset() + i as i64).clamp(0, n as i64);
        out[v as usize] += p;
    }
    out
}

/// Repeats [`approximate_blocking`], feeding the window-end occupancy back
/// as the next prior, starting from the general prior.
///
/// Stops when the prior moves less than `tol` in total variation or after
/// `max_iters` passes; the last report is flagged `converged = false` in
/// the latter case.
pub fn iterate_prior(
    arrival_counts: &CountPmf,
    n: usize,
    model: DemodModel,
    max_iters: usize,
    tol: f64,
) -> Result<BlockingReport> {
    if max_iters == 0 {
        return Err(crate::error::invalid("max_iters", "must be at least 1"));
    }
    let mut prior = spillover_prior(arrival_counts, n, PriorKind::General).padded(n + 1);
    let mut iterations = 0;
    loop {
        let pass = single_pass(arrival_counts, n, &prior, model)?;
        iterations += 1;
        let next = clamp_occupancy(&pass.occupancy, n);
        let tv = 0.5 * next.iter().zip(prior.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let converged = tv < tol;
        if converged || iterations >= max_iters {
            let mut report = pass.report;
            report.iterations = iterations;
            report.converged = converged;
            report.prior_used = if iterations == 1 {
                PriorKind::General.label().to_string()
            } else {
                "fixed-point".to_string()
            };
            return Ok(report);
        }
        prior = CountPmf::from_parts(next, 0.0, arrival_counts.window());
    }
}
