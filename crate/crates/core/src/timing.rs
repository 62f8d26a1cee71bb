//! Idle/busy timing of a single-server loss system.
//!
//! A cycle is one service of length `tau` followed by the idle gap until
//! the next arrival. `C_k` is the part of the mean idle gap contributed by
//! the case where exactly `k` arrivals fell inside the service window.

use crate::counts::{partial_sum_levels, DEFAULT_EPS_MERGE};
use crate::dist::{Discrete, InterArrivalProcess};
use crate::error::{invalid, Error, Result};

const SERIES_EPS: f64 = 1e-15;
const SERIES_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRatios {
    /// Mean idle time per cycle.
    pub t0: f64,
    /// Mean busy time per cycle, equal to `tau`.
    pub t1: f64,
    pub q0: f64,
    pub q1: f64,
    /// Mean number of messages in service.
    pub l: f64,
    pub eta: f64,
    pub zeta: f64,
}

/// `C_k = exp(-lambda tau) lambda^(k-1) tau^k / k!` until the terms fall
/// below `eps` times the running sum.
pub fn idle_gap_terms_markov(lambda: f64, tau: f64, eps: f64) -> Result<Vec<f64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    let m = lambda * tau;
    let ln_c0 = -m - lambda.ln();
    let mut terms = Vec::new();
    let mut ln_term = ln_c0;
    let mut sum = 0.0;
    for k in 0..SERIES_CAP {
        if k > 0 {
            ln_term += m.ln() - (k as f64).ln();
        }
        let c = ln_term.exp();
        terms.push(c);
        sum += c;
        if k as f64 > m && c < eps * sum {
            return Ok(terms);
        }
    }
    Err(Error::CapExceeded {
        what: "idle-gap series",
        needed: m,
        cap: SERIES_CAP,
    })
}

/// Idle-gap terms for degenerate arrivals: probability-weighted overshoot
/// `sum - tau` of the first partial sum that exceeds `tau`.
pub fn idle_gap_terms_discrete(process: &Discrete, tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    let levels = partial_sum_levels(process, tau, DEFAULT_EPS_MERGE)?;
    let limit = tau * (1.0 + DEFAULT_EPS_MERGE);
    Ok(levels
        .iter()
        .map(|level| {
            level
                .iter()
                .flat_map(|&(s, w)| {
                    process
                        .atoms()
                        .iter()
                        .filter(move |a| s + a.time > limit)
                        .map(move |a| w * a.prob * (s + a.time - tau))
                })
                .sum()
        })
        .collect())
}

/// State ratios, utilization and non-blocking utilization of a `~/D/1/1`
/// queue with service time `tau` and blocking probability `p_b`.
pub fn state_analysis(process: &InterArrivalProcess, tau: f64, p_b: f64) -> Result<StateRatios> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    if !(0.0..=1.0).contains(&p_b) {
        return Err(invalid("p_b", format!("{p_b} is outside [0, 1]")));
    }
    let terms = match process {
        InterArrivalProcess::Exponential { rate } => idle_gap_terms_markov(*rate, tau, SERIES_EPS)?,
        InterArrivalProcess::Discrete(d) => idle_gap_terms_discrete(d, tau)?,
    };
    let t0: f64 = terms.iter().sum();
    let t1 = tau;
    let q1 = t1 / (t0 + t1);
    let q0 = 1.0 - q1;
    let l = q1;
    let eta = l;
    Ok(StateRatios {
        t0,
        t1,
        q0,
        q1,
        l,
        eta,
        zeta: eta * (1.0 - p_b),
    })
}

/// [`state_analysis`] for `n` servers; only `n = 1` is supported.
pub fn state_analysis_n(process: &InterArrivalProcess, n: usize, tau: f64, p_b: f64) -> Result<StateRatios> {
    if n != 1 {
        return Err(Error::Unsupported(format!(
            "timing analysis needs a single server, got n = {n}"
        )));
    }
    state_analysis(process, tau, p_b)
}
