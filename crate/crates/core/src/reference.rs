//! Closed-form and brute-force oracles.

use crate::counts::CountPmf;
use crate::dist::Discrete;
use crate::error::{invalid, Error, Result};

/// Sequence budget for [`brute_force_counts`].
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Erlang-B blocking probability for `n` servers at offered load `rho`.
///
/// Uses `E(k) = rho E(k-1) / (k + rho E(k-1))`, `E(0) = 1`.
pub fn erlang_b(n: usize, rho: f64) -> f64 {
    let mut e = 1.0;
    for k in 1..=n {
        e = rho * e / (k as f64 + rho * e);
    }
    e
}

/// Arrival counts by explicit enumeration of every atom sequence.
///
/// Exponential in the window depth; only meant as an oracle for
/// [`crate::counts::discrete_counts`].
pub fn brute_force_counts(process: &Discrete, tau: f64, depth_cap: usize) -> Result<CountPmf> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("{tau} must be nonnegative")));
    }
    let atoms = process.atoms();
    let depth = (tau / process.min_time()).floor() as usize;
    if depth > depth_cap {
        return Err(Error::CapExceeded {
            what: "enumeration depth",
            needed: depth as f64,
            cap: depth_cap,
        });
    }
    let sequences = (atoms.len() as f64).powi(depth as i32 + 1);
    if sequences > ENUMERATION_BUDGET {
        return Err(Error::CapExceeded {
            what: "enumerated sequences",
            needed: sequences,
            cap: ENUMERATION_BUDGET as usize,
        });
    }
    let limit = tau * (1.0 + crate::counts::DEFAULT_EPS_MERGE);
    let mut at_least = vec![0.0; depth + 2];

    fn walk(atoms: &[crate::dist::Atom], limit: f64, sum: f64, weight: f64, k: usize, at_least: &mut [f64]) {
        at_least[k] += weight;
        for a in atoms {
            let s = sum + a.time;
            if s <= limit {
                walk(atoms, limit, s, weight * a.prob, k + 1, at_least);
            }
        }
    }
    walk(atoms, limit, 0.0, 1.0, 0, &mut at_least);

    while at_least.len() > 1 && at_least[at_least.len() - 1] == 0.0 {
        at_least.pop();
    }
    let probs = (0..at_least.len())
        .map(|k| (at_least[k] - at_least.get(k + 1).copied().unwrap_or(0.0)).clamp(0.0, 1.0))
        .collect();
    CountPmf::new(probs, 0.0, tau)
}
