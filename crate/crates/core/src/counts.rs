//! Arrival-count distributions over a service window.
//!
//! A [`CountPmf`] holds `Pr(count = k)` for the number of arrivals that
//! follow an arrival epoch within a window of length `tau`. Suffix sums of
//! the probabilities give the "at least k arrivals" distribution.

use crate::dist::{Atom, Discrete, ServiceSpec};
use crate::error::{invalid, Error, Result};

/// Default truncation tolerance for infinite-support count distributions.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;
/// Default relative tolerance for merging partial sums of discrete atoms.
pub const DEFAULT_EPS_MERGE: f64 = 1e-9;
/// Hard cap on the number of count terms.
pub const TERM_CAP: usize = 1_000_000;
/// Hard cap on distinct partial sums held at one depth of the discrete DP.
pub const STATE_CAP: usize = 4_000_000;

const MASS_TOL: f64 = 1e-9;

/// Truncated probability mass function over nonnegative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPmf {
    probs: Vec<f64>,
    tail_mass: f64,
    window: f64,
}

impl CountPmf {
    pub fn new(probs: Vec<f64>, tail_mass: f64, window: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("probs", "empty pmf"));
        }
        if probs
            .iter()
            .chain([&tail_mass])
            .any(|p| !(p.is_finite() && (0.0..=1.0).contains(p)))
        {
            return Err(invalid("probs", "entries must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid("probs", format!("total mass {total} is not 1")));
        }
        Ok(Self {
            probs,
            tail_mass,
            window,
        })
    }

    pub(crate) fn from_parts(probs: Vec<f64>, tail_mass: f64, window: f64) -> Self {
        Self {
            probs,
            tail_mass,
            window,
        }
    }

    pub fn point_mass(k: usize, window: f64) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self {
            probs,
            tail_mass: 0.0,
            window,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Largest represented count.
    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_mass
    }

    /// Mean over the represented counts (tail excluded).
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `Pr(count >= k)` for `k = 0..=k_max + 1`, tail included.
    pub fn at_least(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.probs.len() + 1];
        let mut acc = self.tail_mass;
        out[self.probs.len()] = acc;
        for k in (0..self.probs.len()).rev() {
            acc += self.probs[k];
            out[k] = acc;
        }
        out
    }

    /// Probabilities with the tail mass placed at `k_max + 1`.
    pub fn with_tail_folded(&self) -> Vec<f64> {
        let mut v = self.probs.clone();
        if self.tail_mass > 0.0 {
            v.push(self.tail_mass);
        }
        v
    }

    /// Copy padded with explicit zero entries up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut probs = self.probs.clone();
        if probs.len() < len {
            probs.resize(len, 0.0);
        }
        Self { probs, ..self.clone() }
    }
}

/// Poisson counts, `Pr(k) = exp(-lambda tau) (lambda tau)^k / k!`.
pub fn poisson_counts(lambda: f64, tau: f64, eps_tail: f64) -> Result<CountPmf> {
    poisson_counts_capped(lambda, tau, eps_tail, TERM_CAP)
}

pub fn poisson_counts_capped(lambda: f64, tau: f64, eps_tail: f64, cap: usize) -> Result<CountPmf> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("{tau} must be nonnegative")));
    }
    if !(eps_tail > 0.0 && eps_tail < 1.0) {
        return Err(invalid("eps_tail", format!("{eps_tail} is outside (0, 1)")));
    }
    let mean = lambda * tau;
    if mean == 0.0 {
        return Ok(CountPmf::point_mass(0, tau));
    }
    // Rough size of the support needed; the loop below decides exactly.
    let estimate = mean + 12.0 * mean.sqrt() + 40.0;
    if estimate > cap as f64 {
        return Err(Error::CapExceeded {
            what: "poisson counts",
            needed: estimate,
            cap,
        });
    }
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    let mut probs = Vec::new();
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let p = (-mean + k as f64 * ln_mean - ln_fact).exp();
        probs.push(p);
        sum += p;
        let ratio = mean / (k as f64 + 2.0);
        if (k as f64 + 1.0) > mean && ratio < 1.0 {
            let next = p * mean / (k as f64 + 1.0);
            let tail_bound = next / (1.0 - ratio);
            if tail_bound <= eps_tail {
                break;
            }
        }
        k += 1;
        if k > cap {
            return Err(Error::CapExceeded {
                what: "poisson counts",
                needed: k as f64,
                cap,
            });
        }
    }
    let tail_mass = (1.0 - sum).clamp(0.0, eps_tail);
    Ok(CountPmf::from_parts(probs, tail_mass, tau))
}

/// Weighted partial sums of discrete atoms, grouped by depth.
///
/// Level `k` holds `(sum, weight)` for all sequences of `k` atoms whose
/// total is at most `tau` (inclusive, within `eps_merge * tau`). Sums
/// closer than that tolerance are merged and their weights added.
pub(crate) fn partial_sum_levels(process: &Discrete, tau: f64, eps_merge: f64) -> Result<Vec<Vec<(f64, f64)>>> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("{tau} must be nonnegative")));
    }
    let depth = (tau / process.min_time()).floor();
    if depth > TERM_CAP as f64 {
        return Err(Error::CapExceeded {
            what: "discrete counts depth",
            needed: depth,
            cap: TERM_CAP,
        });
    }
    let tol = eps_merge * tau;
    let limit = tau + tol;
    let atoms = process.atoms();
    let mut levels = vec![vec![(0.0, 1.0)]];
    loop {
        let prev = levels.last().expect("nonempty");
        let mut next: Vec<(f64, f64)> = Vec::with_capacity(prev.len() * atoms.len());
        for &(s, w) in prev {
            for a in atoms {
                let t = s + a.time;
                if t <= limit && a.prob > 0.0 {
                    next.push((t, w * a.prob));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
        let mut anchor = f64::NEG_INFINITY;
        for (s, w) in next {
            match merged.last_mut() {
                Some(last) if s - anchor <= tol => last.1 += w,
                _ => {
                    anchor = s;
                    merged.push((s, w));
                }
            }
        }
        if merged.len() > STATE_CAP {
            return Err(Error::CapExceeded {
                what: "discrete partial sums",
                needed: merged.len() as f64,
                cap: STATE_CAP,
            });
        }
        levels.push(merged);
    }
    Ok(levels)
}

/// Arrival counts for a degenerate inter-arrival process.
///
/// `Pr(at least k)` is the total weight of `k`-atom sequences summing to at
/// most `tau`; the pmf is the difference of consecutive levels.
pub fn discrete_counts(process: &Discrete, tau: f64, eps_merge: f64) -> Result<CountPmf> {
    let levels = partial_sum_levels(process, tau, eps_merge)?;
    let at_least: Vec<f64> = levels.iter().map(|l| l.iter().map(|(_, w)| w).sum()).collect();
    let probs = (0..at_least.len())
        .map(|k| (at_least[k] - at_least.get(k + 1).copied().unwrap_or(0.0)).max(0.0))
        .collect();
    Ok(CountPmf::from_parts(probs, 0.0, tau))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    v.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        v.push(acc);
    }
    v
}

/// Binomial thinning: each counted message is independently lost with
/// probability `p_o`. Returns the pmf of received messages.
pub fn outage_thin(pmf: &CountPmf, p_o: f64) -> Result<CountPmf> {
    if !(0.0..=1.0).contains(&p_o) {
        return Err(invalid("p_o", format!("{p_o} is outside [0, 1]")));
    }
    if p_o == 0.0 {
        return Ok(pmf.clone());
    }
    if p_o == 1.0 {
        return Ok(CountPmf::point_mass(0, pmf.window));
    }
    let keep = 1.0 - p_o;
    let (ln_keep, ln_lose) = (keep.ln(), p_o.ln());
    let len = pmf.probs.len();
    let lf = ln_factorials(len);
    let mut out = vec![0.0; len];
    for (x, &ax) in pmf.probs.iter().enumerate() {
        if ax == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(x + 1) {
            let ln_b = lf[x] - lf[k] - lf[x - k] + k as f64 * ln_keep + (x - k) as f64 * ln_lose;
            *slot += ax * ln_b.exp();
        }
    }
    Ok(CountPmf::from_parts(out, pmf.tail_mass, pmf.window))
}

/// Rate-weighted mixture of per-class count distributions.
pub fn mixture_counts(classes: &[(f64, CountPmf)]) -> Result<CountPmf> {
    if classes.is_empty() {
        return Err(Error::EmptyMixture);
    }
    if let Some((r, _)) = classes.iter().find(|(r, _)| !(r.is_finite() && *r > 0.0)) {
        return Err(invalid("classes.rate", format!("{r} must be positive")));
    }
    let total: f64 = classes.iter().map(|(r, _)| r).sum();
    let len = classes.iter().map(|(_, p)| p.probs.len()).max().expect("nonempty");
    let mut probs = vec![0.0; len];
    let mut tail = 0.0;
    let mut window = 0.0;
    for (rate, pmf) in classes {
        let w = rate / total;
        for (slot, p) in probs.iter_mut().zip(&pmf.probs) {
            *slot += w * p;
        }
        tail += w * pmf.tail_mass;
        window += w * pmf.window;
    }
    Ok(CountPmf::from_parts(probs, tail, window))
}

/// Equal-probability binning of a piecewise-linear service-time CDF.
///
/// Each of the `bins` quantile slices becomes one atom of probability
/// `1 / bins` placed at the slice's conditional mean. Atoms that land on
/// the same time are merged.
pub fn bin_service_distribution(cdf_samples: &[(f64, f64)], bins: usize) -> Result<ServiceSpec> {
    if cdf_samples.is_empty() {
        return Err(invalid("cdf_samples", "no samples"));
    }
    if bins == 0 {
        return Err(invalid("bins", "at least one bin is required"));
    }
    for (i, &(t, f)) in cdf_samples.iter().enumerate() {
        if !t.is_finite() || !(0.0..=1.0).contains(&f) {
            return Err(Error::NonMonotoneCdf { index: i });
        }
        if i > 0 {
            let (pt, pf) = cdf_samples[i - 1];
            if t < pt || f < pf {
                return Err(Error::NonMonotoneCdf { index: i });
            }
        }
    }
    let last = cdf_samples[cdf_samples.len() - 1].1;
    if (last - 1.0).abs() > crate::dist::PROB_SUM_TOL {
        return Err(invalid(
            "cdf_samples",
            format!("final cumulative probability {last} is not 1"),
        ));
    }

    // Integral of the quantile function over [a, b].
    let quantile_integral = |a: f64, b: f64| -> f64 {
        let (t0, f0) = cdf_samples[0];
        let mut acc = t0 * (b.min(f0) - a).max(0.0);
        for w in cdf_samples.windows(2) {
            let ((ta, fa), (tb, fb)) = (w[0], w[1]);
            if fb <= fa {
                continue;
            }
            let lo = a.max(fa);
            let hi = b.min(fb);
            if hi <= lo {
                continue;
            }
            let q = |u: f64| ta + (u - fa) / (fb - fa) * (tb - ta);
            acc += (hi - lo) * 0.5 * (q(lo) + q(hi));
        }
        acc
    };

    let width = 1.0 / bins as f64;
    let mut atoms: Vec<Atom> = Vec::with_capacity(bins);
    for j in 0..bins {
        let a = j as f64 * width;
        let b = if j + 1 == bins { 1.0 } else { (j + 1) as f64 * width };
        let tau = quantile_integral(a, b) / (b - a);
        match atoms.last_mut() {
            Some(prev) if (tau - prev.time).abs() <= 1e-12 * tau.abs().max(1.0) => prev.prob += width,
            _ => atoms.push(Atom::new(tau, width)),
        }
    }
    let spec = ServiceSpec::Binned(atoms);
    spec.validate()?;
    Ok(spec)
}
