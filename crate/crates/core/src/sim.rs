//! Discrete-event simulation of `~/~/n/n` loss systems.
//!
//! Arrivals that find all `n` servers busy are blocked; arrivals lost to
//! outage never reach the servers. A departure and an arrival at the same
//! instant are ordered departure first.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::counts::CountPmf;
use crate::dist::{sample_interarrival, QueueSpec, ServiceSpec};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_SEED: u64 = 20_190_601;
pub const DEFAULT_REPLICATIONS: u32 = 10;

/// Times are shifted back to zero once the clock passes this value, so
/// that differences between nearby event times keep full precision.
const REBASE_AT: f64 = 4096.0;
/// Relative tolerance (of the mean service time) for simultaneous events.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub queue: QueueSpec,
    /// Arrivals offered per replication.
    pub horizon: u64,
    /// Leading arrivals of each replication excluded from statistics.
    pub warmup: u64,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    /// Config with the default warmup (10% of the horizon), seed and
    /// replication count.
    pub fn new(queue: QueueSpec, horizon: u64) -> Result<Self> {
        let c = Self {
            queue,
            horizon,
            warmup: horizon / 10,
            seed: DEFAULT_SEED,
            replications: DEFAULT_REPLICATIONS,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: u32) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.queue.validate()?;
        if self.horizon <= self.warmup {
            return Err(invalid("sim.horizon", "must exceed the warmup"));
        }
        if self.replications == 0 {
            return Err(invalid("sim.replications", "at least one replication is required"));
        }
        Ok(())
    }

    fn rng(&self, replication: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub offered: u64,
    pub received: u64,
    pub outage_dropped: u64,
    pub served: u64,
    pub blocked: u64,
    /// Pooled `blocked / received`.
    pub p_b_hat: f64,
    /// Half-width of the 3-sigma interval across replication estimates.
    pub p_b_ci: f64,
    /// Measured time spent with `y` busy servers, `y = 0..=n`.
    pub state_time: Vec<f64>,
    pub elapsed: f64,
    /// Time-average fraction of busy servers.
    pub busy_fraction: f64,
    /// Half-width of the 3-sigma interval for `busy_fraction`.
    pub busy_fraction_ci: f64,
    pub replication_p_b: Vec<f64>,
    pub replication_busy_fraction: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    offered: u64,
    received: u64,
    dropped: u64,
    served: u64,
    blocked: u64,
    state_time: Vec<f64>,
    elapsed: f64,
}

/// Receives each received (post-outage) arrival after the warmup.
trait Observer {
    fn arrival(&mut self, _t: f64, _accepted: bool) {}
    fn rebase(&mut self, _shift: f64) {}
}

struct NoObserver;
impl Observer for NoObserver {}

fn replicate<O: Observer>(config: &SimConfig, replication: u32, observer: &mut O) -> Tally {
    let q = &config.queue;
    let sampler = q.service.sampler();
    let tol = TIE_TOL * q.service.mean();
    let mut rng = config.rng(replication);
    let mut busy: BinaryHeap<Reverse<Time>> = BinaryHeap::with_capacity(q.n + 1);
    let mut tally = Tally {
        state_time: vec![0.0; q.n + 1],
        ..Tally::default()
    };
    let mut t = 0.0;
    let mut last = 0.0;

    for i in 0..config.horizon {
        t += sample_interarrival(&q.arrivals, &mut rng);
        if t > REBASE_AT {
            let heap: Vec<_> = busy.drain().map(|Reverse(Time(d))| Reverse(Time(d - t))).collect();
            busy.extend(heap);
            observer.rebase(t);
            last -= t;
            t = 0.0;
        }
        let measuring = i >= config.warmup;
        if i == config.warmup {
            last = t;
        }
        while let Some(&Reverse(Time(d))) = busy.peek() {
            if d > t + tol {
                break;
            }
            busy.pop();
            if measuring {
                let d = d.min(t).max(last);
                tally.state_time[busy.len() + 1] += d - last;
                last = d;
            }
        }
        if measuring {
            tally.state_time[busy.len()] += t - last;
            last = t;
            tally.offered += 1;
        }
        if q.p_o > 0.0 && rng.gen::<f64>() < q.p_o {
            if measuring {
                tally.dropped += 1;
            }
            continue;
        }
        let accepted = busy.len() < q.n;
        if accepted {
            let s = sampler.sample(&mut rng);
            busy.push(Reverse(Time(t + s)));
        }
        if measuring {
            tally.received += 1;
            if accepted {
                tally.served += 1;
            } else {
                tally.blocked += 1;
            }
            observer.arrival(t, accepted);
        }
    }
    tally.elapsed = tally.state_time.iter().sum();
    tally
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Runs all replications and pools their tallies.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let tallies: Vec<Tally> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, r, &mut NoObserver))
        .collect();

    let n = config.queue.n;
    let mut state_time = vec![0.0; n + 1];
    let (mut offered, mut received, mut dropped, mut served, mut blocked) = (0, 0, 0, 0, 0);
    for t in &tallies {
        offered += t.offered;
        received += t.received;
        dropped += t.dropped;
        served += t.served;
        blocked += t.blocked;
        for (acc, v) in state_time.iter_mut().zip(&t.state_time) {
            *acc += v;
        }
    }
    let busy_fraction = busy(&state_time, n);
    let replication_p_b: Vec<f64> = tallies.iter().map(|t| ratio(t.blocked, t.received)).collect();
    let replication_busy_fraction: Vec<f64> = tallies.iter().map(|t| busy(&t.state_time, n)).collect();
    Ok(SimResult {
        offered,
        received,
        outage_dropped: dropped,
        served,
        blocked,
        p_b_hat: ratio(blocked, received),
        p_b_ci: ci3(&replication_p_b),
        elapsed: state_time.iter().sum(),
        state_time,
        busy_fraction,
        busy_fraction_ci: ci3(&replication_busy_fraction),
        replication_p_b,
        replication_busy_fraction,
    })
}

/// Time-average fraction of busy servers.
fn busy(state_time: &[f64], n: usize) -> f64 {
    let elapsed: f64 = state_time.iter().sum();
    if elapsed > 0.0 {
        state_time.iter().enumerate().map(|(y, s)| y as f64 * s).sum::<f64>() / (n as f64 * elapsed)
    } else {
        0.0
    }
}

/// Three standard errors of the mean of `xs`.
fn ci3(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    3.0 * (var / r).sqrt()
}

struct WindowCounter {
    tau: f64,
    tol: f64,
    open: Vec<(f64, usize)>,
    histogram: Vec<u64>,
}

impl WindowCounter {
    fn close(&mut self, count: usize) {
        if self.histogram.len() <= count {
            self.histogram.resize(count + 1, 0);
        }
        self.histogram[count] += 1;
    }
}

impl Observer for WindowCounter {
    fn arrival(&mut self, t: f64, accepted: bool) {
        let mut i = 0;
        while i < self.open.len() {
            let (end, count) = self.open[i];
            if t > end + self.tol {
                self.open.swap_remove(i);
                self.close(count);
            } else {
                self.open[i].1 += 1;
                i += 1;
            }
        }
        if accepted {
            self.open.push((t + self.tau, 0));
        }
    }

    fn rebase(&mut self, shift: f64) {
        for w in &mut self.open {
            w.0 -= shift;
        }
    }
}

/// Number of windows that saw `k` received arrivals, where a window is the
/// service time following a service start. Pooled over replications;
/// windows still open when a replication ends are discarded.
pub fn window_histogram(config: &SimConfig) -> Result<Vec<u64>> {
    config.validate()?;
    let tau = match config.queue.service {
        ServiceSpec::Deterministic { tau } => tau,
        _ => {
            return Err(Error::Unsupported(
                "empirical counts need a deterministic service time".to_string(),
            ))
        }
    };
    let histograms: Vec<Vec<u64>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut counter = WindowCounter {
                tau,
                tol: TIE_TOL * tau,
                open: Vec::new(),
                histogram: Vec::new(),
            };
            replicate(config, r, &mut counter);
            counter.histogram
        })
        .collect();
    let len = histograms.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let mut totals = vec![0u64; len];
    for h in &histograms {
        for (acc, c) in totals.iter_mut().zip(h) {
            *acc += c;
        }
    }
    Ok(totals)
}

/// [`window_histogram`] normalized to a count distribution.
pub fn empirical_counts(config: &SimConfig) -> Result<CountPmf> {
    let totals = window_histogram(config)?;
    let windows: u64 = totals.iter().sum();
    if windows == 0 {
        return Err(invalid("sim.horizon", "no complete counting windows"));
    }
    let probs = totals.iter().map(|&c| c as f64 / windows as f64).collect();
    CountPmf::new(probs, 0.0, config.queue.service.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::InterArrivalProcess;
    use crate::reference::erlang_b;

    fn queue(n: usize, arrivals: InterArrivalProcess, tau: f64, p_o: f64) -> QueueSpec {
        QueueSpec::new(n, arrivals, ServiceSpec::Deterministic { tau }, p_o).unwrap()
    }

    #[test]
    fn periodic_arrivals_alternate() {
        let q = queue(1, InterArrivalProcess::discrete([(1.0, 1.0)]).unwrap(), 1.5, 0.0);
        let r = run(&SimConfig::new(q, 100_000).unwrap().with_replications(1)).unwrap();
        assert!((r.p_b_hat - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn tiny_service_never_blocks() {
        let q = queue(1, InterArrivalProcess::exponential(3.0).unwrap(), 1e-9, 0.0);
        let r = run(&SimConfig::new(q, 20_000).unwrap()).unwrap();
        assert_eq!(r.blocked, 0);
        assert_eq!(r.p_b_hat, 0.0);
    }

    #[test]
    fn conservation_and_state_time() {
        let q = queue(2, InterArrivalProcess::exponential(1.0).unwrap(), 1.0, 0.3);
        let r = run(&SimConfig::new(q, 20_000).unwrap()).unwrap();
        assert_eq!(r.offered, r.received + r.outage_dropped);
        assert_eq!(r.received, r.served + r.blocked);
        let total: f64 = r.state_time.iter().sum();
        assert!((total - r.elapsed).abs() <= 1e-9 * r.elapsed);
        assert!(r.busy_fraction > 0.0 && r.busy_fraction < 1.0);
    }

    #[test]
    fn same_seed_same_result() {
        let q = queue(2, InterArrivalProcess::exponential(1.0).unwrap(), 1.0, 0.1);
        let c = SimConfig::new(q, 10_000).unwrap().with_seed(7);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        assert_ne!(run(&c).unwrap(), run(&c.clone().with_seed(8)).unwrap());
    }

    #[test]
    fn md22_tracks_erlang_b() {
        let q = queue(2, InterArrivalProcess::exponential(1.25).unwrap(), 1.0, 0.0);
        let r = run(&SimConfig::new(q, 100_000).unwrap()).unwrap();
        let e = erlang_b(2, 1.25);
        assert!((r.p_b_hat - e).abs() <= r.p_b_ci, "{} vs {e} ± {}", r.p_b_hat, r.p_b_ci);
    }

    #[test]
    fn empirical_counts_periodic() {
        let q = queue(1, InterArrivalProcess::discrete([(1.0, 1.0)]).unwrap(), 0.5, 0.0);
        let c = empirical_counts(&SimConfig::new(q, 10_000).unwrap()).unwrap();
        assert_eq!(c.probs(), &[1.0]);
    }

    #[test]
    fn empirical_counts_needs_deterministic_service() {
        let q = QueueSpec::new(
            1,
            InterArrivalProcess::exponential(1.0).unwrap(),
            ServiceSpec::Binned(vec![crate::dist::Atom::new(0.5, 0.5), crate::dist::Atom::new(1.5, 0.5)]),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            empirical_counts(&SimConfig::new(q, 1000).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn config_validation() {
        let q = queue(1, InterArrivalProcess::exponential(1.0).unwrap(), 1.0, 0.0);
        assert!(SimConfig::new(q.clone(), 0).is_err());
        assert!(SimConfig::new(q.clone(), 100)
            .unwrap()
            .with_replications(0)
            .validate()
            .is_err());
        assert!(SimConfig::new(q, 100).unwrap().with_warmup(100).validate().is_err());
    }
}
