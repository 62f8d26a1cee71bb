//! Inter-arrival and service-time processes.
//!
//! Processes are validated once at construction and are immutable
//! afterwards, so they can be shared freely between simulation
//! replications running on different threads.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Result};

/// Tolerance on the total probability of a discrete distribution.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// One point of a discrete distribution: value `time` with probability `prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub prob: f64,
}

impl Atom {
    pub fn new(time: f64, prob: f64) -> Self {
        Self { time, prob }
    }
}

/// Degenerate (finitely supported) inter-arrival distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
}

impl Discrete {
    /// Builds a discrete distribution from `(time, probability)` pairs.
    ///
    /// Atoms are sorted by time; duplicate times are rejected rather than
    /// merged. Probabilities must sum to one within [`PROB_SUM_TOL`] and
    /// are then renormalized exactly.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<Atom> = pairs.into_iter().map(|(t, p)| Atom::new(t, p)).collect();
        if atoms.is_empty() {
            return Err(invalid("atoms", "at least one atom is required"));
        }
        for a in &atoms {
            if !(a.time.is_finite() && a.time > 0.0) {
                return Err(invalid("atoms.time", format!("{} is not a positive time", a.time)));
            }
            if !(a.prob.is_finite() && a.prob >= 0.0) {
                return Err(invalid("atoms.prob", format!("{} is not a probability", a.prob)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(invalid(
                "atoms.prob",
                format!("probabilities sum to {total}, expected 1 (normalization)"),
            ));
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(w) = atoms.windows(2).find(|w| w[0].time == w[1].time) {
            return Err(invalid("atoms.time", format!("duplicate time {}", w[0].time)));
        }
        for a in &mut atoms {
            a.prob /= total;
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.prob;
                acc
            })
            .collect();
        Ok(Self { atoms, cumulative })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Mean inter-arrival time, `sum p_x t_x`.
    pub fn mean_time(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.time).sum()
    }

    pub fn min_time(&self) -> f64 {
        self.atoms[0].time
    }

    /// Same shape with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (a.time * factor, a.prob)))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.atoms[idx.min(self.atoms.len() - 1)].time
    }
}

/// Generator of all arrival statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum InterArrivalProcess {
    /// Exponential inter-arrival times (Poisson arrivals) with `rate` per unit time.
    Exponential { rate: f64 },
    /// Degenerate inter-arrival times.
    Discrete(Discrete),
}

impl InterArrivalProcess {
    pub fn exponential(rate: f64) -> Result<Self> {
        let p = Self::Exponential { rate };
        p.validate()?;
        Ok(p)
    }

    pub fn discrete(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Discrete::new(pairs).map(Self::Discrete)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(invalid("arrivals.rate", format!("{rate} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn mean_rate(&self) -> f64 {
        mean_rate(self)
    }

    /// Rescales the process so that its mean rate equals `rate`, keeping its shape.
    pub fn with_mean_rate(&self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid("arrivals.rate", format!("{rate} must be positive")));
        }
        match self {
            Self::Exponential { .. } => Self::exponential(rate),
            Self::Discrete(d) => d.scaled(1.0 / (d.mean_time() * rate)).map(Self::Discrete),
        }
    }

    pub fn is_markovian(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }
}

/// Mean arrival rate λ'. For discrete processes this is `1 / sum(p_x t_x)`.
pub fn mean_rate(process: &InterArrivalProcess) -> f64 {
    match process {
        InterArrivalProcess::Exponential { rate } => *rate,
        InterArrivalProcess::Discrete(d) => 1.0 / d.mean_time(),
    }
}

/// Draws one inter-arrival time.
pub fn sample_interarrival<R: Rng + ?Sized>(process: &InterArrivalProcess, rng: &mut R) -> f64 {
    match process {
        InterArrivalProcess::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
        InterArrivalProcess::Discrete(d) => d.sample(rng),
    }
}

/// One message class: arrival share `rate` and its service time `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceClass {
    pub rate: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceSpec {
    Deterministic {
        tau: f64,
    },
    /// Heterogeneous classes; a message belongs to class x with probability
    /// `rate_x / sum(rate)`.
    Classes(Vec<ServiceClass>),
    /// Binned general service distribution, atoms `(tau, p)`.
    Binned(Vec<Atom>),
}

impl ServiceSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} must be positive")))
            }
        };
        match self {
            Self::Deterministic { tau } => pos("service.tau", *tau),
            Self::Classes(classes) => {
                if classes.is_empty() {
                    return Err(invalid("service.classes", "at least one class is required"));
                }
                for c in classes {
                    pos("service.classes.rate", c.rate)?;
                    pos("service.classes.tau", c.tau)?;
                }
                Ok(())
            }
            Self::Binned(bins) => {
                if bins.is_empty() {
                    return Err(invalid("service.bins", "at least one bin is required"));
                }
                for b in bins {
                    pos("service.bins.tau", b.time)?;
                    if !(b.prob.is_finite() && b.prob >= 0.0) {
                        return Err(invalid("service.bins.prob", format!("{} is not a probability", b.prob)));
                    }
                }
                let total: f64 = bins.iter().map(|b| b.prob).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(invalid(
                        "service.bins.prob",
                        format!("probabilities sum to {total}, expected 1 (normalization)"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `(weight, tau)` pairs describing the service-time mixture.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Deterministic { tau } => vec![(1.0, *tau)],
            Self::Classes(classes) => {
                let total: f64 = classes.iter().map(|c| c.rate).sum();
                classes.iter().map(|c| (c.rate / total, c.tau)).collect()
            }
            Self::Binned(bins) => {
                let total: f64 = bins.iter().map(|b| b.prob).sum();
                bins.iter().map(|b| (b.prob / total, b.time)).collect()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.windows().iter().map(|(w, t)| w * t).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic { .. })
    }

    /// Rescales every service time so that the mean becomes `mean`.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(invalid("service.tau", format!("{mean} must be positive")));
        }
        let f = mean / self.mean();
        let s = match self {
            Self::Deterministic { .. } => Self::Deterministic { tau: mean },
            Self::Classes(c) => Self::Classes(
                c.iter()
                    .map(|c| ServiceClass {
                        rate: c.rate,
                        tau: c.tau * f,
                    })
                    .collect(),
            ),
            Self::Binned(b) => Self::Binned(b.iter().map(|a| Atom::new(a.time * f, a.prob)).collect()),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sampler(&self) -> ServiceSampler {
        let windows = self.windows();
        let mut acc = 0.0;
        let cumulative = windows
            .iter()
            .map(|(w, _)| {
                acc += w;
                acc
            })
            .collect();
        ServiceSampler {
            taus: windows.into_iter().map(|(_, t)| t).collect(),
            cumulative,
        }
    }
}

/// Draws service durations for a [`ServiceSpec`].
#[derive(Debug, Clone)]
pub struct ServiceSampler {
    taus: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ServiceSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.taus.len() == 1 {
            return self.taus[0];
        }
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.taus[idx.min(self.taus.len() - 1)]
    }
}

/// A loss system: `n` servers, no waiting room.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSpec {
    pub n: usize,
    pub arrivals: InterArrivalProcess,
    pub service: ServiceSpec,
    pub p_o: f64,
}

impl QueueSpec {
    pub fn new(n: usize, arrivals: InterArrivalProcess, service: ServiceSpec, p_o: f64) -> Result<Self> {
        let q = Self {
            n,
            arrivals,
            service,
            p_o,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "at least one server is required"));
        }
        if !(0.0..=1.0).contains(&self.p_o) {
            return Err(invalid("p_o", format!("{} is outside [0, 1]", self.p_o)));
        }
        self.arrivals.validate()?;
        self.service.validate()
    }

    /// Offered load of transmissions in Erlang, `lambda' * E[S]`.
    pub fn offered_load(&self) -> f64 {
        self.arrivals.mean_rate() * self.service.mean()
    }
}
