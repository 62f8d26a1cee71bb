//! End-to-end analytic evaluation of a [`QueueSpec`].

use crate::blocking::{
    approximate_blocking, default_prior_kind, iterate_prior, spillover_prior, BlockingReport, DemodModel, PriorKind,
};
use crate::counts::{
    discrete_counts, mixture_counts, outage_thin, poisson_counts, CountPmf, DEFAULT_EPS_MERGE, DEFAULT_EPS_TAIL,
};
use crate::dist::{InterArrivalProcess, QueueSpec, ServiceSpec};
use crate::error::Result;
use crate::reference::erlang_b;
use crate::timing::{state_analysis, StateRatios};

/// Which spill-over prior to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorChoice {
    /// Empty-system prior for degenerate arrivals at one server, general otherwise.
    #[default]
    Auto,
    Fixed(PriorKind),
}

impl PriorChoice {
    pub fn label(self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Fixed(k) => k.label(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(Self::Auto)
        } else {
            s.parse().map(Self::Fixed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub demod_model: DemodModel,
    pub prior: PriorChoice,
    pub eps_tail: f64,
    pub eps_merge: f64,
    /// 1 applies the prior once; more iterates it towards a fixed point.
    pub max_iters: usize,
    pub iter_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            demod_model: DemodModel::Clipped,
            prior: PriorChoice::Auto,
            eps_tail: DEFAULT_EPS_TAIL,
            eps_merge: DEFAULT_EPS_MERGE,
            max_iters: 1,
            iter_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Received-message counts per service window.
    pub counts: CountPmf,
    pub report: BlockingReport,
    /// Single-server timing, when it applies.
    pub timing: Option<StateRatios>,
}

/// Transmission counts over one window of length `tau`.
pub fn window_counts(arrivals: &InterArrivalProcess, tau: f64, eps_tail: f64, eps_merge: f64) -> Result<CountPmf> {
    match arrivals {
        InterArrivalProcess::Exponential { rate } => poisson_counts(*rate, tau, eps_tail),
        InterArrivalProcess::Discrete(d) => discrete_counts(d, tau, eps_merge),
    }
}

/// Received-message counts for the queue: per-window counts mixed over the
/// service description, then thinned by the outage probability.
pub fn arrival_counts(queue: &QueueSpec, eps_tail: f64, eps_merge: f64) -> Result<CountPmf> {
    let windows = queue.service.windows();
    let counts = if windows.len() == 1 {
        window_counts(&queue.arrivals, windows[0].1, eps_tail, eps_merge)?
    } else {
        let parts = windows
            .iter()
            .map(|&(w, tau)| Ok((w, window_counts(&queue.arrivals, tau, eps_tail, eps_merge)?)))
            .collect::<Result<Vec<_>>>()?;
        mixture_counts(&parts)?
    };
    outage_thin(&counts, queue.p_o)
}

/// Received arrival process, when it is again one of the supported kinds.
fn received_process(queue: &QueueSpec) -> Option<InterArrivalProcess> {
    match &queue.arrivals {
        InterArrivalProcess::Exponential { rate } if queue.p_o < 1.0 => {
            InterArrivalProcess::exponential(rate * (1.0 - queue.p_o)).ok()
        }
        d @ InterArrivalProcess::Discrete(_) if queue.p_o == 0.0 => Some(d.clone()),
        _ => None,
    }
}

pub fn blocking_for_counts(
    counts: &CountPmf,
    n: usize,
    markovian: bool,
    options: &AnalysisOptions,
) -> Result<BlockingReport> {
    if options.max_iters > 1 {
        return iterate_prior(counts, n, options.demod_model, options.max_iters, options.iter_tol);
    }
    let kind = match options.prior {
        PriorChoice::Auto => default_prior_kind(markovian, n),
        PriorChoice::Fixed(k) => k,
    };
    let prior = spillover_prior(counts, n, kind);
    let mut report = approximate_blocking(counts, n, &prior, options.demod_model)?;
    report.prior_used = kind.label().to_string();
    Ok(report)
}

pub fn analyze(queue: &QueueSpec, options: &AnalysisOptions) -> Result<Analysis> {
    queue.validate()?;
    let counts = arrival_counts(queue, options.eps_tail, options.eps_merge)?;
    let report = blocking_for_counts(&counts, queue.n, queue.arrivals.is_markovian(), options)?;
    let timing = match (&queue.service, queue.n, received_process(queue)) {
        (ServiceSpec::Deterministic { tau }, 1, Some(process)) => {
            Some(state_analysis(&process, *tau, report.p_approx)?)
        }
        _ => None,
    };
    Ok(Analysis { counts, report, timing })
}

/// Erlang-B value for Poisson arrivals (after outage thinning), `None`
/// for other arrival processes.
pub fn erlang_b_reference(queue: &QueueSpec) -> Option<f64> {
    match queue.arrivals {
        InterArrivalProcess::Exponential { rate } => {
            Some(erlang_b(queue.n, rate * (1.0 - queue.p_o) * queue.service.mean()))
        }
        InterArrivalProcess::Discrete(_) => None,
    }
}
