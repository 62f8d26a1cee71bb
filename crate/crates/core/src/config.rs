//! Experiment configuration documents.
//!
//! A config is a JSON document. Validation walks the whole document and
//! reports every problem with the path of the offending field. Named
//! presets are ordinary documents that a user config overrides field by
//! field.

use std::fmt;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::analysis::{AnalysisOptions, PriorChoice};
use crate::blocking::DemodModel;
use crate::counts::bin_service_distribution;
use crate::dist::{Atom, InterArrivalProcess, QueueSpec, ServiceClass, ServiceSpec};
use crate::sim::{DEFAULT_REPLICATIONS, DEFAULT_SEED};

pub const DEFAULT_HORIZON: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Simulate,
    Compare,
    /// Compare over a sweep; the sweep block is required.
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Analyze, Mode::Simulate, Mode::Compare, Mode::Sweep];

    pub fn label(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::Simulate => "simulate",
            Self::Compare => "compare",
            Self::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }

    pub fn analyzes(self) -> bool {
        !matches!(self, Self::Simulate)
    }

    pub fn simulates(self) -> bool {
        !matches!(self, Self::Analyze)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Mean service time; every service time is scaled.
    Tau,
    /// Mean arrival rate; the inter-arrival shape is kept.
    Lambda,
    /// Offered load; sets the arrival rate for the current mean service time.
    Rho,
    N,
    PO,
}

impl SweepParam {
    const ALL: [SweepParam; 5] = [Self::Tau, Self::Lambda, Self::Rho, Self::N, Self::PO];

    pub fn label(self) -> &'static str {
        match self {
            Self::Tau => "tau",
            Self::Lambda => "lambda",
            Self::Rho => "rho",
            Self::N => "n",
            Self::PO => "p_o",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }

    /// Order in which sweep values are applied to a queue.
    fn apply_rank(self) -> u8 {
        match self {
            Self::N => 0,
            Self::PO => 1,
            Self::Tau => 2,
            Self::Lambda => 3,
            Self::Rho => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub horizon: u64,
    /// Defaults to 10% of the horizon.
    pub warmup: Option<u64>,
    pub seed: u64,
    pub replications: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            warmup: None,
            seed: DEFAULT_SEED,
            replications: DEFAULT_REPLICATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn label(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Options {
    pub analysis: AnalysisOptions,
    /// Number of leading count probabilities emitted as `a_k` columns.
    pub count_columns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub description: Option<String>,
    pub queue: QueueSpec,
    /// Axes of a Cartesian sweep; the first axis varies slowest.
    pub sweep: Option<Vec<SweepAxis>>,
    pub sim: SimSettings,
    pub output: OutputSpec,
    pub options: Options,
}

/// One validation problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Ctx {
    errors: Vec<ConfigError>,
}

impl Ctx {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match v.as_object() {
            Some(m) => Some(m),
            None => {
                self.err(path, "expected an object");
                None
            }
        }
    }

    fn unknown_keys(&mut self, m: &Map<String, Value>, path: &str, known: &[&str]) {
        for k in m.keys() {
            if !known.contains(&k.as_str()) {
                self.err(&join(path, k), "unknown field");
            }
        }
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, "expected a finite number");
                None
            }
        }
    }

    fn positive(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.err(path, format!("{x} must be positive"));
            None
        }
    }

    fn probability(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        if (0.0..=1.0).contains(&x) {
            Some(x)
        } else {
            self.err(path, format!("{x} is outside the range [0, 1]"));
            None
        }
    }

    fn unsigned(&mut self, v: &Value, path: &str) -> Option<u64> {
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.err(path, "expected a nonnegative integer");
                None
            }
        }
    }

    fn string<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.err(path, "expected a string");
                None
            }
        }
    }

    fn required<'a>(&mut self, m: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = m.get(key);
        if v.is_none() {
            self.err(&join(path, key), "missing required field");
        }
        v
    }

    /// List of `[a, b]` number pairs.
    fn pairs(&mut self, v: &Value, path: &str) -> Option<Vec<(f64, f64)>> {
        let Some(items) = v.as_array() else {
            self.err(path, "expected a list of [value, value] pairs");
            return None;
        };
        if items.is_empty() {
            self.err(path, "must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let p = format!("{path}[{i}]");
            match item.as_array().map(|a| a.as_slice()) {
                Some([a, b]) => match (self.number(a, &format!("{p}[0]")), self.number(b, &format!("{p}[1]"))) {
                    (Some(a), Some(b)) => out.push((a, b)),
                    _ => ok = false,
                },
                _ => {
                    self.err(&p, "expected a [value, value] pair");
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn parse_arrivals(ctx: &mut Ctx, v: &Value, path: &str) -> Option<InterArrivalProcess> {
    let m = ctx.object(v, path)?;
    let kind = ctx
        .required(m, path, "type")
        .and_then(|t| ctx.string(t, &join(path, "type")))?;
    match kind {
        "exponential" => {
            ctx.unknown_keys(m, path, &["type", "rate"]);
            let rate = ctx
                .required(m, path, "rate")
                .and_then(|r| ctx.positive(r, &join(path, "rate")))?;
            InterArrivalProcess::exponential(rate).ok()
        }
        "discrete" => {
            ctx.unknown_keys(m, path, &["type", "atoms"]);
            let ap = join(path, "atoms");
            let atoms = ctx.required(m, path, "atoms").and_then(|a| ctx.pairs(a, &ap))?;
            match InterArrivalProcess::discrete(atoms) {
                Ok(p) => Some(p),
                Err(e) => {
                    ctx.err(&ap, e.to_string());
                    None
                }
            }
        }
        other => {
            ctx.err(
                &join(path, "type"),
                format!("unknown arrival type `{other}` (expected exponential or discrete)"),
            );
            None
        }
    }
}

fn parse_service(ctx: &mut Ctx, v: &Value, path: &str) -> Option<ServiceSpec> {
    let m = ctx.object(v, path)?;
    let kind = ctx
        .required(m, path, "type")
        .and_then(|t| ctx.string(t, &join(path, "type")))?;
    let checked = |ctx: &mut Ctx, spec: ServiceSpec, field: &str| match spec.validate() {
        Ok(()) => Some(spec),
        Err(e) => {
            ctx.err(&join(path, field), e.to_string());
            None
        }
    };
    match kind {
        "deterministic" => {
            ctx.unknown_keys(m, path, &["type", "tau"]);
            let tau = ctx
                .required(m, path, "tau")
                .and_then(|t| ctx.positive(t, &join(path, "tau")))?;
            Some(ServiceSpec::Deterministic { tau })
        }
        "classes" => {
            ctx.unknown_keys(m, path, &["type", "classes"]);
            let p = join(path, "classes");
            let pairs = ctx.required(m, path, "classes").and_then(|c| ctx.pairs(c, &p))?;
            let spec = ServiceSpec::Classes(
                pairs
                    .into_iter()
                    .map(|(rate, tau)| ServiceClass { rate, tau })
                    .collect(),
            );
            checked(ctx, spec, "classes")
        }
        "binned" => {
            ctx.unknown_keys(m, path, &["type", "bins"]);
            let p = join(path, "bins");
            let pairs = ctx.required(m, path, "bins").and_then(|c| ctx.pairs(c, &p))?;
            let spec = ServiceSpec::Binned(pairs.into_iter().map(|(t, p)| Atom::new(t, p)).collect());
            checked(ctx, spec, "bins")
        }
        "cdf" => {
            ctx.unknown_keys(m, path, &["type", "samples", "bins"]);
            let p = join(path, "samples");
            let samples = ctx.required(m, path, "samples").and_then(|c| ctx.pairs(c, &p));
            let bins = ctx
                .required(m, path, "bins")
                .and_then(|b| ctx.unsigned(b, &join(path, "bins")));
            match bin_service_distribution(&samples?, bins? as usize) {
                Ok(s) => Some(s),
                Err(e) => {
                    ctx.err(&p, e.to_string());
                    None
                }
            }
        }
        other => {
            ctx.err(
                &join(path, "type"),
                format!("unknown service type `{other}` (expected deterministic, classes, binned or cdf)"),
            );
            None
        }
    }
}

fn parse_queue(ctx: &mut Ctx, v: &Value) -> Option<QueueSpec> {
    let path = "queue";
    let m = ctx.object(v, path)?;
    ctx.unknown_keys(m, path, &["n", "p_o", "arrivals", "service"]);
    let n = ctx.required(m, path, "n").and_then(|n| ctx.unsigned(n, "queue.n"));
    if n == Some(0) {
        ctx.err("queue.n", "at least one server is required");
    }
    let p_o = match m.get("p_o") {
        Some(p) => ctx.probability(p, "queue.p_o"),
        None => Some(0.0),
    };
    let arrivals = ctx
        .required(m, path, "arrivals")
        .and_then(|a| parse_arrivals(ctx, a, "queue.arrivals"));
    let service = ctx
        .required(m, path, "service")
        .and_then(|s| parse_service(ctx, s, "queue.service"));
    let (n, p_o, arrivals, service) = (n?, p_o?, arrivals?, service?);
    QueueSpec::new(n as usize, arrivals, service, p_o).ok()
}

/// Values `start, start + step, ...` up to `stop` inclusive.
fn expand_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor();
    if count < 0.0 {
        return Vec::new();
    }
    (0..=count as usize)
        .map(|i| {
            let v = start + i as f64 * step;
            (v * 1e12).round() / 1e12
        })
        .collect()
}

fn parse_axis(ctx: &mut Ctx, v: &Value, path: &str) -> Option<SweepAxis> {
    let m = ctx.object(v, path)?;
    ctx.unknown_keys(m, path, &["parameter", "values", "range"]);
    let pp = join(path, "parameter");
    let parameter = ctx.required(m, path, "parameter").and_then(|p| ctx.string(p, &pp));
    let parameter = match parameter {
        Some(s) => match SweepParam::parse(s) {
            Some(p) => Some(p),
            None => {
                ctx.err(
                    &pp,
                    format!("unknown sweep parameter `{s}` (expected tau, lambda, rho, n or p_o)"),
                );
                None
            }
        },
        None => None,
    };
    let values = match (m.get("values"), m.get("range")) {
        (Some(_), Some(_)) => {
            ctx.err(path, "give either values or range, not both");
            None
        }
        (None, None) => {
            ctx.err(&join(path, "values"), "missing required field (or range)");
            None
        }
        (Some(vs), None) => {
            let vp = join(path, "values");
            match vs.as_array() {
                Some(items) => {
                    let parsed: Vec<Option<f64>> = items
                        .iter()
                        .enumerate()
                        .map(|(i, x)| ctx.number(x, &format!("{vp}[{i}]")))
                        .collect();
                    parsed.into_iter().collect::<Option<Vec<f64>>>()
                }
                None => {
                    ctx.err(&vp, "expected a list of numbers");
                    None
                }
            }
        }
        (None, Some(r)) => {
            let rp = join(path, "range");
            let rm = ctx.object(r, &rp)?;
            ctx.unknown_keys(rm, &rp, &["start", "stop", "step"]);
            let start = ctx
                .required(rm, &rp, "start")
                .and_then(|x| ctx.number(x, &join(&rp, "start")));
            let stop = ctx
                .required(rm, &rp, "stop")
                .and_then(|x| ctx.number(x, &join(&rp, "stop")));
            let step = ctx
                .required(rm, &rp, "step")
                .and_then(|x| ctx.positive(x, &join(&rp, "step")));
            match (start, stop, step) {
                (Some(a), Some(b), Some(s)) => Some(expand_range(a, b, s)),
                _ => None,
            }
        }
    };
    let (parameter, values) = (parameter?, values?);
    let vp = join(path, "values");
    let mut ok = true;
    for (i, &x) in values.iter().enumerate() {
        let p = format!("{vp}[{i}]");
        let bad = match parameter {
            SweepParam::Tau | SweepParam::Lambda | SweepParam::Rho => {
                (x <= 0.0).then(|| format!("{x} must be positive"))
            }
            SweepParam::N => (x < 1.0 || x.fract() != 0.0).then(|| format!("{x} is not a positive integer")),
            SweepParam::PO => (!(0.0..=1.0).contains(&x)).then(|| format!("{x} is outside the range [0, 1]")),
        };
        if let Some(msg) = bad {
            ctx.err(&p, msg);
            ok = false;
        }
    }
    ok.then_some(SweepAxis { parameter, values })
}

fn parse_sweep(ctx: &mut Ctx, v: &Value) -> Option<Vec<SweepAxis>> {
    match v {
        Value::Array(items) => {
            let axes: Vec<Option<SweepAxis>> = items
                .iter()
                .enumerate()
                .map(|(i, a)| parse_axis(ctx, a, &format!("sweep[{i}]")))
                .collect();
            let axes = axes.into_iter().collect::<Option<Vec<_>>>()?;
            for (i, a) in axes.iter().enumerate() {
                if axes[..i].iter().any(|b| b.parameter == a.parameter) {
                    ctx.err(&format!("sweep[{i}].parameter"), "parameter swept twice");
                }
            }
            Some(axes)
        }
        other => parse_axis(ctx, other, "sweep").map(|a| vec![a]),
    }
}

fn parse_sim(ctx: &mut Ctx, v: &Value) -> SimSettings {
    let mut s = SimSettings::default();
    let Some(m) = ctx.object(v, "sim") else { return s };
    ctx.unknown_keys(m, "sim", &["horizon", "warmup", "seed", "replications"]);
    if let Some(h) = m.get("horizon").and_then(|h| ctx.unsigned(h, "sim.horizon")) {
        s.horizon = h;
    }
    if let Some(w) = m.get("warmup").and_then(|w| ctx.unsigned(w, "sim.warmup")) {
        s.warmup = Some(w);
    }
    if let Some(x) = m.get("seed").and_then(|x| ctx.unsigned(x, "sim.seed")) {
        s.seed = x;
    }
    if let Some(r) = m.get("replications").and_then(|r| ctx.unsigned(r, "sim.replications")) {
        if r == 0 || r > u32::MAX as u64 {
            ctx.err("sim.replications", "must be between 1 and 2^32 - 1");
        } else {
            s.replications = r as u32;
        }
    }
    if s.horizon <= s.warmup.unwrap_or(s.horizon / 10) {
        ctx.err("sim.horizon", "must exceed the warmup");
    }
    s
}

fn parse_output(ctx: &mut Ctx, v: &Value) -> OutputSpec {
    let mut o = OutputSpec::default();
    let Some(m) = ctx.object(v, "output") else { return o };
    ctx.unknown_keys(m, "output", &["path", "format"]);
    if let Some(p) = m.get("path").and_then(|p| ctx.string(p, "output.path")) {
        o.path = Some(PathBuf::from(p));
    }
    if let Some(f) = m.get("format").and_then(|f| ctx.string(f, "output.format")) {
        match Format::parse(f) {
            Some(f) => o.format = f,
            None => ctx.err("output.format", format!("unknown format `{f}` (expected csv or json)")),
        }
    }
    o
}

fn parse_options(ctx: &mut Ctx, v: &Value) -> Options {
    let mut o = Options::default();
    let Some(m) = ctx.object(v, "options") else { return o };
    ctx.unknown_keys(
        m,
        "options",
        &["demod_model", "prior", "eps_tail", "max_iters", "count_columns"],
    );
    if let Some(s) = m.get("demod_model").and_then(|s| ctx.string(s, "options.demod_model")) {
        match s.parse::<DemodModel>() {
            Ok(d) => o.analysis.demod_model = d,
            Err(e) => ctx.err("options.demod_model", format!("{e} (expected clipped or full)")),
        }
    }
    if let Some(s) = m.get("prior").and_then(|s| ctx.string(s, "options.prior")) {
        match PriorChoice::parse(s) {
            Ok(p) => o.analysis.prior = p,
            Err(e) => ctx.err(
                "options.prior",
                format!("{e} (expected auto, general or degenerate-n1)"),
            ),
        }
    }
    if let Some(x) = m.get("eps_tail").and_then(|x| ctx.number(x, "options.eps_tail")) {
        if x > 0.0 && x < 1.0 {
            o.analysis.eps_tail = x;
        } else {
            ctx.err("options.eps_tail", format!("{x} is outside the range (0, 1)"));
        }
    }
    if let Some(x) = m.get("max_iters").and_then(|x| ctx.unsigned(x, "options.max_iters")) {
        if x >= 1 {
            o.analysis.max_iters = x as usize;
        } else {
            ctx.err("options.max_iters", "must be at least 1");
        }
    }
    if let Some(x) = m
        .get("count_columns")
        .and_then(|x| ctx.unsigned(x, "options.count_columns"))
    {
        o.count_columns = x as usize;
    }
    o
}

/// Parses and validates a config document, collecting every error.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![ConfigError {
            path: "$".to_string(),
            message: format!("not a valid JSON document: {e}"),
        }]
    })?;
    validate_value(&value, None)
}

/// Validates an already-parsed document. `mode` overrides the document's
/// own `mode` field.
pub fn validate_value(value: &Value, mode: Option<Mode>) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut ctx = Ctx { errors: Vec::new() };
    let Some(root) = ctx.object(value, "$") else {
        return Err(ctx.errors);
    };
    ctx.unknown_keys(
        root,
        "",
        &["mode", "description", "queue", "sweep", "sim", "output", "options"],
    );
    let doc_mode = match root.get("mode") {
        Some(v) => ctx.string(v, "mode").and_then(|s| {
            let m = Mode::parse(s);
            if m.is_none() {
                ctx.err(
                    "mode",
                    format!("unknown mode `{s}` (expected analyze, simulate, compare or sweep)"),
                );
            }
            m
        }),
        None => None,
    };
    let mode = mode.or(doc_mode);
    if mode.is_none() && !root.contains_key("mode") {
        ctx.err("mode", "missing required field");
    }
    let description = root
        .get("description")
        .and_then(|d| ctx.string(d, "description"))
        .map(str::to_string);
    let queue = ctx.required(root, "", "queue").and_then(|q| parse_queue(&mut ctx, q));
    let sweep = root.get("sweep").and_then(|s| parse_sweep(&mut ctx, s));
    if mode == Some(Mode::Sweep) && !root.contains_key("sweep") {
        ctx.err("sweep", "missing required field for sweep mode");
    }
    let sim = root.get("sim").map(|s| parse_sim(&mut ctx, s)).unwrap_or_default();
    let output = root
        .get("output")
        .map(|o| parse_output(&mut ctx, o))
        .unwrap_or_default();
    let options = root
        .get("options")
        .map(|o| parse_options(&mut ctx, o))
        .unwrap_or_default();

    if !ctx.errors.is_empty() {
        return Err(ctx.errors);
    }
    Ok(ExperimentConfig {
        mode: mode.expect("checked"),
        description,
        queue: queue.expect("checked"),
        sweep,
        sim,
        output,
        options,
    })
}

fn pairs_value(pairs: impl Iterator<Item = (f64, f64)>) -> Value {
    Value::Array(pairs.map(|(a, b)| json!([a, b])).collect())
}

impl ExperimentConfig {
    /// The config as a document that [`validate_config`] accepts.
    pub fn to_document(&self) -> Value {
        let arrivals = match &self.queue.arrivals {
            InterArrivalProcess::Exponential { rate } => json!({"type": "exponential", "rate": rate}),
            InterArrivalProcess::Discrete(d) => json!({
                "type": "discrete",
                "atoms": pairs_value(d.atoms().iter().map(|a| (a.time, a.prob))),
            }),
        };
        let service = match &self.queue.service {
            ServiceSpec::Deterministic { tau } => json!({"type": "deterministic", "tau": tau}),
            ServiceSpec::Classes(c) => json!({
                "type": "classes",
                "classes": pairs_value(c.iter().map(|c| (c.rate, c.tau))),
            }),
            ServiceSpec::Binned(b) => json!({
                "type": "binned",
                "bins": pairs_value(b.iter().map(|a| (a.time, a.prob))),
            }),
        };
        let mut doc = json!({
            "mode": self.mode.label(),
            "queue": {
                "n": self.queue.n,
                "p_o": self.queue.p_o,
                "arrivals": arrivals,
                "service": service,
            },
            "sim": {
                "horizon": self.sim.horizon,
                "seed": self.sim.seed,
                "replications": self.sim.replications,
            },
            "output": {"format": self.output.format.label()},
            "options": {
                "demod_model": self.options.analysis.demod_model.label(),
                "prior": self.options.analysis.prior.label(),
                "eps_tail": self.options.analysis.eps_tail,
                "max_iters": self.options.analysis.max_iters,
                "count_columns": self.options.count_columns,
            },
        });
        let root = doc.as_object_mut().expect("object");
        if let Some(d) = &self.description {
            root.insert("description".into(), json!(d));
        }
        if let Some(w) = self.sim.warmup {
            root["sim"]["warmup"] = json!(w);
        }
        if let Some(p) = &self.output.path {
            root["output"]["path"] = json!(p.to_string_lossy());
        }
        if let Some(axes) = &self.sweep {
            root.insert(
                "sweep".into(),
                Value::Array(
                    axes.iter()
                        .map(|a| json!({"parameter": a.parameter.label(), "values": a.values}))
                        .collect(),
                ),
            );
        }
        doc
    }

    /// Parameter points of the sweep in output order.
    pub fn points(&self) -> Vec<Vec<(SweepParam, f64)>> {
        let Some(axes) = &self.sweep else {
            return vec![Vec::new()];
        };
        let mut points: Vec<Vec<(SweepParam, f64)>> = vec![Vec::new()];
        for axis in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.parameter, v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn max_servers(&self) -> usize {
        let swept = self
            .sweep
            .iter()
            .flatten()
            .filter(|a| a.parameter == SweepParam::N)
            .flat_map(|a| a.values.iter().map(|&v| v as usize))
            .max();
        swept.unwrap_or(self.queue.n)
    }
}

/// Applies one sweep point to the base queue.
pub fn apply_point(base: &QueueSpec, point: &[(SweepParam, f64)]) -> crate::error::Result<QueueSpec> {
    let mut ordered = point.to_vec();
    ordered.sort_by_key(|(p, _)| p.apply_rank());
    let mut q = base.clone();
    for (param, v) in ordered {
        match param {
            SweepParam::N => q.n = v as usize,
            SweepParam::PO => q.p_o = v,
            SweepParam::Tau => q.service = q.service.with_mean(v)?,
            SweepParam::Lambda => q.arrivals = q.arrivals.with_mean_rate(v)?,
            SweepParam::Rho => q.arrivals = q.arrivals.with_mean_rate(v / q.service.mean())?,
        }
    }
    q.validate()?;
    Ok(q)
}

/// Deep merge: objects merge key by key, anything else is replaced.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

const THIRD: f64 = 1.0 / 3.0;

fn table1_arrivals() -> Value {
    json!({"type": "discrete", "atoms": [[0.3, THIRD], [0.6, THIRD], [1.5, THIRD]]})
}

fn tau_range() -> Value {
    json!({"parameter": "tau", "range": {"start": 0.05, "stop": 3.0, "step": 0.01}})
}

pub const PRESET_NAMES: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig7d", "table1"];

/// Built-in experiment documents.
///
/// The degenerate presets share the inter-arrival shape t = {0.3, 0.6, 1.5}
/// with probability 1/3 each (mean rate 1.25).
pub fn preset(name: &str) -> Option<Value> {
    let markov_unit = |n: usize| {
        json!({
            "n": n, "p_o": 0.0,
            "arrivals": {"type": "exponential", "rate": 1.0},
            "service": {"type": "deterministic", "tau": 1.0},
        })
    };
    let two_class = json!({"type": "binned", "bins": [[2.0 / 3.0, 0.5], [4.0 / 3.0, 0.5]]});
    let doc = match name {
        "fig2" => json!({
            "mode": "compare",
            "description": "M/D/n/n bounds and approximation against Erlang-B versus offered load, p_o in {0, 0.5}",
            "queue": markov_unit(1),
            "sweep": [
                {"parameter": "p_o", "values": [0.0, 0.5]},
                {"parameter": "n", "values": [1, 2, 4, 8]},
                {"parameter": "rho", "range": {"start": 0.1, "stop": 3.0, "step": 0.1}},
            ],
        }),
        "fig3" => json!({
            "mode": "compare",
            "description": "M/D/1/1 state ratios, utilization and non-blocking utilization versus offered load",
            "queue": markov_unit(1),
            "sweep": {"parameter": "rho", "range": {"start": 0.1, "stop": 5.0, "step": 0.1}},
        }),
        "fig4" => json!({
            "mode": "analyze",
            "description": "Arrival-count probabilities A_x versus service time, degenerate arrivals, p_o in {0, 0.5}",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": table1_arrivals(), "service": {"type": "deterministic", "tau": 1.0}},
            "sweep": [{"parameter": "p_o", "values": [0.0, 0.5]}, tau_range()],
            "options": {"count_columns": 12},
        }),
        "fig5" => json!({
            "mode": "analyze",
            "description": "D/D/n/n bounds and approximation versus service time, n in {1, 2}, p_o in {0, 0.5}",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": table1_arrivals(), "service": {"type": "deterministic", "tau": 1.0}},
            "sweep": [
                {"parameter": "p_o", "values": [0.0, 0.5]},
                {"parameter": "n", "values": [1, 2]},
                tau_range(),
            ],
        }),
        "fig6" => json!({
            "mode": "compare",
            "description": "D/D/1/1 state ratios and utilization versus service time",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": table1_arrivals(), "service": {"type": "deterministic", "tau": 1.0}},
            "sweep": tau_range(),
        }),
        "fig7" => json!({
            "mode": "compare",
            "description": "Two-class service p = {1/2, 1/2}, tau = {2/3, 4/3} scaled to the mean; Markovian arrivals",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": {"type": "exponential", "rate": 1.0}, "service": two_class},
            "sweep": [
                {"parameter": "n", "values": [1, 2]},
                {"parameter": "rho", "range": {"start": 0.25, "stop": 2.5, "step": 0.25}},
            ],
        }),
        "fig7d" => json!({
            "mode": "compare",
            "description": "Two-class service p = {1/2, 1/2}, tau = {2/3, 4/3} scaled to the mean; degenerate arrivals, n in {1, 2}",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": table1_arrivals(), "service": two_class},
            "sweep": [
                {"parameter": "n", "values": [1, 2]},
                {"parameter": "tau", "range": {"start": 0.1, "stop": 2.0, "step": 0.1}},
            ],
        }),
        "table1" => json!({
            "mode": "compare",
            "description": "The four degenerate configurations (n, p_o) = (1, 0), (2, 0), (1, 0.5), (2, 0.5) at tau = 1, with the inter-arrival shape rescaled to mean rate 0.8",
            "queue": {"n": 1, "p_o": 0.0, "arrivals": table1_arrivals(), "service": {"type": "deterministic", "tau": 1.0}},
            "sweep": [
                {"parameter": "p_o", "values": [0.0, 0.5]},
                {"parameter": "n", "values": [1, 2]},
                {"parameter": "lambda", "values": [0.8]},
            ],
            "sim": {"horizon": 1_000_000, "replications": 10},
        }),
        _ => return None,
    };
    Some(doc)
}
