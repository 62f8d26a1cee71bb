//! Running an experiment config and writing its result table.

use std::io::Write;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::analysis::{analyze, erlang_b_reference, Analysis};
use crate::config::{apply_point, ExperimentConfig, Format, SweepParam};
use crate::dist::{InterArrivalProcess, QueueSpec};
use crate::sim::{self, SimConfig, SimResult};

pub const PARAM_COLUMNS: [&str; 6] = ["n", "arrivals", "lambda", "tau", "p_o", "rho"];

pub const ANALYSIS_COLUMNS: [&str; 13] = [
    "p_lower",
    "p_approx",
    "p_upper",
    "p_raw",
    "expected_blocked",
    "prior",
    "demod_model",
    "iterations",
    "tail_warning",
    "q0",
    "q1",
    "eta",
    "zeta",
];

pub const SIM_COLUMNS: [&str; 7] = [
    "offered",
    "received",
    "served",
    "blocked",
    "p_b_hat",
    "ci",
    "busy_fraction",
];

pub const ERROR_COLUMNS: [&str; 3] = ["abs_err_approx_sim", "abs_err_approx_erlang", "abs_err_sim_erlang"];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn num(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Num(x) => serde_json::Number::from_f64(round_sig(*x)).map_or(Value::Null, Value::Number),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().expect("formatted float")
    } else {
        x
    }
}

/// `x` rounded to 9 significant digits in its shortest form.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r = round_sig(x);
    let a = r.abs();
    if a == 0.0 || (1e-6..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a column, `None` where the cell is not numeric.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| r[i].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_text))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self, config: &ExperimentConfig) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({
            "meta": {
                "version": env!("CARGO_PKG_VERSION"),
                "columns": self.columns,
                "config": config.to_document(),
            },
            "rows": Value::Array(rows),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub table: Table,
    /// Rows carrying an error marker.
    pub failed_rows: usize,
}

impl RunOutcome {
    /// True when there was at least one row and none succeeded.
    pub fn all_failed(&self) -> bool {
        !self.table.rows.is_empty() && self.failed_rows == self.table.rows.len()
    }
}

/// Column names for a config, fixed by its mode and options.
pub fn columns(config: &ExperimentConfig) -> Vec<String> {
    let mode = config.mode;
    let mut cols: Vec<String> = PARAM_COLUMNS.iter().map(|s| s.to_string()).collect();
    if mode.analyzes() {
        cols.extend(ANALYSIS_COLUMNS.iter().map(|s| s.to_string()));
        let k = config.options.count_columns;
        if k > 0 {
            cols.extend((0..k).map(|i| format!("a_{i}")));
            cols.push("a_tail".to_string());
        }
        cols.push("erlang_b".to_string());
    }
    if mode.simulates() {
        cols.extend(SIM_COLUMNS.iter().map(|s| s.to_string()));
        cols.extend((0..=config.max_servers()).map(|y| format!("state_time_{y}")));
    }
    if mode.analyzes() && mode.simulates() {
        cols.extend(ERROR_COLUMNS.iter().map(|s| s.to_string()));
    }
    cols.push("error".to_string());
    cols
}

fn param_cells(q: &QueueSpec) -> Vec<Cell> {
    let lambda = q.arrivals.mean_rate();
    let tau = q.service.mean();
    let kind = match q.arrivals {
        InterArrivalProcess::Exponential { .. } => "exponential",
        InterArrivalProcess::Discrete(_) => "discrete",
    };
    vec![
        Cell::Int(q.n as u64),
        Cell::Text(kind.to_string()),
        Cell::Num(lambda),
        Cell::Num(tau),
        Cell::Num(q.p_o),
        Cell::Num(lambda * tau),
    ]
}

fn analysis_cells(a: Option<&Analysis>, count_columns: usize) -> Vec<Cell> {
    let Some(a) = a else {
        let width = ANALYSIS_COLUMNS.len() + if count_columns > 0 { count_columns + 1 } else { 0 };
        return vec![Cell::Empty; width];
    };
    let r = &a.report;
    let t = a.timing.as_ref();
    let mut cells = vec![
        Cell::Num(r.p_lower),
        Cell::Num(r.p_approx),
        Cell::Num(r.p_upper),
        Cell::Num(r.p_raw),
        Cell::Num(r.expected_blocked),
        Cell::Text(r.prior_used.clone()),
        Cell::Text(r.demod_model.label().to_string()),
        Cell::Int(r.iterations as u64),
        Cell::Bool(r.tail_warning),
        Cell::num(t.map(|t| t.q0)),
        Cell::num(t.map(|t| t.q1)),
        Cell::num(t.map(|t| t.eta)),
        Cell::num(t.map(|t| t.zeta)),
    ];
    if count_columns > 0 {
        let head: Vec<f64> = (0..count_columns).map(|k| a.counts.prob(k)).collect();
        let tail = (a.counts.total_mass() - head.iter().sum::<f64>()).max(0.0);
        cells.extend(head.into_iter().map(Cell::Num));
        cells.push(Cell::Num(tail));
    }
    cells
}

fn sim_cells(s: Option<&SimResult>, max_servers: usize) -> Vec<Cell> {
    let Some(s) = s else {
        return vec![Cell::Empty; SIM_COLUMNS.len() + max_servers + 1];
    };
    let mut cells = vec![
        Cell::Int(s.offered),
        Cell::Int(s.received),
        Cell::Int(s.served),
        Cell::Int(s.blocked),
        Cell::Num(s.p_b_hat),
        Cell::Num(s.p_b_ci),
        Cell::Num(s.busy_fraction),
    ];
    cells.extend((0..=max_servers).map(|y| match s.state_time.get(y) {
        Some(v) if s.elapsed > 0.0 => Cell::Num(v / s.elapsed),
        _ => Cell::Empty,
    }));
    cells
}

fn diff(a: Option<f64>, b: Option<f64>) -> Cell {
    Cell::num(a.zip(b).map(|(a, b)| (a - b).abs()))
}

fn simulate(config: &ExperimentConfig, queue: &QueueSpec) -> crate::error::Result<SimResult> {
    let s = &config.sim;
    let mut sc = SimConfig::new(queue.clone(), s.horizon)?
        .with_seed(s.seed)
        .with_replications(s.replications);
    if let Some(w) = s.warmup {
        sc = sc.with_warmup(w);
    }
    sim::run(&sc)
}

fn evaluate(config: &ExperimentConfig, point: &[(SweepParam, f64)]) -> (Vec<Cell>, bool) {
    let mode = config.mode;
    let k = config.options.count_columns;
    let max_servers = config.max_servers();
    let mut errors = Vec::new();
    let queue = match apply_point(&config.queue, point) {
        Ok(q) => q,
        Err(e) => {
            let mut cells = vec![Cell::Empty; columns(config).len() - 1];
            cells.push(Cell::Text(e.to_string()));
            return (cells, true);
        }
    };
    let mut cells = param_cells(&queue);

    let analysis = if mode.analyzes() {
        match analyze(&queue, &config.options.analysis) {
            Ok(a) => Some(a),
            Err(e) => {
                errors.push(format!("analysis: {e}"));
                None
            }
        }
    } else {
        None
    };
    let simulation = if mode.simulates() {
        match simulate(config, &queue) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("simulation: {e}"));
                None
            }
        }
    } else {
        None
    };
    let erlang = erlang_b_reference(&queue);

    if mode.analyzes() {
        cells.extend(analysis_cells(analysis.as_ref(), k));
        cells.push(Cell::num(erlang));
    }
    if mode.simulates() {
        cells.extend(sim_cells(simulation.as_ref(), max_servers));
    }
    if mode.analyzes() && mode.simulates() {
        let approx = analysis.as_ref().map(|a| a.report.p_approx);
        let hat = simulation.as_ref().map(|s| s.p_b_hat);
        cells.push(diff(approx, hat));
        cells.push(diff(approx, erlang));
        cells.push(diff(hat, erlang));
    }
    let failed = !errors.is_empty();
    cells.push(if failed {
        Cell::Text(errors.join("; "))
    } else {
        Cell::Empty
    });
    (cells, failed)
}

/// Evaluates every sweep point; rows follow the sweep order.
pub fn run_experiment(config: &ExperimentConfig) -> RunOutcome {
    let points = config.points();
    let results: Vec<(Vec<Cell>, bool)> = points.par_iter().map(|p| evaluate(config, p)).collect();
    let failed_rows = results.iter().filter(|(_, f)| *f).count();
    RunOutcome {
        table: Table {
            columns: columns(config),
            rows: results.into_iter().map(|(c, _)| c).collect(),
        },
        failed_rows,
    }
}

/// Writes the table in the configured format.
pub fn write_output<W: Write>(config: &ExperimentConfig, table: &Table, mut out: W) -> std::io::Result<()> {
    match config.output.format {
        Format::Csv => table.write_csv(out).map_err(std::io::Error::other),
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &table.to_json(config))?;
            writeln!(out)
        }
    }
}
