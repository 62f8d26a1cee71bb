use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use lossq::config::{self, merge, validate_value, Mode, PRESET_NAMES};
use lossq::run::{run_experiment, write_output};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Analyze,
    Simulate,
    Compare,
    Sweep,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Analyze => Mode::Analyze,
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Compare => Mode::Compare,
            ModeArg::Sweep => Mode::Sweep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Blocking probabilities and utilization of loss systems.
///
/// Settings are layered: a built-in preset, then the config file, then
/// command-line flags.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    mode: ModeArg,
    /// JSON experiment document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment: fig2, fig3, fig4, fig5, fig6, fig7, fig7d or table1.
    #[arg(long)]
    preset: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Simulation seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn resolve(cli: &Cli) -> Result<Value, String> {
    if cli.config.is_none() && cli.preset.is_none() {
        return Err("give --config or --preset".to_string());
    }
    let mut doc = match &cli.preset {
        Some(name) => config::preset(name)
            .ok_or_else(|| format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", ")))?,
        None => json!({}),
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let overlay: Value =
            serde_json::from_str(&text).map_err(|e| format!("{}: not a valid JSON document: {e}", path.display()))?;
        merge(&mut doc, &overlay);
    }
    let mut flags = json!({});
    if let Some(out) = &cli.out {
        flags["output"]["path"] = json!(out.to_string_lossy());
    }
    if let Some(f) = cli.format {
        flags["output"]["format"] = json!(match f {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
        });
    }
    if let Some(seed) = cli.seed {
        flags["sim"]["seed"] = json!(seed);
    }
    merge(&mut doc, &flags);
    Ok(doc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let doc = match resolve(&cli) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let config = match validate_value(&doc, Some(cli.mode.into())) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors {
                eprintln!("error: {e}");
            }
            return ExitCode::from(1);
        }
    };

    let outcome = run_experiment(&config);
    let written = match &config.output.path {
        Some(path) => File::create(path)
            .and_then(|f| write_output(&config, &outcome.table, BufWriter::new(f)))
            .map_err(|e| format!("{}: {e}", path.display())),
        None => write_output(&config, &outcome.table, io::stdout().lock()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if outcome.failed_rows > 0 {
        eprintln!(
            "warning: {} of {} rows failed",
            outcome.failed_rows,
            outcome.table.rows.len()
        );
    }
    if outcome.all_failed() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
