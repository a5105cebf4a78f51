use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use magnon_link::harness::config::{apply_override, resolve, ExperimentKind};
use magnon_link::harness::execute;

#[derive(Parser)]
#[command(name = "magnon-link", version, about = "Two-stage qubit / remote magnon entanglement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config with sections system, integrator, experiment, output.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; falls back to output.dir in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override, e.g. system.T1=0.1 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Single protocol run: timeseries, summary and manifest.
    Run(Common),
    /// Two-axis rate sweep of F and max N2.
    Sweep(Common),
    /// Diagnostic check suite.
    Check(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Run(a) => (ExperimentKind::Single, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Check(a) => (ExperimentKind::Check, a),
    };
    match drive(kind, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn drive(kind: ExperimentKind, args: Common) -> magnon_link::Result<i32> {
    let mut doc: Value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| {
                magnon_link::Error::Config(format!(
                    "{}: parse error at line {}, column {}: {e}",
                    path.display(),
                    e.line(),
                    e.column()
                ))
            })?
        }
        None => Value::Object(Default::default()),
    };
    // The subcommand names the experiment when the document has no block.
    if doc.get("experiment").is_none() {
        apply_override(&mut doc, &format!("experiment.kind=\"{}\"", kind.name()))?;
    }
    for s in &args.set {
        apply_override(&mut doc, s)?;
    }
    let cfg = resolve(doc)?;
    if cfg.experiment.kind != kind {
        return Err(magnon_link::Error::Config(format!(
            "config describes a {} experiment but the command runs {}",
            cfg.experiment.kind.name(),
            kind.name()
        )));
    }
    let out = args
        .out
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| magnon_link::Error::Config("no output directory: pass --out or set output.dir".into()))?;
    let outcome = execute(&cfg, &out)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    Ok(outcome.status.code())
}
