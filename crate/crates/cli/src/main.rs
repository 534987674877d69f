//! `tm`: validate, simulate, draw and check thinging machine models.
//!
//! Exit codes: 0 success, 1 validation or semantic failure, 2 usage or I/O
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use thinging::batch::{simulate_batch, BatchResult};
use thinging::dot::to_dot;
use thinging::dsl::{self, ParseDiagnostic};
use thinging::engine::{conforms, Limits, DEFAULT_MAX_STEPS};
use thinging::event::{Chronology, Event};
use thinging::model::Model;
use thinging::modelib::{builtin_case, load_case_dir, BundledCase, ModelibError, CASE_NAMES};
use thinging::scenarios::{load_scenario, OutcomeClass, Scenario, ScenarioError};
use thinging::trace_file::{Expectation, TraceFile};
use thinging::validator::{validate, validate_events, DiagnosticRecord, Severity};

const CASES_ENV: &str = "TM_CASES_DIR";

#[derive(Parser)]
#[command(name = "tm", version, about = "Thinging machine models: validate, simulate, export, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a model and, optionally, its events.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run scenarios and print occurrences and outcomes.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Scenario file, or scenario name within `--case`. Repeatable.
        #[arg(long = "scenario", required_unless_present = "all")]
        scenarios: Vec<String>,
        /// Every scenario of the case.
        #[arg(long, requires = "case")]
        all: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
        /// Trace output for a single scenario.
        #[arg(long, conflicts_with = "trace_dir")]
        trace: Option<PathBuf>,
        /// Directory receiving `<scenario>.json` per scenario.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Write the model as a Graphviz digraph.
    ExportDot {
        #[command(flatten)]
        source: Source,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Highlight the region of this event.
        #[arg(long)]
        region: Option<String>,
    },
    /// Compare a trace file with an expectation file.
    CheckTrace { trace: PathBuf, expected: PathBuf },
    /// Report which step numbers each bundled case anchors or excludes.
    AuditAnchors {
        /// Audit just this case.
        #[arg(long)]
        case: Option<String>,
    },
}

#[derive(Args)]
struct Source {
    /// Model file (`.tm`).
    #[arg(required_unless_present = "case", conflicts_with = "case")]
    model: Option<PathBuf>,
    /// Bundled case name; `TM_CASES_DIR` overrides the bundled copies.
    #[arg(long)]
    case: Option<String>,
    /// Event file (`.tme`); defaults to the case's events.
    #[arg(long)]
    events: Option<PathBuf>,
}

enum Failure {
    /// Exit 1.
    Semantic(String),
    /// Exit 2.
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Semantic(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

type CmdResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { source, report } => cmd_validate(&source, report.as_deref()),
        Command::Simulate {
            source,
            scenarios,
            all,
            max_steps,
            trace,
            trace_dir,
        } => cmd_simulate(&source, &scenarios, all, max_steps, trace.as_deref(), trace_dir.as_deref()),
        Command::ExportDot { source, out, region } => cmd_export_dot(&source, out.as_deref(), region.as_deref()),
        Command::CheckTrace { trace, expected } => cmd_check_trace(&trace, &expected),
        Command::AuditAnchors { case } => cmd_audit_anchors(case.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            match &f {
                Failure::Semantic(m) | Failure::Io(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CmdResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn modelib_failure(e: ModelibError) -> Failure {
    match e {
        ModelibError::UnknownCase(_) | ModelibError::Io { .. } => Failure::Io(e.to_string()),
        ModelibError::UnknownScenario(_) => Failure::Io(e.to_string()),
        ModelibError::Scenario(ScenarioError::Io { .. }) => Failure::Io(e.to_string()),
        other => Failure::Semantic(other.to_string()),
    }
}

fn resolve_case(name: &str) -> CmdResult<BundledCase> {
    match std::env::var_os(CASES_ENV) {
        Some(dir) => {
            let dir = Path::new(&dir).join(name);
            if !dir.is_dir() {
                return Err(Failure::Io(format!("unknown case `{name}` (no {})", dir.display())));
            }
            load_case_dir(&dir).map_err(modelib_failure)
        }
        None => builtin_case(name).map_err(modelib_failure),
    }
}

fn print_parse_errors(diags: &[ParseDiagnostic]) {
    for d in diags {
        println!("{d}");
    }
}

/// Everything `validate`, `simulate` and `export-dot` work on.
struct Loaded {
    model: Model,
    events: Vec<Event>,
    chronology: Chronology,
    case: Option<BundledCase>,
}

/// Loads the model and events. Parse failures print their diagnostics and
/// become exit 1.
fn load(source: &Source) -> CmdResult<Loaded> {
    let case = source.case.as_deref().map(resolve_case).transpose()?;
    let (model_file, model_text) = match (&source.model, &case) {
        (Some(path), _) => (path.display().to_string(), read(path)?),
        (None, Some(c)) => ("model.tm".to_string(), c.model_source.clone()),
        (None, None) => return Err(Failure::Io("a model file or --case is required".into())),
    };
    let model = dsl::parse_named(&model_file, &model_text).map_err(|diags| {
        print_parse_errors(&diags);
        Failure::Semantic(format!("{model_file}: {} parse error(s)", diags.len()))
    })?;
    let events_text = match (&source.events, &case) {
        (Some(path), _) => Some((path.display().to_string(), read(path)?)),
        (None, Some(c)) => Some(("events.tme".to_string(), c.events_source.clone())),
        (None, None) => None,
    };
    let (events, chronology) = match events_text {
        Some((file, text)) => dsl::parse_events_named(&file, &text, &model).map_err(|diags| {
            print_parse_errors(&diags);
            Failure::Semantic(format!("{file}: {} parse error(s)", diags.len()))
        })?,
        None => (Vec::new(), Chronology::default()),
    };
    Ok(Loaded {
        model,
        events,
        chronology,
        case,
    })
}

#[derive(Serialize)]
struct Report {
    errors: usize,
    warnings: usize,
    model: Vec<DiagnosticRecord>,
    events: Vec<DiagnosticRecord>,
}

fn cmd_validate(source: &Source, report: Option<&Path>) -> CmdResult<u8> {
    let loaded = load(source)?;
    let model_diags = validate(&loaded.model);
    let event_diags = validate_events(&loaded.model, &loaded.events, &loaded.chronology);
    let all: Vec<_> = model_diags.iter().chain(&event_diags).collect();
    for d in &all {
        println!("{d}");
    }
    let errors = all.iter().filter(|d| d.severity() == Severity::Error).count();
    let warnings = all.len() - errors;
    println!(
        "{} stage(s), {} event(s): {errors} error(s), {warnings} warning(s)",
        loaded.model.stages().len(),
        loaded.events.len()
    );
    if let Some(path) = report {
        let r = Report {
            errors,
            warnings,
            model: model_diags.iter().map(DiagnosticRecord::from).collect(),
            events: event_diags.iter().map(DiagnosticRecord::from).collect(),
        };
        let mut text = serde_json::to_string_pretty(&r).expect("report serializes");
        text.push('\n');
        write(path, &text)?;
    }
    Ok(if errors == 0 { 0 } else { 1 })
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Io { .. } => Failure::Io(e.to_string()),
        ScenarioError::SchemaViolation { .. } => Failure::Semantic(e.to_string()),
    }
}

fn cmd_simulate(
    source: &Source,
    names: &[String],
    all: bool,
    max_steps: u64,
    trace: Option<&Path>,
    trace_dir: Option<&Path>,
) -> CmdResult<u8> {
    let loaded = load(source)?;
    let mut jobs: Vec<(String, Scenario)> = Vec::new();
    if all {
        let case = loaded.case.as_ref().expect("--all requires --case");
        for name in case.scenarios.keys() {
            jobs.push((name.clone(), case.scenario(name).map_err(modelib_failure)?));
        }
    }
    for arg in names {
        let path = Path::new(arg);
        let job = match &loaded.case {
            Some(case) if case.scenarios.contains_key(arg) => {
                (arg.clone(), case.scenario(arg).map_err(modelib_failure)?)
            }
            _ => {
                let name = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or(arg)
                    .to_string();
                (name, load_scenario(path).map_err(scenario_failure)?)
            }
        };
        jobs.push(job);
    }
    if trace.is_some() && jobs.len() != 1 {
        return Err(Failure::Io("--trace takes exactly one scenario; use --trace-dir".into()));
    }
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    }

    let results = simulate_batch(&loaded.model, &loaded.events, &jobs, Limits { max_steps });
    let mut failed = false;
    for BatchResult { name, result } in results {
        println!("scenario {name}");
        let run = match result {
            Ok(run) => run,
            Err(e) => {
                println!("  error: {e}");
                failed = true;
                continue;
            }
        };
        if run.trace.step_limit_exceeded {
            eprintln!("warning: {name}: stopped at the step limit ({max_steps}) before quiescence");
        }
        println!("  steps: {}", run.trace.steps.len());
        println!("  occurrences:");
        for (i, o) in run.trace.occurrences.iter().enumerate() {
            println!("    {:>3}  step {:>5}  {}", i + 1, o.step, o.name);
        }
        let conformance = conforms(&run.trace.occurrences, &loaded.chronology);
        if conformance.ok() {
            println!("  chronology: ok");
        } else {
            for v in &conformance.violations {
                let event = |id: thinging::event::EventId| loaded.events[id.index()].name.clone();
                println!(
                    "  chronology: occurrence {} of `{}` at step {} follows {} of `{}`, needs {}",
                    v.rank,
                    event(v.after),
                    v.step,
                    v.found,
                    event(v.before),
                    v.required
                );
            }
        }
        println!("  outcomes:");
        let mut retained = 0;
        for o in &run.outcomes {
            if o.class == OutcomeClass::Retained {
                retained += 1;
                continue;
            }
            match &o.reason {
                Some(r) => println!("    token {:<3} {:<18} {}  ({r})", o.token, o.class.to_string(), o.location),
                None => println!("    token {:<3} {:<18} {}", o.token, o.class.to_string(), o.location),
            }
        }
        if retained > 0 {
            println!("    {retained} token(s) retained at intermediate stages");
        }
        let file = TraceFile::new(&run.trace, &loaded.model, run.outcomes);
        let target = match (trace, trace_dir) {
            (Some(p), _) => Some(p.to_path_buf()),
            (None, Some(d)) => Some(d.join(format!("{name}.json"))),
            _ => None,
        };
        if let Some(path) = target {
            write(&path, &file.to_json())?;
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn cmd_export_dot(source: &Source, out: Option<&Path>, region: Option<&str>) -> CmdResult<u8> {
    let loaded = load(source)?;
    let highlight = match region {
        Some(name) => {
            let event = loaded
                .events
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Failure::Semantic(format!("no event named `{name}`")))?;
            Some(
                event
                    .resolve(&loaded.model)
                    .map_err(|el| Failure::Semantic(format!("unresolved region element `{el}`")))?,
            )
        }
        None => None,
    };
    let dot = to_dot(&loaded.model, highlight.as_ref());
    match out {
        Some(path) => write(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(0)
}

fn cmd_check_trace(trace: &Path, expected: &Path) -> CmdResult<u8> {
    let trace_text = read(trace)?;
    let expected_text = read(expected)?;
    let trace = TraceFile::from_json(&trace_text)
        .map_err(|e| Failure::Io(format!("{}: not a trace file: {e}", trace.display())))?;
    let expected = Expectation::from_json(&expected_text)
        .map_err(|e| Failure::Io(format!("{}: not an expectation file: {e}", expected.display())))?;
    match expected.first_mismatch(&trace) {
        None => {
            println!(
                "ok: {} occurrence(s), {} outcome(s) match",
                expected.occurrences.len(),
                expected.outcomes.len()
            );
            Ok(0)
        }
        Some(m) => {
            println!("mismatch: {m}");
            Ok(1)
        }
    }
}

fn cmd_audit_anchors(case: Option<&str>) -> CmdResult<u8> {
    let names: Vec<&str> = match case {
        Some(c) => vec![c],
        None => CASE_NAMES.to_vec(),
    };
    let mut complete = true;
    for name in names {
        let case = resolve_case(name)?;
        let audit = case.audit_anchors().map_err(modelib_failure)?;
        let pct = 100.0 * audit.accounted() as f64 / audit.total().max(1) as f64;
        println!(
            "{name}: {}/{} step numbers accounted ({pct:.0}%), {} anchored, {} excluded",
            audit.accounted(),
            audit.total(),
            audit.sites.len(),
            audit.excluded.len()
        );
        let list = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
        for (label, v) in [
            ("missing", &audit.missing),
            ("anchored more than once", &audit.duplicated),
            ("both anchored and excluded", &audit.contradicted),
            ("outside the numbered range", &audit.out_of_range),
        ] {
            if !v.is_empty() {
                println!("  {label}: {}", list(v));
            }
        }
        complete &= audit.is_complete();
    }
    Ok(if complete { 0 } else { 1 })
}
