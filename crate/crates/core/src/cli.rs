//! Command-line front end. [`run`] never exits the process so it can be
//! driven from tests; `main` maps its return value to the exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::dsl::{compile, encode, parse, DescriptionResolver, DirectoryResolver, SourceUnit};
use crate::engine::{Datum, LocalCluster, PureServices, SimulatedTransport, ValueEnvelope, WorkflowState};
use crate::harness::{run_bench, BenchConfig, BenchReport, HarnessError, Topology};
use crate::partitioner::{compose, decompose, generate_uid, parse_uid, place, ComposeOptions, IdentitySizes};
use crate::qos::QosSample;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}", .0.join("\n"))]
    Diagnostics(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Diagnostics(_) => EXIT_DIAGNOSTICS,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Diagnostics(vec![e.to_string()])
    }
}

#[derive(Debug, Parser)]
#[command(name = "orchestra", version, about = "Compile, partition, run and benchmark dataflow workflows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a workflow and optionally export its graph.
    Compile(CompileArgs),
    /// Split a workflow into per-engine composites.
    Partition(PartitionArgs),
    /// Execute a workflow on one in-process engine with stub services.
    Run(RunArgs),
    /// Run simulated experiments from a config file.
    Bench(BenchArgs),
    /// Render a saved bench report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory of service descriptions. Defaults to `descriptions/` next to the spec.
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    #[arg(long)]
    pub emit_dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Size of every workflow input, used by the placement estimate.
    #[arg(long, default_value_t = 1.0)]
    pub input_mb: f64,
    /// Engine that collects final outputs.
    #[arg(long)]
    pub sink: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    /// Workflow input as `name=value`. Repeatable.
    #[arg(long = "input", value_name = "NAME=VALUE")]
    pub inputs: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    pub size_mb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    /// Output directory for report.json, runs.csv and summary.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Write only this machine-readable format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Overrides the seed of every experiment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Compile(a) => cmd_compile(&a, out),
        Command::Partition(a) => cmd_partition(&a, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Diagnostics(vec![format!("cannot write {}: {e}", path.display())]))
}

fn resolver_for(spec: &Path, dir: &Option<PathBuf>) -> DirectoryResolver {
    let root = dir.clone().unwrap_or_else(|| {
        spec.parent()
            .unwrap_or_else(|| Path::new("."))
            .join("descriptions")
    });
    DirectoryResolver::new(root)
}

fn load(spec: &Path) -> Result<SourceUnit, CliError> {
    Ok(SourceUnit::new(spec.display().to_string(), read(spec)?))
}

fn diagnostics(origin: &str, e: impl Into<crate::dsl::CompileError>) -> CliError {
    CliError::Diagnostics(e.into().diagnostics().into_iter().map(|d| format!("{origin}: {d}")).collect())
}

fn cmd_compile(a: &CompileArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let src = load(&a.spec)?;
    let resolver = resolver_for(&a.spec, &a.descriptions);
    let compiled = compile(&src, &resolver).map_err(|e| diagnostics(&src.origin, e))?;
    let g = &compiled.graph;
    let _ = writeln!(
        out,
        "ok: workflow {} with {} invocations and {} edges",
        g.meta.name,
        g.invocations().count(),
        g.edges().len()
    );
    if let Some(path) = &a.emit_dot {
        write(path, g.to_dot().as_bytes())?;
    }
    Ok(())
}

fn cmd_partition(a: &PartitionArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let src = load(&a.spec)?;
    let topo = Topology::from_json(&read(&a.topology)?)?;
    let resolver = resolver_for(&a.spec, &a.descriptions);
    let compiled = compile(&src, &resolver).map_err(|e| diagnostics(&src.origin, e))?;
    let g = &compiled.graph;

    let engines = topo.distributed_engines();
    let qos = topo.qos_matrix(&engines)?;
    let infos = topo.engine_infos(&engines)?;
    let subs = decompose(g);
    let inputs = g.inputs().map(|n| (n.label(), a.input_mb)).collect();
    let sizes = IdentitySizes::new(g, &inputs, a.input_mb);
    let plan = place(&subs, &infos, &qos, &sizes).map_err(HarnessError::from)?;
    let uid = generate_uid(&g.meta.name, a.seed);
    let mut all = engines.clone();
    if let Some(sink) = &a.sink {
        if !all.contains(sink) {
            all.push(sink.clone());
        }
    }
    let options = ComposeOptions {
        sink: a.sink.clone(),
        base_uid: Some(uid.clone()),
    };
    let composites = compose(g, &subs, &plan, &topo.engine_infos(&all)?, &options).map_err(HarnessError::from)?;

    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Diagnostics(vec![format!("cannot create {}: {e}", a.out.display())]))?;
    let mut listed = Vec::new();
    for c in &composites {
        let unit = encode(c).map_err(|e| diagnostics(&c.display_name(), e))?;
        let file = format!("{}.{}.orc", g.meta.name, c.ordinal);
        write(&a.out.join(&file), unit.text.as_bytes())?;
        let _ = writeln!(out, "{file}: {} on {}", c.display_name(), c.host_engine.as_deref().unwrap_or("-"));
        listed.push(json!({
            "file": file,
            "uid": c.uid,
            "engine": c.host_engine,
            "inputs": c.input_names(),
            "outputs": c.output_names(),
            "forwards": c.forwards.iter().map(|f| json!({"variable": f.variable, "engine": f.engine})).collect::<Vec<_>>(),
        }));
    }
    let plan_json: serde_json::Value = serde_json::from_str(&plan.to_json()).expect("plan is JSON");
    let sub_json: Vec<_> = subs
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "service": s.service_id,
                "nodes": s.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = json!({
        "workflow": g.meta.name,
        "uid": uid,
        "seed": a.seed,
        "input_mb": a.input_mb,
        "sub_workflows": sub_json,
        "placement": plan_json,
        "composites": listed,
    });
    let text = serde_json::to_string_pretty(&doc).expect("placement serializes");
    write(&a.out.join("placement.json"), text.as_bytes())
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let src = load(&a.spec)?;
    let resolver: Arc<dyn DescriptionResolver + Send + Sync> = Arc::new(resolver_for(&a.spec, &a.descriptions));
    let ast = parse(&src).map_err(|e| diagnostics(&src.origin, e))?;
    compile(&src, resolver.as_ref()).map_err(|e| diagnostics(&src.origin, e))?;
    let uid = ast.uid.clone().unwrap_or_else(|| ast.name.clone());
    let base = parse_uid(&uid).0;

    let local = QosSample::new(0.0, 1e6).expect("valid");
    let mut cluster = LocalCluster::new(PureServices::default(), SimulatedTransport::new(Some(local)), None);
    cluster.add_engine("local", "local://engine", resolver.clone());
    for e in &ast.engines {
        cluster.add_engine(&e.id, &e.url, resolver.clone());
    }
    cluster
        .deploy("local", &src)
        .map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?;
    for item in &a.inputs {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--input expects NAME=VALUE, got {item:?}")))?;
        let decl = ast
            .input(name)
            .ok_or_else(|| CliError::Usage(format!("workflow has no input named {name}")))?;
        let datum = Datum::parse(decl.ty, value, a.size_mb).map_err(|e| CliError::Usage(e.to_string()))?;
        cluster
            .inject(
                "local",
                ValueEnvelope {
                    uid: base.clone(),
                    variable: name.to_string(),
                    datum,
                },
            )
            .map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?;
    }
    cluster.run().map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?;

    let engine = cluster.engine("local").expect("local engine");
    let rec = engine.record(0).expect("deployed");
    for (name, datum) in &rec.outputs {
        let _ = writeln!(out, "{name} = {}", datum.render());
    }
    for d in &rec.dispatches {
        let _ = writeln!(out, "forwarded {} to {}", d.variable, d.dest);
    }
    match rec.state {
        WorkflowState::Completed => Ok(()),
        WorkflowState::Failed => Err(CliError::Diagnostics(vec![rec.error.clone().unwrap_or_default()])),
        _ => {
            let missing: Vec<String> = ast
                .inputs
                .iter()
                .map(|v| v.name.clone())
                .filter(|n| !a.inputs.iter().any(|i| i.split('=').next() == Some(n.as_str())))
                .collect();
            Err(CliError::Diagnostics(vec![format!(
                "workflow {uid} did not complete; missing inputs: {}",
                if missing.is_empty() { "none".into() } else { missing.join(", ") }
            )]))
        }
    }
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = BenchConfig::from_json(&read(&a.config)?)?;
    if let Some(seed) = a.seed {
        for e in &mut config.experiments {
            e.seed = seed;
        }
    }
    let report = run_bench(&config)?;
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Diagnostics(vec![format!("cannot create {}: {e}", a.out.display())]))?;
    if matches!(a.format, None | Some(Format::Json)) {
        write(&a.out.join("report.json"), report.to_json().as_bytes())?;
    }
    if matches!(a.format, None | Some(Format::Csv)) {
        let mut buf = Vec::new();
        report
            .write_csv(&mut buf)
            .map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?;
        write(&a.out.join("runs.csv"), &buf)?;
    }
    let summary = report.summary();
    write(&a.out.join("summary.txt"), summary.as_bytes())?;
    let _ = out.write_all(summary.as_bytes());
    Ok(())
}

fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = BenchReport::from_json(&read(&a.report)?)
        .map_err(|e| CliError::Diagnostics(vec![format!("{}: {e}", a.report.display())]))?;
    match a.format {
        Format::Table => {
            let _ = out.write_all(report.summary().as_bytes());
        }
        Format::Json => {
            let _ = writeln!(out, "{}", report.to_json());
        }
        Format::Csv => report
            .write_csv(out)
            .map_err(|e| CliError::Diagnostics(vec![e.to_string()]))?,
    }
    Ok(())
}
