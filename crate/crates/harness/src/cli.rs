//! Command-line interface. Stages talk to each other only through files
//! under `--workdir`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kgbench_core::rdf::parse_turtle;
use kgbench_core::shacl::validate;
use kgbench_core::stats::Method as TestMethod;
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::compare::{compare, text_table, write_stats_csv, CompareError, CompareOptions, Missing, Pooling};
use crate::config::{ConfigError, ConfigFile};
use crate::evaluate::{
    evaluate_dir, load_ontology_terms, read_metrics_csv, write_metrics_csv, EvalError, ShapesSelection,
};
use crate::pipeline::{
    experiment_dir, run_experiment, ClientFactory, ExperimentManifest, LiveFactory, PipelineError, ReplayFactory,
    RunStatus, MANIFEST_FILE,
};
use crate::provider::{ProviderError, RetryPolicy};
use crate::report::{write_report, ReportError};

#[derive(Debug, Parser)]
#[command(name = "kgbench", version, about = "Generate and evaluate ontology-grounded knowledge graphs")]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Args)]
#[group(required = true, multiple = false)]
pub struct ModeFlags {
    /// Serve every call from recorded cassettes; no network.
    #[arg(long)]
    pub replay: bool,
    /// Call the provider and rewrite the experiment's cassettes from scratch.
    #[arg(long)]
    pub record: bool,
    /// Call the provider; cassettes are written alongside.
    #[arg(long)]
    pub live: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate graphs for every experiment in the config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        mode: ModeFlags,
    },
    /// Score every .ttl file under a run directory.
    Evaluate {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        /// Shapes file or `builtin:observation|action`; prefix `KIND=` to limit it to one graph kind.
        #[arg(long)]
        shapes: Vec<String>,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Validate one graph; exit 0 iff it conforms.
    Validate {
        graph: PathBuf,
        #[arg(long, required = true)]
        shapes: Vec<String>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise Mann-Whitney U comparisons between models.
    Stats {
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        /// Metric column, or `compliance` / `coverage` for the averages.
        #[arg(long = "metric", default_values_t = ["compliance".to_string(), "coverage".to_string()])]
        metric: Vec<String>,
        #[arg(long, value_enum, default_value_t = Pooling::PerRun)]
        pooling: Pooling,
        #[arg(long, value_enum, default_value_t = Missing::Zero)]
        missing: Missing,
        #[arg(long, value_enum, default_value_t = TestKind::Auto)]
        test: TestKind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "stats.csv")]
        out: PathBuf,
    },
    /// Summary table and charts.
    Report {
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// generate, evaluate, validate, stats and report in sequence.
    All {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        mode: ModeFlags,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TestKind {
    Auto,
    Exact,
    Asymptotic,
}

impl From<TestKind> for TestMethod {
    fn from(k: TestKind) -> Self {
        match k {
            TestKind::Auto => TestMethod::Auto,
            TestKind::Exact => TestMethod::Exact,
            TestKind::Asymptotic => TestMethod::Asymptotic,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Pipeline(PipelineError::Config(_)) => EXIT_USAGE,
            CliError::Pipeline(PipelineError::Provider { source, .. })
                if matches!(source, ProviderError::Auth(_) | ProviderError::CassetteMissing { .. }) =>
            {
                EXIT_USAGE
            }
            CliError::Eval(EvalError::Shapes { .. } | EvalError::Ontology { .. }) => EXIT_USAGE,
            CliError::Compare(CompareError::UnknownMetric(_)) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        }
    }
}

fn io(path: &Path, e: impl ToString) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn factory(mode: ModeFlags, config: &ConfigFile, workdir: &Path) -> Box<dyn ClientFactory> {
    let cassettes = workdir.join(&config.cassettes);
    if mode.replay {
        Box::new(ReplayFactory { cassettes })
    } else {
        Box::new(LiveFactory {
            cassettes,
            retry: RetryPolicy::default(),
            fresh: mode.record,
        })
    }
}

pub fn cmd_generate(workdir: &Path, config_path: &Path, mode: ModeFlags) -> Result<ConfigFile, CliError> {
    let config = ConfigFile::load(&workdir.join(config_path))?;
    let factory = factory(mode, &config, workdir);
    let runs_root = workdir.join(&config.runs_dir);
    for exp in config.experiments() {
        let records = run_experiment(&exp, workdir, &runs_root, factory.as_ref())?;
        let failed = records.iter().filter(|r| r.status != RunStatus::Ok).count();
        let invalid = records
            .iter()
            .filter(|r| r.parse.as_ref().is_some_and(|p| !p.valid))
            .count();
        let dir = experiment_dir(&runs_root, &records[0].config_digest);
        println!(
            "{}: {} runs, {failed} failed, {invalid} not valid Turtle -> {}",
            exp.label(),
            records.len(),
            dir.display()
        );
    }
    Ok(config)
}

pub fn cmd_evaluate(workdir: &Path, runs: &Path, ontology: &Path, shapes: &[String], out: &Path) -> Result<usize, CliError> {
    let terms = load_ontology_terms(&workdir.join(ontology))?;
    let selection = ShapesSelection::from_args(shapes, workdir)?;
    let rows = evaluate_dir(&workdir.join(runs), &terms, &selection)?;
    let out = workdir.join(out);
    write_metrics_csv(&out, &rows)?;
    let valid = rows.iter().filter(|r| r.record.rdf_valid).count();
    println!("{} graphs, {valid} valid Turtle -> {}", rows.len(), out.display());
    Ok(rows.len())
}

#[derive(Serialize)]
struct ValidationOutput<'a> {
    graph: String,
    conforms: bool,
    violation_count: usize,
    report: &'a kgbench_core::shacl::ValidationReport,
}

/// Validates one graph and returns the report JSON and whether it conforms.
fn validate_graph(workdir: &Path, graph: &Path, shapes: &[String]) -> Result<(String, bool, usize), CliError> {
    let selection = ShapesSelection::from_args(shapes, workdir)?;
    let shapes = selection.for_kind("").ok_or_else(|| CliError::Domain("no shapes given".into()))?;
    let path = workdir.join(graph);
    let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    let data = parse_turtle(&text).map_err(|e| CliError::Domain(format!("{}: not valid Turtle: {e}", path.display())))?;
    let report = validate(&data, &shapes);
    let output = ValidationOutput {
        graph: graph.display().to_string(),
        conforms: report.conforms(),
        violation_count: report.len(),
        report: &report,
    };
    let json = serde_json::to_string_pretty(&output).expect("report serializes") + "\n";
    Ok((json, report.conforms(), report.len()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io(path, e))
}

/// Returns whether the graph conforms.
pub fn cmd_validate(workdir: &Path, graph: &Path, shapes: &[String], out: Option<&Path>) -> Result<bool, CliError> {
    let (json, conforms, violations) = validate_graph(workdir, graph, shapes)?;
    match out {
        Some(out) => {
            write_file(&workdir.join(out), &json)?;
            println!("{}: conforms={conforms} violations={violations}", graph.display());
        }
        None => print!("{json}"),
    }
    Ok(conforms)
}

pub struct StatsArgs<'a> {
    pub metrics: &'a Path,
    pub metric: &'a [String],
    pub options: CompareOptions,
    pub out: &'a Path,
}

pub fn cmd_stats(workdir: &Path, args: &StatsArgs<'_>) -> Result<(), CliError> {
    let rows = read_metrics_csv(&workdir.join(args.metrics))?;
    let comparisons = compare(&rows, args.metric, &args.options)?;
    let out = workdir.join(args.out);
    write_stats_csv(&out, &comparisons).map_err(|e| io(&out, e))?;
    let table = text_table(&comparisons);
    let txt = out.with_extension("txt");
    fs::write(&txt, &table).map_err(|e| io(&txt, e))?;
    print!("{table}");
    Ok(())
}

pub fn cmd_report(workdir: &Path, metrics: &Path, stats: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let rows = read_metrics_csv(&workdir.join(metrics))?;
    let stats = stats.map(|s| workdir.join(s));
    let out = workdir.join(out);
    let written = write_report(&rows, stats.as_deref(), &out)?;
    println!("{} report files -> {}", written.len(), out.display());
    Ok(())
}

/// Validates every generated graph of the config against the shapes for
/// its kind, writing `validation/<experiment>/run_XX.json`. Non-conformance
/// is reported, not an error.
fn validate_all(workdir: &Path, config: &ConfigFile) -> Result<(usize, usize), CliError> {
    let runs_root = workdir.join(&config.runs_dir);
    let mut checked = 0;
    let mut conforming = 0;
    for entry in WalkDir::new(&runs_root).sort_by_file_name() {
        let entry = entry.map_err(|e| io(&runs_root, e))?;
        let path = entry.path();
        if path.extension().is_none_or(|e| e != "ttl") {
            continue;
        }
        let parent = path.parent().expect("file has a parent");
        let manifest: Option<ExperimentManifest> = fs::read_to_string(parent.join(MANIFEST_FILE))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let Some(manifest) = manifest else { continue };
        let shapes: Vec<String> = config.shapes_for(manifest.graph_kind).to_vec();
        if shapes.is_empty() {
            continue;
        }
        let rel = path.strip_prefix(workdir).unwrap_or(path);
        let exp_name = parent.file_name().expect("named dir").to_string_lossy().into_owned();
        let out = Path::new("validation")
            .join(exp_name)
            .join(path.with_extension("json").file_name().expect("file name"));
        match validate_graph(workdir, rel, &shapes) {
            Ok((json, ok, _)) => {
                write_file(&workdir.join(&out), &json)?;
                checked += 1;
                conforming += usize::from(ok);
            }
            // unparseable output is scored as invalid by evaluate
            Err(CliError::Domain(_)) => checked += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((checked, conforming))
}

pub fn cmd_all(workdir: &Path, config_path: &Path, mode: ModeFlags) -> Result<(), CliError> {
    let config = cmd_generate(workdir, config_path, mode)?;
    let shapes: Vec<String> = config
        .shapes
        .iter()
        .flat_map(|(kind, refs)| refs.iter().map(move |r| format!("{kind}={r}")))
        .collect();
    let metrics = PathBuf::from("metrics.csv");
    cmd_evaluate(workdir, &config.runs_dir, &config.ontology, &shapes, &metrics)?;
    let (checked, conforming) = validate_all(workdir, &config)?;
    println!("validation: {conforming} of {checked} graphs conform");
    let stats = PathBuf::from("stats.csv");
    let models = read_metrics_csv(&workdir.join(&metrics))?
        .iter()
        .map(|r| r.model.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let stats_path = if models >= 2 {
        cmd_stats(
            workdir,
            &StatsArgs {
                metrics: &metrics,
                metric: &["compliance".to_string(), "coverage".to_string()],
                options: CompareOptions::default(),
                out: &stats,
            },
        )?;
        Some(stats.as_path())
    } else {
        println!("stats: skipped, only {models} model");
        None
    };
    cmd_report(workdir, &metrics, stats_path, Path::new("report"))
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let workdir = cli.workdir.as_path();
    let result = match &cli.command {
        Command::Generate { config, mode } => cmd_generate(workdir, config, *mode).map(|_| EXIT_OK),
        Command::Evaluate {
            runs,
            ontology,
            shapes,
            out,
        } => cmd_evaluate(workdir, runs, ontology, shapes, out).map(|_| EXIT_OK),
        Command::Validate { graph, shapes, out } => {
            cmd_validate(workdir, graph, shapes, out.as_deref()).map(|ok| if ok { EXIT_OK } else { EXIT_DOMAIN })
        }
        Command::Stats {
            metrics,
            metric,
            pooling,
            missing,
            test,
            alpha,
            out,
        } => cmd_stats(
            workdir,
            &StatsArgs {
                metrics,
                metric,
                options: CompareOptions {
                    pooling: *pooling,
                    missing: *missing,
                    method: (*test).into(),
                    alpha: *alpha,
                },
                out,
            },
        )
        .map(|()| EXIT_OK),
        Command::Report { metrics, stats, out } => cmd_report(workdir, metrics, stats.as_deref(), out).map(|()| EXIT_OK),
        Command::All { config, mode } => cmd_all(workdir, config, *mode).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
