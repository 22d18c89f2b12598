use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use wsc_core::estimator::{correlation, estimate, EstimationInit, EstimatorConfig};
use wsc_core::hodge::{hodge_decompose, hodge_laplacian, DECOMPOSE_RCOND};
use wsc_core::io;
use wsc_core::metric_learning::{learn_metric, DegenerateHandling, LearnOptions};
use wsc_core::parallel::{with_threads, Execution};
use wsc_core::synth::{generate_complex, run_fig1, run_fig2, Fig1Config, Fig2Config, GeneratorConfig};
use wsc_core::{Error, HodgeOperators, MetricTensor, SimplicialComplex2, SimplicialSignal};

#[derive(Parser)]
#[command(name = "wsc", version, about = "Signal processing over weighted simplicial complexes")]
struct Cli {
    /// Master seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads for the experiment harnesses.
    #[arg(long, global = true, env = "WSC_THREADS")]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a complex and report every violation.
    Validate {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write B1 or B2 as CSV.
    Incidence {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a weighted Hodge Laplacian as CSV.
    Laplacian {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short)]
        k: usize,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long, value_enum, default_value_t = Part::Full)]
        part: Part,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Hodge decomposition of an edge flow.
    Decompose {
        #[arg(short, long)]
        input: PathBuf,
        /// Edge flow (JSON, or CSV with one value per line).
        #[arg(short = 'x', long)]
        flow: PathBuf,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Joint estimation of an edge flow and the triangle metric.
    Denoise {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short = 'x', long)]
        flow: PathBuf,
        /// Estimator configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        g0: Option<PathBuf>,
        #[arg(long)]
        g1: Option<PathBuf>,
        /// Clean flow, to report the correlation of the estimate with it.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Learn G2 from edge-signal snapshots (CSV: rows are edges).
    LearnMetric {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short = 'X', long)]
        snapshots: PathBuf,
        /// Floor vanishing circulation energies instead of failing.
        #[arg(long)]
        floor_degenerate: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a random complex.
    GenComplex {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Correlation against noise level, joint versus flat metric.
    Fig1(ExperimentArgs),
    /// Metric estimation error against the number of signals.
    Fig2(ExperimentArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Vertex weights (JSON, or CSV with one weight per line); identity if
    /// omitted.
    #[arg(long)]
    g0: Option<PathBuf>,
    #[arg(long)]
    g1: Option<PathBuf>,
    #[arg(long)]
    g2: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Curve CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Run metadata JSON; defaults to the output path with `.meta.json`.
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Full,
    Lower,
    Upper,
}

enum Failure {
    /// Validation, parse or argument problems.
    Input(Error),
    /// Results were written but a solver flagged non-convergence.
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

type CmdResult = Result<(), Failure>;

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(p, e))?;
            tmp.write_all(text.as_bytes()).map_err(|e| io_error(p, e))?;
            tmp.as_file().sync_all().map_err(|e| io_error(p, e))?;
            tmp.persist(p).map_err(|e| io_error(p, e.error))?;
            info!("wrote {}", p.display());
            Ok(())
        }
    }
}

fn load_complex(path: &Path) -> Result<SimplicialComplex2, Error> {
    io::parse_complex(&read(path)?)
}

fn load_metric(
    path: Option<&PathBuf>,
    k: usize,
    complex: &SimplicialComplex2,
) -> Result<MetricTensor, Error> {
    match path {
        None => Ok(MetricTensor::identity(k, complex.count(k)?)),
        Some(p) => {
            let g = io::parse_metric(&read(p)?, is_csv(p).then_some(k))?;
            io::check_metric_for(&g, k, complex)?;
            Ok(g)
        }
    }
}

fn load_flow(path: &Path, complex: &SimplicialComplex2) -> Result<SimplicialSignal, Error> {
    let x = io::parse_signal(&read(path)?, is_csv(path).then_some(1))?;
    io::check_signal_for(&x, 1, complex)?;
    Ok(x)
}

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: Option<&PathBuf>,
    field: &str,
) -> Result<T, Error> {
    match path {
        None => Ok(T::default()),
        Some(p) => io::from_json(&read(p)?, field),
    }
}

#[derive(Serialize)]
struct DecomposeReport {
    x0: SimplicialSignal,
    x2: SimplicialSignal,
    xh: SimplicialSignal,
    irrotational: Vec<f64>,
    solenoidal: Vec<f64>,
    harmonic: Vec<f64>,
}

#[derive(Serialize)]
struct DenoiseReport {
    x0: SimplicialSignal,
    x2: SimplicialSignal,
    xh: SimplicialSignal,
    g2_hat: MetricTensor,
    x_hat: SimplicialSignal,
    initial_objective: f64,
    objective_trace: Vec<f64>,
    harmonic_gap: f64,
    q2_feasible: bool,
    l1_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
}

fn metadata_path(args: &ExperimentArgs) -> PathBuf {
    args.metadata.clone().unwrap_or_else(|| {
        let mut name = args.output.file_stem().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        args.output.with_file_name(name)
    })
}

fn run(cli: Cli) -> CmdResult {
    let threads = cli.threads;
    match cli.command {
        Command::Validate { input, output } => {
            let c = io::parse_complex_unchecked(&read(&input)?)?;
            c.validate().map_err(Error::InvalidComplex)?;
            let report = json!({
                "ok": true,
                "n_vertices": c.n_vertices(),
                "n_edges": c.n_edges(),
                "n_triangles": c.n_triangles(),
            });
            emit(output.as_deref(), &io::to_json(&report))?;
        }
        Command::Incidence { input, k, output } => {
            let c = load_complex(&input)?;
            let b = match k {
                1 => c.incidence_b1()?,
                2 => c.incidence_b2()?,
                _ => return Err(Error::InvalidArgument(format!("k must be 1 or 2, got {k}")).into()),
            };
            emit(output.as_deref(), &io::integer_matrix_to_csv(b.entries()))?;
        }
        Command::Laplacian {
            input,
            k,
            metrics,
            part,
            output,
        } => {
            let c = load_complex(&input)?;
            let g0 = load_metric(metrics.g0.as_ref(), 0, &c)?;
            let g1 = load_metric(metrics.g1.as_ref(), 1, &c)?;
            let g2 = load_metric(metrics.g2.as_ref(), 2, &c)?;
            let l = hodge_laplacian(&c, k, &g0, &g1, &g2)?;
            let m = match part {
                Part::Full => l.full,
                Part::Lower => l.lower,
                Part::Upper => l.upper,
            };
            emit(output.as_deref(), &io::matrix_to_csv(&m))?;
        }
        Command::Decompose {
            input,
            flow,
            metrics,
            output,
        } => {
            let c = load_complex(&input)?;
            let g0 = load_metric(metrics.g0.as_ref(), 0, &c)?;
            let g1 = load_metric(metrics.g1.as_ref(), 1, &c)?;
            let g2 = load_metric(metrics.g2.as_ref(), 2, &c)?;
            let x = load_flow(&flow, &c)?;
            let comps = hodge_decompose(&x, &c, &g0, &g1, &g2, DECOMPOSE_RCOND)?;
            let parts = HodgeOperators::new(&c)?.flow_parts(&comps, &g1, &g2)?;
            let report = DecomposeReport {
                x0: comps.x0,
                x2: comps.x2,
                xh: comps.xh,
                irrotational: parts.irrotational.as_slice().to_vec(),
                solenoidal: parts.solenoidal.as_slice().to_vec(),
                harmonic: parts.harmonic.as_slice().to_vec(),
            };
            emit(output.as_deref(), &io::to_json(&report))?;
        }
        Command::Denoise {
            input,
            flow,
            config,
            g0,
            g1,
            truth,
            output,
        } => {
            let c = load_complex(&input)?;
            let g0 = load_metric(g0.as_ref(), 0, &c)?;
            let g1 = load_metric(g1.as_ref(), 1, &c)?;
            let x = load_flow(&flow, &c)?;
            let mut cfg: EstimatorConfig = load_config(config.as_ref(), "estimator config")?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let truth = truth.map(|p| load_flow(&p, &c)).transpose()?;
            let init = EstimationInit::from_config(&x, &c, &g0, &g1, &cfg)?;
            let r = estimate(&x, &c, &g0, &g1, &init, &cfg)?;
            let rho = truth
                .map(|t| correlation(&r.x_hat.values, &t.values))
                .transpose()?;
            let report = DenoiseReport {
                x0: r.components.x0,
                x2: r.components.x2,
                xh: r.components.xh,
                g2_hat: r.g2_hat,
                x_hat: r.x_hat,
                initial_objective: r.initial_objective,
                objective_trace: r.objective_trace,
                harmonic_gap: r.harmonic_gap,
                q2_feasible: r.q2_feasible,
                l1_converged: r.l1_converged,
                rho,
            };
            emit(output.as_deref(), &io::to_json(&report))?;
            if !(report.q2_feasible && report.l1_converged) {
                return Err(Failure::NotConverged(format!(
                    "q2_feasible = {}, l1_converged = {}",
                    report.q2_feasible, report.l1_converged
                )));
            }
        }
        Command::LearnMetric {
            input,
            snapshots,
            floor_degenerate,
            output,
        } => {
            let c = load_complex(&input)?;
            let snaps = io::parse_snapshots(&read(&snapshots)?, is_csv(&snapshots))?;
            let options = LearnOptions {
                degenerate: if floor_degenerate {
                    DegenerateHandling::Floor
                } else {
                    DegenerateHandling::Reject
                },
                ..LearnOptions::default()
            };
            let g2 = learn_metric(&snaps, &c, &options)?;
            emit(output.as_deref(), &io::to_json(&g2))?;
        }
        Command::GenComplex { config, output } => {
            let mut cfg: GeneratorConfig = load_config(config.as_ref(), "generator config")?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let c = generate_complex(&cfg)?;
            emit(output.as_deref(), &io::complex_to_json(&c))?;
        }
        Command::Fig1(args) => {
            let mut cfg: Fig1Config = load_config(args.config.as_ref(), "fig1 config")?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = with_threads(threads, || run_fig1(&cfg, Execution::default()))??;
            emit(Some(&metadata_path(&args)), &io::to_json(&out.metadata))?;
            emit(Some(&args.output), &out.curve.to_csv())?;
        }
        Command::Fig2(args) => {
            let mut cfg: Fig2Config = load_config(args.config.as_ref(), "fig2 config")?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = with_threads(threads, || run_fig2(&cfg, Execution::default()))??;
            emit(Some(&metadata_path(&args)), &io::to_json(&out.metadata))?;
            emit(Some(&args.output), &out.curve.to_csv())?;
        }
    }
    Ok(())
}

fn error_json(e: &Error) -> serde_json::Value {
    let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
    match e {
        Error::InvalidComplex(report) => {
            body["violations"] = report.violations.iter().map(|v| v.to_string()).collect();
        }
        Error::Parse {
            field,
            line,
            column,
            ..
        } => {
            body["field"] = json!(field);
            body["line"] = json!(line);
            body["column"] = json!(column);
        }
        Error::DimensionMismatch {
            what,
            expected,
            found,
        } => {
            body["what"] = json!(what);
            body["expected"] = json!(expected);
            body["found"] = json!(found);
        }
        Error::DegenerateCoefficients { triangles } => {
            body["triangles"] = json!(triangles);
        }
        _ => {}
    }
    json!({ "error": body })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("{}", json!({ "error": { "kind": "not_converged", "message": msg } }));
            ExitCode::from(2)
        }
    }
}
