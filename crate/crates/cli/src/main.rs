use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lndp::blur::compressed_blurry;
use lndp::distinguisher::{distinguish, DistinguisherParams, Label};
use lndp::estimators::{est_clique, est_edges, est_er_p};
use lndp::graph::{degree_pmf, Graph};
use lndp::harness::{
    experiment_warnings, parse_spec, run_experiment, trial_seed, verify_checks, write_csv,
    write_json, DebugSpec, ExperimentSpec, GraphSpec, PrivacySpec, Task, TrialRecord,
};
use lndp::linquery::{cdf_estimate, pmf_estimate};
use lndp::mechanisms::{NoiseMode, PrivacyParams};
use lndp::Error;

#[derive(Parser)]
#[command(name = "lndp", version, about = "Local node differential privacy on graphs")]
struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph and print it as an edge list.
    Gen(GenArgs),
    /// Private degree distribution (PMF or CDF) of one graph.
    Degdist(DegdistArgs),
    /// Private edge count.
    Edges(EstimateArgs),
    /// Private Erdős–Rényi edge probability.
    Er(EstimateArgs),
    /// Private clique size on a clique plus isolated nodes.
    Clique(EstimateArgs),
    /// Starpartite versus regular distinguisher.
    Distinguish(DistinguishArgs),
    /// Run the invariant and inequality suite.
    Verify,
    /// Run a TOML or JSON experiment spec.
    Experiment {
        spec: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Empty,
    Er,
    Regular,
    Starpartite,
    Clique,
    Bounded,
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Family::Er)]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Edge probability (er).
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Degree (regular).
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Star size (starpartite).
    #[arg(long, default_value_t = 3)]
    t: usize,
    /// Clique size (clique); defaults to n/2.
    #[arg(long)]
    k: Option<usize>,
    /// Degree cap (bounded).
    #[arg(long, default_value_t = 10)]
    max_degree: usize,
    /// Target density (bounded).
    #[arg(long, default_value_t = 1.0)]
    density: f64,
}

impl GenArgs {
    fn spec(&self) -> GraphSpec {
        let n = self.n;
        match self.family {
            Family::Empty => GraphSpec::Empty { n },
            Family::Er => GraphSpec::Er { n, p: self.p },
            Family::Regular => GraphSpec::Regular { n, d: self.d },
            Family::Starpartite => GraphSpec::Starpartite { n, t: self.t },
            Family::Clique => GraphSpec::Clique { n, k: self.k },
            Family::Bounded => GraphSpec::Bounded {
                n,
                max_degree: self.max_degree,
                density: self.density,
            },
        }
    }
}

#[derive(Args)]
struct PrivacyArgs {
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Skip the noise. Not private; for debugging only.
    #[arg(long)]
    noiseless: bool,
}

impl PrivacyArgs {
    fn params(&self) -> lndp::Result<PrivacyParams> {
        PrivacyParams::new(self.eps, self.delta)
    }

    fn mode(&self) -> NoiseMode {
        if self.noiseless {
            NoiseMode::Noiseless
        } else {
            NoiseMode::Private
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WorkloadKind {
    Pmf,
    Cdf,
}

#[derive(Args)]
struct DegdistArgs {
    /// Edge-list file; otherwise an ER graph with --n and --p is sampled.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, value_enum, default_value_t = WorkloadKind::Pmf)]
    workload: WorkloadKind,
    #[command(flatten)]
    privacy: PrivacyArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Edge-list file used in every trial instead of sampling.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    gen: OptGenArgs,
    /// Degree bound D for `edges`.
    #[arg(long)]
    degree_bound: Option<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    privacy: PrivacyArgs,
}

#[derive(Args, Clone)]
struct OptGenArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    max_degree: usize,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistFamily {
    Star,
    Regular,
}

#[derive(Args)]
struct DistinguishArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 0.4)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = DistFamily::Star)]
    family: DistFamily,
    /// Multiplies the per-entry noise. Any value other than 1 voids the
    /// privacy guarantee.
    #[arg(long, default_value_t = 1.0)]
    debug_noise_scale: f64,
}

enum CliError {
    Lib(Error),
    Io(String),
    Invariant(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    Ok(Graph::parse_edge_list(&read(path)?)?)
}

fn missing(flag: &str) -> CliError {
    CliError::Lib(Error::Spec {
        field: flag.into(),
        message: "required here".into(),
    })
}

fn records_out(cli: &Cli, records: &[TrialRecord], warnings: &[String], sweep: bool) -> String {
    match cli.format {
        Format::Csv => write_csv(records, sweep),
        Format::Json => write_json(records, warnings),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<(), CliError> {
    let g = args.spec().generate(cli.seed)?;
    emit(cli.out.as_deref(), &g.to_edge_list())
}

fn cmd_degdist(cli: &Cli, args: &DegdistArgs) -> Result<(), CliError> {
    let g = match (&args.graph, args.n) {
        (Some(path), _) => load_graph(path)?,
        (None, Some(n)) => GraphSpec::Er { n, p: args.p }.generate(cli.seed)?,
        (None, None) => return Err(missing("--n")),
    };
    let params = args.privacy.params()?;
    let mode = args.privacy.mode();
    let truth = compressed_blurry(&degree_pmf(&g), args.s)?;
    let (estimate, exact) = match args.workload {
        WorkloadKind::Pmf => (
            pmf_estimate(&g, params, args.s, cli.seed, mode)?,
            truth.probs().to_vec(),
        ),
        WorkloadKind::Cdf => {
            let mut acc = 0.0;
            let cdf = truth.probs().iter().map(|p| {
                acc += p;
                acc
            });
            (cdf_estimate(&g, params, args.s, cli.seed, mode)?, cdf.collect())
        }
    };
    let text = match cli.format {
        Format::Csv => {
            let mut out = String::from("index,degree_value,estimate,truth\n");
            for (j, (e, t)) in estimate.iter().zip(&exact).enumerate() {
                let _ = writeln!(out, "{j},{},{e},{t}", j * args.s);
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&json!({
            "s": args.s,
            "certified": mode.is_private(),
            "estimate": estimate,
            "truth": exact,
        }))
        .expect("plain values serialize"),
    };
    emit(cli.out.as_deref(), &text)
}

// Without --graph the estimator subcommands are ordinary experiments.
fn cmd_estimate(cli: &Cli, task: Task, args: &EstimateArgs) -> Result<(), CliError> {
    let (records, warnings) = match &args.graph {
        Some(path) => {
            let g = load_graph(path)?;
            (fixed_graph_trials(cli, task, args, &g)?, Vec::new())
        }
        None => {
            let spec = estimate_spec(cli, task, args)?;
            (run_experiment(&spec)?, experiment_warnings(&spec))
        }
    };
    warn_all(&warnings);
    emit(cli.out.as_deref(), &records_out(cli, &records, &warnings, false))
}

fn estimate_spec(cli: &Cli, task: Task, args: &EstimateArgs) -> Result<ExperimentSpec, CliError> {
    let g = &args.gen;
    let n = g.n.ok_or_else(|| missing("--n"))?;
    let family = g.family.unwrap_or(match task {
        Task::Clique => Family::Clique,
        Task::Edges => Family::Bounded,
        _ => Family::Er,
    });
    let graph = GenArgs {
        family,
        n,
        p: g.p,
        d: g.d,
        t: g.t,
        k: g.k,
        max_degree: g.max_degree,
        density: g.density,
    }
    .spec();
    Ok(ExperimentSpec {
        task,
        trials: args.trials,
        master_seed: cli.seed,
        s: None,
        degree_bound: args.degree_bound,
        output_path: None,
        graph,
        privacy: PrivacySpec {
            eps: args.privacy.eps,
            delta: args.privacy.delta,
        },
        sweep: None,
        debug: DebugSpec {
            noiseless: args.privacy.noiseless,
            noise_scale: 1.0,
        },
    })
}

// Truth on a loaded graph: the edge count, the edge density, or the
// largest degree plus one.
fn fixed_graph_trials(
    cli: &Cli,
    task: Task,
    args: &EstimateArgs,
    g: &Graph,
) -> Result<Vec<TrialRecord>, CliError> {
    let params = args.privacy.params()?;
    let mode = args.privacy.mode();
    let n = g.n() as f64;
    let truth = match task {
        Task::Edges => g.edge_count() as f64,
        Task::Er => g.edge_count() as f64 / (n * (n - 1.0) / 2.0),
        _ => (g.max_degree() + 1) as f64,
    };
    let bound = match task {
        Task::Edges => args.degree_bound.ok_or_else(|| missing("--degree-bound"))?,
        _ => 0,
    };
    (0..args.trials)
        .map(|trial| {
            let seed = trial_seed(cli.seed, trial);
            let start = std::time::Instant::now();
            let estimate = match task {
                Task::Edges => est_edges(g, bound, params, seed, mode)?,
                Task::Er => est_er_p(g, params, seed, mode)?,
                _ => est_clique(g, params, seed, mode)?,
            };
            Ok(TrialRecord {
                sweep_key: None,
                trial,
                seed,
                truth,
                estimate,
                abs_error: (estimate - truth).abs(),
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                certified: mode.is_private(),
            })
        })
        .collect()
}

fn cmd_distinguish(cli: &Cli, args: &DistinguishArgs) -> Result<(), CliError> {
    let params = DistinguisherParams::with_noise_scale(
        args.eps,
        args.delta,
        args.t,
        args.n,
        args.debug_noise_scale,
    )?;
    let certified = params.certified();
    let mut warnings = params.warnings.clone();
    if !certified {
        warnings.push(format!(
            "noise scaled by {}; the run is not certified at (eps, delta) = ({}, {})",
            args.debug_noise_scale, args.eps, args.delta
        ));
    }
    warn_all(&warnings);
    let spec = match args.family {
        DistFamily::Star => GraphSpec::Starpartite { n: args.n, t: args.t },
        DistFamily::Regular => GraphSpec::Regular { n: args.n, d: args.t },
    };
    let family = match args.family {
        DistFamily::Star => "star",
        DistFamily::Regular => "regular",
    };
    let mut rows = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let seed = trial_seed(cli.seed, trial);
        let g = spec.generate(seed)?;
        let out = distinguish(&g, &params, seed)?;
        let label = match out.label {
            Label::Starpartite => "star",
            Label::Regular => "regular",
        };
        rows.push((trial, label, label == family, out.fraction, out.tau));
    }
    let text = match cli.format {
        Format::Csv => {
            let mut s = String::from("trial,family,label,correct,fraction_Yj,tau\n");
            for (trial, label, correct, frac, tau) in &rows {
                let _ = writeln!(s, "{trial},{family},{label},{correct},{frac},{tau}");
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json!({
            "certified": certified,
            "eps": args.eps,
            "delta": args.delta,
            "noise_scale": args.debug_noise_scale,
            "warnings": warnings,
            "records": rows.iter().map(|(trial, label, correct, frac, tau)| json!({
                "trial": trial, "family": family, "label": label,
                "correct": correct, "fraction_Yj": frac, "tau": tau,
            })).collect::<Vec<_>>(),
        }))
        .expect("plain values serialize"),
    };
    emit(cli.out.as_deref(), &text)
}

fn cmd_verify(cli: &Cli) -> Result<(), CliError> {
    let checks = verify_checks(cli.seed);
    let text = match cli.format {
        Format::Csv => {
            let mut s = String::from("check,passed,detail\n");
            for c in &checks {
                let _ = writeln!(s, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&checks).expect("plain values serialize"),
    };
    emit(cli.out.as_deref(), &text)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_experiment(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let spec = parse_spec(&read(path)?)?;
    let warnings = experiment_warnings(&spec);
    warn_all(&warnings);
    let records = run_experiment(&spec)?;
    let out = cli
        .out
        .clone()
        .or_else(|| spec.output_path.as_ref().map(PathBuf::from));
    let text = records_out(cli, &records, &warnings, spec.sweep.is_some());
    emit(out.as_deref(), &text)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a),
        Command::Degdist(a) => cmd_degdist(cli, a),
        Command::Edges(a) => cmd_estimate(cli, Task::Edges, a),
        Command::Er(a) => cmd_estimate(cli, Task::Er, a),
        Command::Clique(a) => cmd_estimate(cli, Task::Clique, a),
        Command::Distinguish(a) => cmd_distinguish(cli, a),
        Command::Verify => cmd_verify(cli),
        Command::Experiment { spec } => cmd_experiment(cli, spec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Generation(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(3)
        }
    }
}
