//! Declarative experiments: parse a spec, run seeded trials, emit records.
//!
//! ```toml
//! task = "er"
//! trials = 3
//! master_seed = 7
//!
//! [graph]
//! family = "er"
//! n = 400
//! p = 0.3
//!
//! [privacy]
//! eps = 1.0
//! delta = 1e-6
//! ```

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bhatt_dp_bound, bhattacharyya, l2_sensitivity_oracle, splicing_check, DiscretePmf,
};
use crate::blur::{blur_matrix, compressed_blurry};
use crate::distinguisher::{distinguish, gap_check, DistinguisherParams, Label};
use crate::error::{Error, Result};
use crate::estimators::{
    est_clique, est_edges, est_er_p, small_eps_warning, SoftThreshold,
};
use crate::graph::{
    degree_pmf, generate_bounded, generate_clique_plus_isolated, generate_er, generate_regular,
    generate_starpartite, Graph,
};
use crate::linquery::{cdf_estimate, fact_counting, pmf_estimate};
use crate::mechanisms::{gaussian_sigma, leaky_rr_pmf, NoiseMode, PrivacyParams};
use crate::rng::{derive, label};

/// CSV header of [`write_csv`] when no sweep is present.
pub const CSV_HEADER: &str = "trial,seed,truth,estimate,abs_error,wall_time_ms,certified";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Edges,
    Er,
    Clique,
    Pmf,
    Cdf,
    Distinguish,
    Verify,
}

/// A random graph family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSpec {
    Empty { n: usize },
    Er { n: usize, p: f64 },
    Regular { n: usize, d: usize },
    Starpartite { n: usize, t: usize },
    /// `k` defaults to `n/2`.
    Clique {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    Bounded {
        n: usize,
        max_degree: usize,
        density: f64,
    },
}

impl GraphSpec {
    pub fn n(&self) -> usize {
        match *self {
            GraphSpec::Empty { n }
            | GraphSpec::Er { n, .. }
            | GraphSpec::Regular { n, .. }
            | GraphSpec::Starpartite { n, .. }
            | GraphSpec::Clique { n, .. }
            | GraphSpec::Bounded { n, .. } => n,
        }
    }

    /// The same family with `n` replaced.
    pub fn with_n(&self, n: usize) -> GraphSpec {
        let mut g = self.clone();
        match &mut g {
            GraphSpec::Empty { n: m }
            | GraphSpec::Er { n: m, .. }
            | GraphSpec::Regular { n: m, .. }
            | GraphSpec::Starpartite { n: m, .. }
            | GraphSpec::Clique { n: m, .. }
            | GraphSpec::Bounded { n: m, .. } => *m = n,
        }
        g
    }

    /// Samples a graph.
    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Empty { n } => Ok(Graph::empty(n)),
            GraphSpec::Er { n, p } => generate_er(n, p, seed),
            GraphSpec::Regular { n, d } => generate_regular(n, d, seed),
            GraphSpec::Starpartite { n, t } => generate_starpartite(n, t, seed),
            GraphSpec::Clique { n, k } => generate_clique_plus_isolated(n, k.unwrap_or(n / 2), seed),
            GraphSpec::Bounded {
                n,
                max_degree,
                density,
            } => generate_bounded(n, max_degree, density, seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySpec {
    pub eps: f64,
    pub delta: f64,
}

/// Values of `n` to run the experiment at, one block each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub n: Vec<usize>,
}

/// Non-private switches. Any of them marks the records as not certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugSpec {
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "one")]
    pub noise_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DebugSpec {
    fn default() -> Self {
        DebugSpec {
            noiseless: false,
            noise_scale: 1.0,
        }
    }
}

fn is_default_debug(d: &DebugSpec) -> bool {
    *d == DebugSpec::default()
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub task: Task,
    pub trials: usize,
    pub master_seed: u64,
    /// Blur width for `pmf` and `cdf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Degree bound `D` for `edges`; defaults to the bounded family's bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    pub graph: GraphSpec,
    pub privacy: PrivacySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "is_default_debug")]
    pub debug: DebugSpec,
}

/// Encoding of a spec file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecFormat {
    Toml,
    Json,
}

fn spec_err(field: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        field: field.into(),
        message: message.into(),
    }
}

// Serde messages name the offending field in backticks.
fn field_from_message(msg: &str) -> String {
    let mut parts = msg.split('`');
    match (parts.next(), parts.next()) {
        (Some(_), Some(f)) if !f.is_empty() => f.to_string(),
        _ => "<spec>".into(),
    }
}

/// Parses a spec in the given encoding and checks it.
pub fn parse_spec_as(text: &str, format: SpecFormat) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = match format {
        SpecFormat::Toml => toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            spec_err(&field_from_message(&msg), msg)
        })?,
        SpecFormat::Json => serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            spec_err(&field_from_message(&msg), msg)
        })?,
    };
    validate_spec(&spec)?;
    Ok(spec)
}

/// Parses JSON if the text starts with `{`, TOML otherwise.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    if text.trim_start().starts_with('{') {
        parse_spec_as(text, SpecFormat::Json)
    } else {
        parse_spec_as(text, SpecFormat::Toml)
    }
}

/// Serializes a spec.
pub fn spec_to_string(spec: &ExperimentSpec, format: SpecFormat) -> Result<String> {
    match format {
        SpecFormat::Toml => toml::to_string(spec).map_err(|e| spec_err("<spec>", e.to_string())),
        SpecFormat::Json => {
            serde_json::to_string_pretty(spec).map_err(|e| spec_err("<spec>", e.to_string()))
        }
    }
}

/// Task-specific completeness and range checks.
pub fn validate_spec(spec: &ExperimentSpec) -> Result<()> {
    let PrivacySpec { eps, delta } = spec.privacy;
    PrivacyParams::new(eps, delta).map_err(|e| {
        let field = if !(eps > 0.0) || !eps.is_finite() { "privacy.eps" } else { "privacy.delta" };
        spec_err(field, e.to_string())
    })?;
    if spec.task != Task::Verify && !(delta > 0.0 && delta < 1.0) {
        return Err(spec_err("privacy.delta", "this task needs 0 < delta < 1"));
    }
    if spec.graph.n() == 0 {
        return Err(spec_err("graph.n", "n must be at least 1"));
    }
    if let Some(sweep) = &spec.sweep {
        if sweep.n.is_empty() || sweep.n.contains(&0) {
            return Err(spec_err("sweep.n", "sweep needs a nonempty list of positive n"));
        }
    }
    if !(spec.debug.noise_scale > 0.0) || !spec.debug.noise_scale.is_finite() {
        return Err(spec_err("debug.noise_scale", "noise scale must be positive"));
    }
    match spec.task {
        Task::Er if !matches!(spec.graph, GraphSpec::Er { .. }) => {
            Err(spec_err("graph.family", "task `er` needs family `er`"))
        }
        Task::Clique if !matches!(spec.graph, GraphSpec::Clique { .. }) => {
            Err(spec_err("graph.family", "task `clique` needs family `clique`"))
        }
        Task::Distinguish
            if !matches!(
                spec.graph,
                GraphSpec::Starpartite { .. } | GraphSpec::Regular { .. }
            ) =>
        {
            Err(spec_err(
                "graph.family",
                "task `distinguish` needs family `starpartite` or `regular`",
            ))
        }
        Task::Edges
            if spec.degree_bound.is_none() && !matches!(spec.graph, GraphSpec::Bounded { .. }) =>
        {
            Err(spec_err("degree_bound", "task `edges` needs a degree bound"))
        }
        Task::Pmf | Task::Cdf if spec.s.is_none() => {
            Err(spec_err("s", "tasks `pmf` and `cdf` need a blur width s"))
        }
        Task::Pmf | Task::Cdf if spec.s == Some(0) => Err(spec_err("s", "s must be at least 1")),
        _ => Ok(()),
    }
}

/// One row of harness output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_key: Option<String>,
    pub trial: usize,
    pub seed: u64,
    pub truth: f64,
    pub estimate: f64,
    pub abs_error: f64,
    pub wall_time_ms: f64,
    pub certified: bool,
}

/// Seed of trial `trial` under `master_seed`.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    derive(master_seed, &[label::TRIAL, trial as u64])
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn mode_of(spec: &ExperimentSpec) -> NoiseMode {
    if spec.debug.noiseless {
        NoiseMode::Noiseless
    } else {
        NoiseMode::Private
    }
}

fn graph_t(g: &GraphSpec) -> usize {
    match *g {
        GraphSpec::Starpartite { t, .. } => t,
        GraphSpec::Regular { d, .. } => d,
        _ => 0,
    }
}

// (truth, estimate, certified) for one trial.
fn run_trial(spec: &ExperimentSpec, graph: &GraphSpec, seed: u64) -> Result<(f64, f64, bool)> {
    let params = PrivacyParams::new(spec.privacy.eps, spec.privacy.delta)?;
    let mode = mode_of(spec);
    let private = mode.is_private() && spec.debug.noise_scale == 1.0;
    match spec.task {
        Task::Verify => {
            let checks = verify_checks(seed);
            let passed = checks.iter().filter(|c| c.passed).count();
            return Ok((checks.len() as f64, passed as f64, false));
        }
        Task::Distinguish => {
            let (n, t) = (graph.n(), graph_t(graph));
            let scale = if spec.debug.noiseless { f64::MIN_POSITIVE } else { spec.debug.noise_scale };
            let dp = DistinguisherParams::with_noise_scale(params.eps(), params.delta(), t, n, scale)?;
            let g = graph.generate(seed)?;
            let out = distinguish(&g, &dp, seed)?;
            let truth = matches!(graph, GraphSpec::Regular { .. }) as u8 as f64;
            let est = (out.label == Label::Regular) as u8 as f64;
            return Ok((truth, est, out.certified && private));
        }
        _ => {}
    }
    let g = graph.generate(seed)?;
    let (truth, estimate) = match (spec.task, graph) {
        (Task::Edges, _) => {
            let bound = match (spec.degree_bound, graph) {
                (Some(d), _) => d,
                (None, GraphSpec::Bounded { max_degree, .. }) => (*max_degree).max(1),
                _ => unreachable!("validated"),
            };
            (
                g.edge_count() as f64,
                est_edges(&g, bound, params, seed, mode)?,
            )
        }
        (Task::Er, GraphSpec::Er { p, .. }) => (*p, est_er_p(&g, params, seed, mode)?),
        (Task::Clique, GraphSpec::Clique { n, k }) => (
            k.unwrap_or(n / 2) as f64,
            est_clique(&g, params, seed, mode)?,
        ),
        (Task::Pmf, _) | (Task::Cdf, _) => {
            let s = spec.s.expect("validated");
            let truth = compressed_blurry(&degree_pmf(&g), s)?;
            let (est, exact) = if spec.task == Task::Pmf {
                (pmf_estimate(&g, params, s, seed, mode)?, truth.probs().to_vec())
            } else {
                let cdf: Vec<f64> = truth
                    .probs()
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect();
                (cdf_estimate(&g, params, s, seed, mode)?, cdf)
            };
            (0.0, linf(&est, &exact))
        }
        _ => unreachable!("validated"),
    };
    Ok((truth, estimate, private))
}

/// Warnings about parameter regimes, one per affected sweep block.
pub fn experiment_warnings(spec: &ExperimentSpec) -> Vec<String> {
    let mut out = Vec::new();
    let Ok(params) = PrivacyParams::new(spec.privacy.eps, spec.privacy.delta) else {
        return out;
    };
    for (key, graph) in blocks(spec) {
        let prefix = key.map(|k| format!("{k}: ")).unwrap_or_default();
        match spec.task {
            Task::Er | Task::Clique => {
                if let Some(w) = small_eps_warning(graph.n(), params) {
                    out.push(format!("{prefix}{w}"));
                }
            }
            Task::Distinguish => {
                if let Ok(dp) = DistinguisherParams::new(params.eps(), params.delta(), graph_t(&graph).max(1), graph.n()) {
                    out.extend(dp.warnings.into_iter().map(|w| format!("{prefix}{w}")));
                }
            }
            _ => {}
        }
        if spec.debug.noiseless || spec.debug.noise_scale != 1.0 {
            out.push(format!("{prefix}debug noise settings in effect; records are not certified"));
        }
    }
    out
}

fn blocks(spec: &ExperimentSpec) -> Vec<(Option<String>, GraphSpec)> {
    match &spec.sweep {
        None => vec![(None, spec.graph.clone())],
        Some(sweep) => sweep
            .n
            .iter()
            .map(|&n| (Some(format!("n={n}")), spec.graph.with_n(n)))
            .collect(),
    }
}

/// Runs every trial of every sweep block and returns records in order.
///
/// Trials run on up to `available_parallelism` threads; the records do not
/// depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    validate_spec(spec)?;
    let jobs: Vec<(Option<String>, GraphSpec, usize)> = blocks(spec)
        .into_iter()
        .flat_map(|(key, g)| (0..spec.trials).map(move |t| (key.clone(), g.clone(), t)))
        .collect();
    let results: Mutex<Vec<Option<Result<TrialRecord>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some((key, graph, trial)) = jobs.get(idx) else {
                    break;
                };
                let seed = trial_seed(spec.master_seed, *trial);
                let start = Instant::now();
                let rec = run_trial(spec, graph, seed).map(|(truth, estimate, certified)| {
                    TrialRecord {
                        sweep_key: key.clone(),
                        trial: *trial,
                        seed,
                        truth,
                        estimate,
                        abs_error: (estimate - truth).abs(),
                        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                        certified,
                    }
                });
                results.lock().expect("no worker panicked")[idx] = Some(rec);
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// CSV with [`CSV_HEADER`], or with a leading `sweep_key` column when
/// `with_sweep_key` is set.
pub fn write_csv(records: &[TrialRecord], with_sweep_key: bool) -> String {
    let mut out = String::new();
    if with_sweep_key {
        out.push_str("sweep_key,");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        if with_sweep_key {
            let _ = write!(out, "{},", r.sweep_key.as_deref().unwrap_or(""));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{}",
            r.trial, r.seed, r.truth, r.estimate, r.abs_error, r.wall_time_ms, r.certified
        );
    }
    out
}

/// JSON document with the records and any warnings.
pub fn write_json(records: &[TrialRecord], warnings: &[String]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "warnings": warnings,
        "records": records,
    }))
    .expect("records serialize")
}

/// One line of the verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

/// A fast sample of the invariants and inequalities the library relies
/// on. Random parts are driven by `seed`.
pub fn verify_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    let mut worst_mean = 0.0f64;
    let mut winf_ok = true;
    for k in 0..20u64 {
        let s_seed = derive(seed, &[label::SAMPLE, k]);
        let n = 20 + (s_seed % 80) as usize;
        let g = generate_er(n, 0.05 + (k as f64) * 0.04, s_seed).expect("valid parameters");
        let d = degree_pmf(&g);
        for s in [1, 2, 7] {
            let b = compressed_blurry(&d, s).expect("valid width");
            worst_mean = worst_mean.max((b.mean() - d.mean()).abs());
            winf_ok &= crate::blur::winf_distance(d.probs(), &b.uncompressed()) <= s as f64;
        }
    }
    out.push(check("blur_mean_preserved", worst_mean <= 1e-9, format!("max error {worst_mean:e}")));
    out.push(check("blur_winf_at_most_s", winf_ok, String::new()));

    let cols_ok = (1..=40).all(|n| {
        (1..=8).all(|s| {
            let a = blur_matrix(n, s).expect("valid");
            (0..n).all(|d| (a.column(d).iter().map(|c| c.1).sum::<f64>() - 1.0).abs() <= 1e-12)
        })
    });
    out.push(check("blur_columns_stochastic", cols_ok, String::new()));

    let st = SoftThreshold::new(0.0, 3.0).expect("valid");
    let sens = l2_sensitivity_oracle(
        |g| (0..g.n()).map(|i| st.value(g.degree(i) as f64)).collect(),
        5,
    )
    .expect("n = 5 is enumerable");
    let bound = (1.0f64 + 5.0 / 9.0).sqrt();
    out.push(check(
        "soft_threshold_sensitivity",
        sens <= bound + 1e-12,
        format!("{sens} ≤ {bound}"),
    ));

    let eps = 0.3 + (seed % 17) as f64 / 10.0;
    let delta = 0.01 * ((seed % 7) as f64 + 1.0);
    let params = PrivacyParams::new(eps, delta).expect("valid");
    let l0 = DiscretePmf::from_probs(&leaky_rr_pmf(false, eps, delta).expect("valid")).expect("pmf");
    let l1 = DiscretePmf::from_probs(&leaky_rr_pmf(true, eps, delta).expect("valid")).expect("pmf");
    let b = bhattacharyya(&l0, &l1).value();
    let bound = bhatt_dp_bound(params).expect("delta < 1");
    out.push(check(
        "leaky_rr_bhattacharyya_tight",
        (b - bound).abs() <= 1e-12,
        format!("{b} vs {bound}"),
    ));

    let gammas_ok = [1usize, 4, 64, 1025].iter().all(|&nu| {
        fact_counting(nu)
            .map(|f| f.gamma() <= (nu as f64).log2().ceil() + 1.0)
            .unwrap_or(false)
    });
    out.push(check("counting_factorization_gamma", gammas_ok, String::new()));

    let gap = gap_check(0.4, 0.05);
    out.push(check(
        "distinguisher_gap",
        gap.conditions_hold() && gap.gap_holds(),
        format!("gap {:e} vs bound {:e}", gap.gap, gap.gap_bound),
    ));

    let sigma = gaussian_sigma(2f64.sqrt(), PrivacyParams::new(0.05, 1e-4).expect("valid"))
        .expect("delta > 0");
    let splice = splicing_check(60, 2, sigma, 50, seed);
    out.push(match splice {
        Ok(r) => check(
            "splicing_inequality",
            r.holds(),
            format!("{} ≤ {}", r.left_mean, r.right_mean),
        ),
        Err(e) => check("splicing_inequality", false, e.to_string()),
    });
    out
}
