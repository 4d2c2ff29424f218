//! Command-line front end.
//!
//! Every command accepts `--config <json>`; keys mirror the long flag names
//! (with underscores) and explicit flags win over the file.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    build_corpus, desk_specs, fit_contraction, fit_model, outlier_distance, predicted_sigma, tally, write_corpus_csv,
    ClassificationOutcome, CorpusOptions, FamilyMix, RateModel,
};
use crate::format::g12;
use crate::graph::{
    er_probability_for_mean_degree, generate, is_bipartite, is_connected, radius_for_mean_degree, Family, Graph,
    GraphSpec,
};
use crate::metrics::{all_node_metrics, averages_of, graph_averages, write_metrics_csv};
use crate::rng::derive_seed;
use crate::sim::{init_states, run, Mode, SimConfig, ValueDistribution, GAMMA_MIN};
use crate::spectral::uniform_neighbor_probabilities;

#[derive(Debug, Parser)]
#[command(
    name = "gossip-rate",
    version,
    about = "Distributed averaging simulator and convergence-rate predictor"
)]
pub struct Cli {
    /// RNG seed; required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (generate, metrics) or directory (other commands).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random graph and write it as an edge list.
    Generate(GenerateArgs),
    /// Per-node local metrics of a graph.
    Metrics(MetricsArgs),
    /// Run the averaging protocol and write the disagreement trace.
    Simulate(SimulateArgs),
    /// Build a corpus of graphs, measure their rates and fit the rate model.
    Fit(FitArgs),
    /// Run the protocol with in-network time prediction.
    Predict(PredictArgs),
    /// Alarm classification or outlier detection on a running protocol.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateArgs {
    /// er | grg | ws | sf
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    pub p: Option<f64>,
    /// Connection radius (grg).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Target mean degree; alternative to --p (er) or --radius (grg).
    #[arg(long)]
    pub mean_degree: Option<f64>,
    /// Ring degree (ws), even.
    #[arg(long)]
    pub k: Option<usize>,
    /// Rewiring probability (ws).
    #[arg(long)]
    pub pr: Option<f64>,
    /// Edges per new node (sf).
    #[arg(long)]
    pub m: Option<usize>,
    /// Triad-formation probability (sf).
    #[arg(long)]
    pub pt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// async | sync
    #[arg(long)]
    pub mode: Option<String>,
    /// Simulated time, in units of n interactions.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// normal:MEAN,STD | gamma:SHAPE,SCALE | list:V1,V2,...
    #[arg(long)]
    pub values: Option<String>,
    /// Accuracy requirement of every node, in decades.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Rate model JSON enabling live time predictions.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Stop once disagreement has dropped by this many decades.
    #[arg(long)]
    pub stop_accuracy: Option<f64>,
    /// Also write per-node snapshots.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub nodes: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    /// Corpus plan JSON.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Realisations per graph.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads (default: all processors).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub accuracy: Option<f64>,
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// alarm | outlier
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub values: Option<String>,
    /// Alarm threshold M.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Outlier distance in initial standard deviations.
    #[arg(long)]
    pub m: Option<f64>,
    /// Known standard deviation of the measurements (outlier mode).
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Contraction rate used for σ(t); estimated from the run when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Run until disagreement has dropped by this many decades.
    #[arg(long)]
    pub until_accuracy: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
}

/// Corpus plan: explicit specs, or a random desk-scale plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusPlan {
    pub specs: Option<Vec<GraphSpec>>,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub mix: FamilyMix,
    pub stop_accuracy: f64,
    pub sample_interval: f64,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        let opts = CorpusOptions::default();
        Self {
            specs: None,
            count: 300,
            n_min: 100,
            n_max: 300,
            mix: FamilyMix::default(),
            stop_accuracy: opts.stop_accuracy,
            sample_interval: opts.sample_interval,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
struct GlobalConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

struct Globals {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Globals {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("--seed is required for this command"))
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| anyhow!("--out is required for this command"))
    }
}

/// Overlays the flags that were given onto the config-file values.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: &Value) -> Result<T> {
    let mut merged = match config {
        Value::Object(m) => m.clone(),
        _ => serde_json::Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| anyhow!("--{flag} is required"))
}

pub fn main_with_args<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<()> {
    let config: Value = match &cli.config {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
            serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Value::Object(Default::default()),
    };
    let gc: GlobalConfig = serde_json::from_value(config.clone()).unwrap_or_default();
    let globals = Globals {
        seed: cli.seed.or(gc.seed),
        out: cli.out.clone().or(gc.out),
    };
    match &cli.command {
        Command::Generate(a) => cmd_generate(&resolve(a, &config)?, &globals),
        Command::Metrics(a) => cmd_metrics(&resolve(a, &config)?, &globals),
        Command::Simulate(a) => cmd_simulate(&resolve(a, &config)?, &globals),
        Command::Fit(a) => cmd_fit(&resolve(a, &config)?, &globals),
        Command::Predict(a) => cmd_predict(&resolve(a, &config)?, &globals),
        Command::Detect(a) => cmd_detect(&resolve(a, &config)?, &globals),
    }
}

fn read_graph(path: &Path) -> Result<Graph> {
    let f = File::open(path).with_context(|| format!("opening graph {}", path.display()))?;
    Graph::read_edge_list(BufReader::new(f)).with_context(|| format!("reading graph {}", path.display()))
}

fn read_model(path: &Path) -> Result<RateModel> {
    let f = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing model {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn out_dir(globals: &Globals) -> Result<PathBuf> {
    let dir = globals.out()?.to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Initial values from `normal:..`, `gamma:..` or an explicit `list:..`.
fn initial_values(spec: &str, n: usize, seed: u64) -> Result<Vec<f64>> {
    if let Some(list) = spec.strip_prefix("list:") {
        let vals: Vec<f64> = list
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow!("bad value list `{spec}`: {e}"))?;
        if vals.len() != n {
            bail!("value list has {} entries but the graph has {n} nodes", vals.len());
        }
        return Ok(vals);
    }
    Ok(ValueDistribution::parse(spec)?.sample(n, seed)?)
}

fn graph_spec(a: &GenerateArgs, seed: u64) -> Result<GraphSpec> {
    let n = required(&a.n, "n")?;
    let family = match required(&a.family, "family")?.as_str() {
        "er" => Family::ErdosRenyi {
            p: match (a.p, a.mean_degree) {
                (Some(p), _) => p,
                (None, Some(k)) => er_probability_for_mean_degree(n, k),
                _ => bail!("er needs --p or --mean-degree"),
            },
        },
        "grg" => Family::GeometricRandom {
            radius: match (a.radius, a.mean_degree) {
                (Some(r), _) => r,
                (None, Some(k)) => radius_for_mean_degree(n, k),
                _ => bail!("grg needs --radius or --mean-degree"),
            },
        },
        "ws" => Family::SmallWorld {
            k: required(&a.k, "k")?,
            rewire: required(&a.pr, "pr")?,
        },
        "sf" => Family::ScaleFreeClustered {
            m: required(&a.m, "m")?,
            triad: a.pt.unwrap_or(0.0),
        },
        other => bail!("unknown family `{other}` (expected er, grg, ws or sf)"),
    };
    Ok(GraphSpec::new(n, family, seed))
}

fn cmd_generate(a: &GenerateArgs, globals: &Globals) -> Result<()> {
    let spec = graph_spec(a, globals.seed()?)?;
    let out = globals.out()?;
    let g = generate(&spec)?;
    let mut w = create(out)?;
    g.write_edge_list(&mut w)?;
    w.flush()?;
    let avg = graph_averages(&g);
    println!("n={}", g.n());
    println!("edges={}", g.edge_count());
    println!("connected={}", is_connected(&g));
    println!("bipartite={}", is_bipartite(&g));
    println!("mean_degree={}", g12(avg.mean_degree));
    println!("mean_clustering={}", g12(avg.mean_clustering));
    println!("mean_efficiency={}", g12(avg.mean_efficiency));
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs, globals: &Globals) -> Result<()> {
    let g = read_graph(&required(&a.graph, "graph")?)?;
    let metrics = all_node_metrics(&g);
    let out = globals.out()?;
    let mut w = create(out)?;
    write_metrics_csv(&metrics, &mut w)?;
    w.flush()?;
    let avg = averages_of(&metrics);
    println!("mean_degree={}", g12(avg.mean_degree));
    println!("mean_clustering={}", g12(avg.mean_clustering));
    println!("mean_efficiency={}", g12(avg.mean_efficiency));
    Ok(())
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "async" => Ok(Mode::Async),
        "sync" => Ok(Mode::Sync),
        other => bail!("unknown mode `{other}` (expected async or sync)"),
    }
}

/// Refuses topologies on which averaging cannot converge.
fn check_topology(g: &Graph) -> Result<()> {
    if !is_connected(g) {
        bail!("graph is disconnected: averaging cannot reach a global consensus");
    }
    if is_bipartite(g) {
        bail!("graph is bipartite: the averaging conditions require a non-bipartite topology");
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, globals: &Globals) -> Result<()> {
    let seed = globals.seed()?;
    let g = read_graph(&required(&a.graph, "graph")?)?;
    check_topology(&g)?;
    let dir = out_dir(globals)?;
    let values = initial_values(a.values.as_deref().unwrap_or("normal:0,1"), g.n(), derive_seed(seed, 1))?;
    let accuracy = a.accuracy.unwrap_or(3.0);
    let mut states = init_states(&g, &values, &vec![accuracy; g.n()])?;
    let mut cfg = SimConfig::new(
        parse_mode(a.mode.as_deref().unwrap_or("async"))?,
        required(&a.horizon, "horizon")?,
        derive_seed(seed, 2),
    );
    if let Some(dt) = a.sample_interval {
        cfg.sample_interval = dt;
    }
    cfg.stop_at_accuracy = a.stop_accuracy;
    cfg.model = a.model.as_deref().map(read_model).transpose()?;
    cfg.record_nodes = a.nodes.unwrap_or(false) || cfg.model.is_some();
    let p = uniform_neighbor_probabilities(&g)?;
    let trace = run(&g, &p, &mut states, &cfg)?;

    let mut w = create(&dir.join("trace.csv"))?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    if cfg.record_nodes {
        let mut w = create(&dir.join("nodes.csv"))?;
        trace.write_snapshots_csv(&mut w)?;
        w.flush()?;
    }
    let gamma = fit_contraction(&trace)
        .map(|f| g12(f.gamma))
        .unwrap_or_else(|_| "n/a".into());
    let last = trace.samples.last().expect("trace has the t = 0 sample");
    println!(
        "samples={} events={} gamma={} final_delta_hat={} final_accuracy={}",
        trace.samples.len(),
        trace.events,
        gamma,
        g12(last.delta_hat),
        g12(trace.final_accuracy())
    );
    Ok(())
}

fn cmd_fit(a: &FitArgs, globals: &Globals) -> Result<()> {
    let seed = globals.seed()?;
    let plan_path = required(&a.plan, "plan")?;
    let plan: CorpusPlan = serde_json::from_reader(BufReader::new(
        File::open(&plan_path).with_context(|| format!("opening plan {}", plan_path.display()))?,
    ))
    .with_context(|| format!("parsing plan {}", plan_path.display()))?;
    let dir = out_dir(globals)?;
    let specs = match plan.specs {
        Some(s) => s,
        None => desk_specs(plan.count, (plan.n_min, plan.n_max), &plan.mix, derive_seed(seed, 0)),
    };
    let opts = CorpusOptions {
        runs_per_graph: a.runs.unwrap_or(10),
        sample_interval: plan.sample_interval,
        stop_accuracy: plan.stop_accuracy,
        workers: a.workers,
        ..CorpusOptions::default()
    };
    let report = build_corpus(&specs, &opts, derive_seed(seed, 1));
    for (i, reason) in &report.failures {
        eprintln!("spec {i} skipped: {reason}");
    }
    if report.entries.is_empty() {
        bail!("every corpus graph failed");
    }
    let mut w = create(&dir.join("corpus.csv"))?;
    write_corpus_csv(&report.entries, &mut w)?;
    w.flush()?;
    let model = fit_model(&report.entries)?;
    write_json(&dir.join("model.json"), &model)?;
    println!("corpus_size={} skipped={}", model.corpus_size, report.failures.len());
    println!(
        "a={} b={} c={} d={} r2={}",
        g12(model.a),
        g12(model.b),
        g12(model.c),
        g12(model.d),
        g12(model.r2)
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictionSummary {
    mean_degree: f64,
    mean_clustering: f64,
    mean_efficiency: f64,
    /// Model rate from the exact network averages.
    predicted_gamma: f64,
    predicted_time: f64,
    /// Time at which the required accuracy was observed, if reached.
    measured_time: Option<f64>,
    /// Spread of the node predictions at the last sample.
    final_prediction_min: Option<f64>,
    final_prediction_max: Option<f64>,
}

fn cmd_predict(a: &PredictArgs, globals: &Globals) -> Result<()> {
    let seed = globals.seed()?;
    let g = read_graph(&required(&a.graph, "graph")?)?;
    check_topology(&g)?;
    let model = read_model(&required(&a.model, "model")?)?;
    let dir = out_dir(globals)?;
    let accuracy = a.accuracy.unwrap_or(3.0);
    let values = initial_values(a.values.as_deref().unwrap_or("normal:0,1"), g.n(), derive_seed(seed, 1))?;
    let mut states = init_states(&g, &values, &vec![accuracy; g.n()])?;
    let mut cfg = SimConfig::new(Mode::Async, a.horizon.unwrap_or(1e5), derive_seed(seed, 2));
    cfg.sample_interval = a.sample_interval.unwrap_or(1.0);
    cfg.model = Some(model);
    cfg.record_nodes = true;
    if a.horizon.is_none() {
        cfg.stop_at_accuracy = Some(accuracy);
    }
    let p = uniform_neighbor_probabilities(&g)?;
    let trace = run(&g, &p, &mut states, &cfg)?;

    let mut w = create(&dir.join("predictions.csv"))?;
    trace.write_snapshots_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("trace.csv"))?;
    trace.write_csv(&mut w)?;
    w.flush()?;

    let avg = graph_averages(&g);
    let gamma = model.predict(avg.mean_degree, avg.mean_clustering, avg.mean_efficiency);
    let final_preds: Vec<f64> = states.iter().filter_map(|s| s.t_pred).collect();
    let summary = PredictionSummary {
        mean_degree: avg.mean_degree,
        mean_clustering: avg.mean_clustering,
        mean_efficiency: avg.mean_efficiency,
        predicted_gamma: gamma,
        predicted_time: accuracy / gamma.max(GAMMA_MIN),
        measured_time: trace.first_reaching(accuracy).map(|i| trace.samples[i].t),
        final_prediction_min: final_preds.iter().copied().reduce(f64::min),
        final_prediction_max: final_preds.iter().copied().reduce(f64::max),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "predicted_gamma={} predicted_time={} measured_time={}",
        g12(summary.predicted_gamma),
        g12(summary.predicted_time),
        summary.measured_time.map(g12).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct AccuracyMark {
    accuracy: f64,
    t: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DetectionReport {
    mode: String,
    alpha: f64,
    threshold: f64,
    sigma0: Option<f64>,
    gamma: Option<f64>,
    true_anomalies: usize,
    #[serde(flatten)]
    outcome: ClassificationOutcome,
    /// First sample time from which every later sample is error free.
    error_free_from: Option<f64>,
    accuracy_marks: Vec<AccuracyMark>,
}

/// Node decision from `(x0, x, t)`.
type Decision = dyn Fn(f64, f64, f64) -> bool;

fn cmd_detect(a: &DetectArgs, globals: &Globals) -> Result<()> {
    let seed = globals.seed()?;
    let g = read_graph(&required(&a.graph, "graph")?)?;
    check_topology(&g)?;
    let mode = required(&a.mode, "mode")?;
    let values_spec = a.values.clone().unwrap_or_else(|| "normal:0,1".into());
    let dir = out_dir(globals)?;
    let values = initial_values(&values_spec, g.n(), derive_seed(seed, 1))?;
    let mut states = init_states(&g, &values, &vec![1.0; g.n()])?;
    let until = a.until_accuracy.unwrap_or(3.0);
    let mut cfg = SimConfig::new(Mode::Async, a.horizon.unwrap_or(1e5), derive_seed(seed, 2));
    cfg.sample_interval = a.sample_interval.unwrap_or(0.25);
    cfg.record_nodes = true;
    cfg.stop_at_accuracy = Some(until);
    let p = uniform_neighbor_probabilities(&g)?;
    let trace = run(&g, &p, &mut states, &cfg)?;
    let snaps = trace.node_snapshots.as_ref().expect("snapshots recorded");

    // Decision rule per (x0, x, t); the ground-truth cut is `threshold`.
    let (threshold, sigma0, gamma, decide): (f64, Option<f64>, Option<f64>, Box<Decision>) = match mode.as_str() {
        "alarm" => {
            let m = required(&a.threshold, "threshold")?;
            if !(m > 0.0) {
                bail!("--threshold must be positive");
            }
            (
                m,
                None,
                None,
                Box::new(move |x0: f64, x: f64, _t: f64| (x0 - x).abs() > m),
            )
        }
        "outlier" => {
            let m = required(&a.m, "m")?;
            let sigma0 = match (a.sigma0, ValueDistribution::parse(&values_spec)) {
                (Some(s), _) => s,
                (None, Ok(ValueDistribution::Normal { std, .. })) => std,
                _ => bail!("--sigma0 is required unless values are normal"),
            };
            let gamma = match a.gamma {
                Some(gm) => gm,
                None => {
                    fit_contraction(&trace)
                        .context("estimating gamma from the run; pass --gamma or raise --until-accuracy")?
                        .gamma
                }
            };
            if !(m > 0.0 && sigma0 > 0.0 && gamma > 0.0) {
                bail!("--m, --sigma0 and gamma must be positive");
            }
            (
                m * sigma0,
                Some(sigma0),
                Some(gamma),
                Box::new(move |x0: f64, x: f64, t: f64| outlier_distance(x0, x, sigma0, gamma, t) > m * sigma0),
            )
        }
        other => bail!("unknown detect mode `{other}` (expected alarm or outlier)"),
    };

    let x0: Vec<f64> = states.iter().map(|s| s.x0).collect();
    let alpha = trace.alpha;
    let true_anomalies = x0.iter().filter(|v| (*v - alpha).abs() > threshold).count();
    let mut w = create(&dir.join("errors.csv"))?;
    write!(
        w,
        "t,accuracy,true_positive,false_positive,true_negative,false_negative,error_rate"
    )?;
    if gamma.is_some() {
        write!(w, ",sigma,sigma_pred")?;
    }
    writeln!(w)?;
    let mut outcomes = Vec::with_capacity(snaps.len());
    for (i, snap) in snaps.iter().enumerate() {
        let out = tally(
            x0.iter()
                .zip(&snap.x)
                .map(|(&m0, &x)| (decide(m0, x, snap.t), (m0 - alpha).abs() > threshold)),
        );
        write!(
            w,
            "{},{},{},{},{},{},{}",
            g12(snap.t),
            g12(trace.accuracy(i)),
            out.true_positive,
            out.false_positive,
            out.true_negative,
            out.false_negative,
            g12(out.error_rate)
        )?;
        if let (Some(s0), Some(gm)) = (sigma0, gamma) {
            write!(
                w,
                ",{},{}",
                g12(trace.samples[i].sigma),
                g12(predicted_sigma(s0, gm, snap.t))
            )?;
        }
        writeln!(w)?;
        outcomes.push(out);
    }
    w.flush()?;

    let error_free_from = outcomes
        .iter()
        .rposition(|o| o.error_rate > 0.0)
        .map_or(Some(0), |k| (k + 1 < outcomes.len()).then_some(k + 1))
        .map(|k| snaps[k].t);
    let accuracy_marks = [1.0, 2.0, 3.0]
        .into_iter()
        .map(|r| AccuracyMark {
            accuracy: r,
            t: trace.first_reaching(r).map(|i| trace.samples[i].t),
        })
        .collect();
    let report = DetectionReport {
        mode: mode.clone(),
        alpha,
        threshold,
        sigma0,
        gamma,
        true_anomalies,
        outcome: *outcomes.last().expect("at least one sample"),
        error_free_from,
        accuracy_marks,
    };
    write_json(&dir.join("report.json"), &report)?;
    println!(
        "mode={} true_anomalies={} final_error_rate={} error_free_from={}",
        report.mode,
        report.true_anomalies,
        g12(report.outcome.error_rate),
        report.error_free_from.map(g12).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}
