//! Averaging state machines.
//!
//! The asynchronous engine runs randomized pairwise gossip: every node owns a
//! rate-1 Poisson clock, which is simulated as a single rate-`n` clock whose
//! ticks pick a uniform activator. The activator chooses a neighbour from its
//! row of the probability matrix and both replace their values by the pair
//! average. The synchronous engine iterates the expected weight matrix.
//!
//! Each node carries four averaged fields: its measured value and running
//! estimates of the mean degree, mean clustering and mean local efficiency.
//! All four ride on the same interactions, so nodes learn the network-wide
//! metric averages in-protocol and can turn them into a time prediction.
//!
//! Time is measured in units of `n` interactions (one per node on average),
//! for both engines.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::RateModel;
use crate::format::g12;
use crate::graph::{is_connected, Graph};
use crate::metrics::all_node_metrics;
use crate::rng::rng_from;
use crate::spectral::{expected_weight_matrix, ExpectedWeightMatrix, ProbabilityMatrix};

/// Lower clamp for a predicted contraction rate.
pub const GAMMA_MIN: f64 = 1e-6;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;
const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("accuracy requirement of node {node} must be positive and finite, got {value}")]
    InvalidAccuracy { node: usize, value: f64 },
    #[error("initial value of node {0} is not finite")]
    NonFiniteValue(usize),
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("averaging conditions fail: {0}")]
    ConditionFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    /// Measured value `x_i(0)`.
    pub x0: f64,
    /// Current estimate of the network average.
    pub x: f64,
    pub m_deg: f64,
    pub m_cl: f64,
    pub m_eff: f64,
    /// Required accuracy, in decades of disagreement reduction.
    pub r: f64,
    pub t_pred: Option<f64>,
}

impl NodeState {
    fn fields(&self) -> [f64; 4] {
        [self.x, self.m_deg, self.m_cl, self.m_eff]
    }

    fn set_fields(&mut self, f: [f64; 4]) {
        [self.x, self.m_deg, self.m_cl, self.m_eff] = f;
    }
}

/// Seeds one state per node with its measured value, its own local metrics
/// as the starting metric estimates, and its accuracy requirement.
pub fn init_states(g: &Graph, values: &[f64], accuracies: &[f64]) -> Result<Vec<NodeState>, SimError> {
    let n = g.n();
    for len in [values.len(), accuracies.len()] {
        if len != n {
            return Err(SimError::LengthMismatch { expected: n, got: len });
        }
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteValue(i));
    }
    if let Some((node, &value)) = accuracies
        .iter()
        .enumerate()
        .find(|(_, r)| !(r.is_finite() && **r > 0.0))
    {
        return Err(SimError::InvalidAccuracy { node, value });
    }
    Ok(all_node_metrics(g)
        .into_iter()
        .zip(values.iter().zip(accuracies))
        .map(|(m, (&x, &r))| NodeState {
            x0: x,
            x,
            m_deg: m.degree as f64,
            m_cl: m.clustering,
            m_eff: m.efficiency,
            r,
            t_pred: None,
        })
        .collect())
}

#[inline]
fn average_pair(states: &mut [NodeState], i: usize, j: usize) {
    let (a, b) = (states[i].fields(), states[j].fields());
    let mid = [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
        0.5 * (a[3] + b[3]),
    ];
    states[i].set_fields(mid);
    states[j].set_fields(mid);
}

/// One gossip interaction: nodes `i` and `j` both take the pair average of
/// their value and of each metric estimate.
pub fn gossip_interact(g: &Graph, states: &mut [NodeState], i: usize, j: usize) -> Result<(), SimError> {
    if i == j || i >= g.n() || j >= g.n() || !g.has_edge(i, j) {
        return Err(SimError::NotAdjacent(i, j));
    }
    average_pair(states, i, j);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Async,
    Sync,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    /// Simulated time in units of `n` interactions.
    pub horizon: f64,
    pub seed: u64,
    pub sample_interval: f64,
    /// When present, every node refreshes its time prediction at each sample.
    pub model: Option<RateModel>,
    /// Keep per-node values and predictions at every sample.
    pub record_nodes: bool,
    /// End the run at the first sample whose accuracy reaches this many
    /// decades.
    pub stop_at_accuracy: Option<f64>,
}

impl SimConfig {
    pub fn new(mode: Mode, horizon: f64, seed: u64) -> Self {
        Self {
            mode,
            horizon,
            seed,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            model: None,
            record_nodes: false,
            stop_at_accuracy: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} must be finite and non-negative",
                self.horizon
            )));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "sample interval {} must be positive",
                self.sample_interval
            )));
        }
        if let Some(r) = self.stop_at_accuracy {
            if !(r > 0.0) {
                return Err(SimError::InvalidConfig(format!("stop accuracy {r} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// `‖δ(t)‖ / ‖δ(0)‖`, or 0 when the run starts at consensus.
    pub delta_hat: f64,
    /// `‖δ(t)‖ / √n`.
    pub sigma: f64,
    /// Means of value, degree, clustering and efficiency estimates.
    pub field_means: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub t_pred: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<Sample>,
    pub node_snapshots: Option<Vec<NodeSnapshot>>,
    /// True average of the measured values.
    pub alpha: f64,
    pub n: usize,
    /// `‖x(0)‖`.
    pub x0_norm: f64,
    /// `‖δ(0)‖`.
    pub delta0_norm: f64,
    /// Field means at `t = 0`, in [`Sample::field_means`] order.
    pub initial_means: [f64; 4],
    /// Interactions (async) or matrix steps (sync) performed.
    pub events: u64,
}

impl Trace {
    pub fn delta_norm(&self, i: usize) -> f64 {
        self.samples[i].sigma * (self.n as f64).sqrt()
    }

    /// Disagreement normalised by `‖x(0)‖` instead of `‖δ(0)‖`.
    pub fn delta_hat_by_x0(&self, i: usize) -> f64 {
        if self.x0_norm == 0.0 {
            0.0
        } else {
            self.delta_norm(i) / self.x0_norm
        }
    }

    /// Decades of disagreement reduction at sample `i`.
    pub fn accuracy(&self, i: usize) -> f64 {
        accuracy_of(self.samples[i].delta_hat)
    }

    /// First sample index whose accuracy reaches `r` decades.
    pub fn first_reaching(&self, r: f64) -> Option<usize> {
        (0..self.samples.len()).find(|&i| self.accuracy(i) >= r)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| accuracy_of(s.delta_hat))
    }

    /// Trace CSV: `t,delta_hat,sigma`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,delta_hat,sigma")?;
        for s in &self.samples {
            writeln!(out, "{},{},{}", g12(s.t), g12(s.delta_hat), g12(s.sigma))?;
        }
        Ok(())
    }

    /// Per-node snapshot CSV: `t,node,x,t_pred` (empty `t_pred` when absent).
    pub fn write_snapshots_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,node,x,t_pred")?;
        for snap in self.node_snapshots.iter().flatten() {
            for (i, (x, tp)) in snap.x.iter().zip(&snap.t_pred).enumerate() {
                let tp = tp.map(g12).unwrap_or_default();
                writeln!(out, "{},{i},{},{tp}", g12(snap.t), g12(*x))?;
            }
        }
        Ok(())
    }
}

fn accuracy_of(delta_hat: f64) -> f64 {
    if delta_hat <= 0.0 {
        f64::INFINITY
    } else {
        -delta_hat.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Predicted time to reach the node's accuracy requirement.
    pub time: f64,
    /// Contraction rate after clamping.
    pub gamma: f64,
    /// The raw model output fell below [`GAMMA_MIN`].
    pub clamped: bool,
}

/// Node-local time-to-accuracy prediction from the node's current metric
/// estimates: `r / max(γ_model, GAMMA_MIN)`.
pub fn predict_time(state: &NodeState, model: &RateModel) -> Prediction {
    let raw = model.predict(state.m_deg, state.m_cl, state.m_eff);
    let clamped = !(raw >= GAMMA_MIN);
    let gamma = if clamped { GAMMA_MIN } else { raw };
    Prediction {
        time: state.r / gamma,
        gamma,
        clamped,
    }
}

/// Records samples and handles the stop rule; shared by both engines.
struct Recorder<'a> {
    cfg: &'a SimConfig,
    alpha: f64,
    delta0: f64,
    initial_means: [f64; 4],
    samples: Vec<Sample>,
    snapshots: Option<Vec<NodeSnapshot>>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a SimConfig, states: &[NodeState]) -> Self {
        let n = states.len() as f64;
        let mut initial_means = [0.0; 4];
        for s in states {
            for (m, f) in initial_means.iter_mut().zip(s.fields()) {
                *m += f;
            }
        }
        initial_means.iter_mut().for_each(|m| *m /= n);
        let alpha = states.iter().map(|s| s.x0).sum::<f64>() / n;
        let delta0 = states.iter().map(|s| (s.x0 - alpha).powi(2)).sum::<f64>().sqrt();
        Self {
            cfg,
            alpha,
            delta0,
            initial_means,
            samples: Vec::new(),
            snapshots: cfg.record_nodes.then(Vec::new),
        }
    }

    /// Returns true when the run should stop.
    fn record(&mut self, t: f64, states: &mut [NodeState]) -> bool {
        let n = states.len() as f64;
        let mut sq = 0.0;
        let mut means = [0.0; 4];
        for s in states.iter() {
            sq += (s.x - self.alpha).powi(2);
            for (m, f) in means.iter_mut().zip(s.fields()) {
                *m += f;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let norm = sq.sqrt();
        let delta_hat = if self.delta0 > 0.0 { norm / self.delta0 } else { 0.0 };
        self.samples.push(Sample {
            t,
            delta_hat,
            sigma: norm / n.sqrt(),
            field_means: means,
        });
        if let Some(model) = &self.cfg.model {
            for s in states.iter_mut() {
                s.t_pred = Some(predict_time(s, model).time);
            }
        }
        if let Some(snaps) = &mut self.snapshots {
            snaps.push(NodeSnapshot {
                t,
                x: states.iter().map(|s| s.x).collect(),
                t_pred: states.iter().map(|s| s.t_pred).collect(),
            });
        }
        self.cfg.stop_at_accuracy.is_some_and(|r| accuracy_of(delta_hat) >= r)
    }

    fn finish(self, states: &[NodeState], events: u64) -> Trace {
        let x0_norm = states.iter().map(|s| s.x0 * s.x0).sum::<f64>().sqrt();
        Trace {
            samples: self.samples,
            node_snapshots: self.snapshots,
            alpha: self.alpha,
            n: states.len(),
            x0_norm,
            delta0_norm: self.delta0,
            initial_means: self.initial_means,
            events,
        }
    }
}

/// Sample times `k · interval` up to the horizon, tolerant to rounding.
fn sample_time(k: u64, cfg: &SimConfig) -> Option<f64> {
    let t = k as f64 * cfg.sample_interval;
    (t <= cfg.horizon * (1.0 + 1e-12) + 1e-12).then_some(t)
}

fn check_averaging_conditions(g: &Graph, w: &ExpectedWeightMatrix) -> Result<(), SimError> {
    if w.n() != g.n() {
        return Err(SimError::ConditionFailure(format!(
            "weight matrix size {} does not match graph size {}",
            w.n(),
            g.n()
        )));
    }
    let m = w.matrix();
    let worst = |s: Vec<f64>| s.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let (row, col) = (worst(m.row_sums()), worst(m.col_sums()));
    if row > STOCHASTIC_TOL || col > STOCHASTIC_TOL {
        return Err(SimError::ConditionFailure(format!(
            "weight matrix not doubly stochastic (row error {row:e}, column error {col:e})"
        )));
    }
    if (0..m.n()).any(|i| m.row(i).iter().any(|&v| v < 0.0)) {
        return Err(SimError::ConditionFailure("negative weight".into()));
    }
    // With a positive diagonal, ρ(W − 11ᵀ/n) < 1 holds exactly when the
    // graph is connected.
    if (0..m.n()).any(|i| m[(i, i)] <= 0.0) {
        return Err(SimError::ConditionFailure("zero self-weight".into()));
    }
    if !is_connected(g) {
        return Err(SimError::ConditionFailure(
            "graph is disconnected, so 1 is not a simple eigenvalue".into(),
        ));
    }
    Ok(())
}

fn check_states(g: &Graph, states: &[NodeState]) -> Result<(), SimError> {
    if states.len() != g.n() {
        return Err(SimError::LengthMismatch {
            expected: g.n(),
            got: states.len(),
        });
    }
    Ok(())
}

/// Per-node cumulative neighbour-selection tables.
struct NeighborSampler {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    cumulative: Vec<f64>,
}

impl NeighborSampler {
    fn new(g: &Graph, p: &ProbabilityMatrix) -> Self {
        let pm = p.matrix();
        let mut offsets = Vec::with_capacity(g.n() + 1);
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        offsets.push(0);
        for i in 0..g.n() {
            let mut acc = 0.0;
            for &j in g.neighbors(i) {
                let pij = pm[(i, j)];
                if pij > 0.0 {
                    acc += pij;
                    targets.push(j);
                    cumulative.push(acc);
                }
            }
            offsets.push(targets.len());
        }
        Self {
            offsets,
            targets,
            cumulative,
        }
    }

    #[inline]
    fn pick<R: Rng>(&self, i: usize, rng: &mut R) -> usize {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        let cum = &self.cumulative[lo..hi];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[lo + k]
    }
}

/// Asynchronous randomized gossip until `cfg.horizon` (or the stop
/// accuracy). Deterministic in `cfg.seed`.
pub fn run_async(
    g: &Graph,
    p: &ProbabilityMatrix,
    states: &mut [NodeState],
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    if cfg.mode != Mode::Async {
        return Err(SimError::InvalidConfig("run_async needs Mode::Async".into()));
    }
    cfg.validate()?;
    check_states(g, states)?;
    if p.n() != g.n() {
        return Err(SimError::ConditionFailure("probability matrix size mismatch".into()));
    }
    check_averaging_conditions(g, &expected_weight_matrix(p))?;

    let n = g.n();
    let sampler = NeighborSampler::new(g, p);
    let mut rng = rng_from(cfg.seed);
    let clock = Exp::new(n as f64).expect("positive rate");
    let mut rec = Recorder::new(cfg, states);
    let mut events = 0u64;
    let mut k = 0u64;
    let mut t = 0.0;

    loop {
        let next_event = t + clock.sample(&mut rng);
        while let Some(s) = sample_time(k, cfg) {
            if s >= next_event {
                break;
            }
            k += 1;
            if rec.record(s, states) {
                return Ok(rec.finish(states, events));
            }
        }
        if sample_time(k, cfg).is_none() {
            break;
        }
        t = next_event;
        let i = rng.random_range(0..n);
        let j = sampler.pick(i, &mut rng);
        average_pair(states, i, j);
        events += 1;
    }
    Ok(rec.finish(states, events))
}

/// Sparse rows of a weight matrix (nonzeros only).
struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_dense(w: &ExpectedWeightMatrix) -> Self {
        let m = w.matrix();
        let mut offsets = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for i in 0..m.n() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self { offsets, cols, vals }
    }

    fn apply(&self, input: &[[f64; 4]], out: &mut [[f64; 4]]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = [0.0; 4];
            for idx in self.offsets[i]..self.offsets[i + 1] {
                let (w, v) = (self.vals[idx], &input[self.cols[idx]]);
                for f in 0..4 {
                    acc[f] += w * v[f];
                }
            }
            *o = acc;
        }
    }
}

/// Synchronous iteration `x(k) = W̄ x(k−1)` applied to the value and all
/// metric estimates. One step is one expected interaction, so `n` steps
/// span one time unit and the trace shares the asynchronous time axis.
pub fn run_sync(
    g: &Graph,
    w: &ExpectedWeightMatrix,
    states: &mut [NodeState],
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    if cfg.mode != Mode::Sync {
        return Err(SimError::InvalidConfig("run_sync needs Mode::Sync".into()));
    }
    cfg.validate()?;
    check_states(g, states)?;
    check_averaging_conditions(g, w)?;

    let n = g.n() as f64;
    let rows = SparseRows::from_dense(w);
    let mut cur: Vec<[f64; 4]> = states.iter().map(NodeState::fields).collect();
    let mut next = cur.clone();
    let mut rec = Recorder::new(cfg, states);
    let mut steps = 0u64;
    let mut last_recorded: Option<u64> = None;
    let mut k = 0u64;

    while let Some(s) = sample_time(k, cfg) {
        k += 1;
        let target = (s * n).round() as u64;
        if last_recorded == Some(target) {
            continue;
        }
        while steps < target {
            rows.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            steps += 1;
        }
        for (st, f) in states.iter_mut().zip(&cur) {
            st.set_fields(*f);
        }
        last_recorded = Some(target);
        if rec.record(steps as f64 / n, states) {
            break;
        }
    }
    Ok(rec.finish(states, steps))
}

/// Dispatches on `cfg.mode`.
pub fn run(g: &Graph, p: &ProbabilityMatrix, states: &mut [NodeState], cfg: &SimConfig) -> Result<Trace, SimError> {
    match cfg.mode {
        Mode::Async => run_async(g, p, states, cfg),
        Mode::Sync => run_sync(g, &expected_weight_matrix(p), states, cfg),
    }
}

/// Distributions for initial measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    Normal { mean: f64, std: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl ValueDistribution {
    pub fn standard_normal() -> Self {
        ValueDistribution::Normal { mean: 0.0, std: 1.0 }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>, SimError> {
        let mut rng = rng_from(seed);
        let bad = |e: String| SimError::InvalidConfig(e);
        Ok(match *self {
            ValueDistribution::Normal { mean, std } => {
                let d = Normal::new(mean, std).map_err(|e| bad(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            ValueDistribution::Gamma { shape, scale } => {
                let d = Gamma::new(shape, scale).map_err(|e| bad(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
        })
    }

    /// Parses `normal:MEAN,STD` or `gamma:SHAPE,SCALE`.
    pub fn parse(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::InvalidConfig(format!("cannot parse distribution `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("normal", &[mean, std]) if std > 0.0 => Ok(Self::Normal { mean, std }),
            ("gamma", &[shape, scale]) if shape > 0.0 && scale > 0.0 => Ok(Self::Gamma { shape, scale }),
            _ => Err(bad()),
        }
    }
}
