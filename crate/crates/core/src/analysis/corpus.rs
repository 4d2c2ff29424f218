use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_contraction, AnalysisError, ContractionFit};
use crate::format::g12;
use crate::graph::{er_probability_for_mean_degree, generate, radius_for_mean_degree, Family, Graph, GraphSpec};
use crate::metrics::{graph_averages, MetricAverages};
use crate::rng::{derive_seed, rng_from};
use crate::sim::{init_states, run_async, Mode, SimConfig, ValueDistribution};
use crate::spectral::uniform_neighbor_probabilities;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub spec: GraphSpec,
    pub averages: MetricAverages,
    /// Mean contraction rate over `runs` realisations.
    pub gamma: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub runs_per_graph: usize,
    pub sample_interval: f64,
    /// Runs stop once disagreement has dropped by this many decades.
    pub stop_accuracy: f64,
    pub max_horizon: f64,
    /// Worker threads; `None` uses all processors.
    pub workers: Option<usize>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            runs_per_graph: 10,
            sample_interval: 0.25,
            stop_accuracy: 8.0,
            max_horizon: 1e5,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub entries: Vec<CorpusEntry>,
    /// `(spec index, reason)` for every spec that produced no entry.
    pub failures: Vec<(usize, String)>,
}

/// Runs `opts.runs_per_graph` asynchronous realisations on `g` with
/// standard-normal initial values and returns the per-run stationary fits.
pub fn measure_gamma(g: &Graph, opts: &CorpusOptions, seed: u64) -> Result<Vec<ContractionFit>, String> {
    let p = uniform_neighbor_probabilities(g).map_err(|e| e.to_string())?;
    let mut cfg = SimConfig::new(Mode::Async, opts.max_horizon, 0);
    cfg.sample_interval = opts.sample_interval;
    cfg.stop_at_accuracy = Some(opts.stop_accuracy);
    (0..opts.runs_per_graph as u64)
        .map(|run| {
            let run_seed = derive_seed(seed, run);
            let values = ValueDistribution::standard_normal()
                .sample(g.n(), derive_seed(run_seed, 0))
                .map_err(|e| e.to_string())?;
            let mut states = init_states(g, &values, &vec![1.0; g.n()]).map_err(|e| e.to_string())?;
            cfg.seed = derive_seed(run_seed, 1);
            let trace = run_async(g, &p, &mut states, &cfg).map_err(|e| e.to_string())?;
            fit_contraction(&trace).map_err(|e| e.to_string())
        })
        .collect()
}

fn corpus_entry(spec: &GraphSpec, opts: &CorpusOptions, seed: u64) -> Result<CorpusEntry, String> {
    let g = generate(spec).map_err(|e| e.to_string())?;
    let averages = graph_averages(&g);
    let fits = measure_gamma(&g, opts, seed)?;
    let gamma = fits.iter().map(|f| f.gamma).sum::<f64>() / fits.len() as f64;
    Ok(CorpusEntry {
        spec: *spec,
        averages,
        gamma,
        runs: fits.len(),
    })
}

/// Generates every graph, measures its mean contraction rate, and keeps the
/// results in spec order. Specs whose generation or measurement fails are
/// listed in the report instead. Output is independent of the worker count.
pub fn build_corpus(specs: &[GraphSpec], opts: &CorpusOptions, seed: u64) -> CorpusReport {
    let work = || -> Vec<Result<CorpusEntry, String>> {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| corpus_entry(spec, opts, derive_seed(seed, i as u64)))
            .collect()
    };
    let results = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map(|pool| pool.install(work))
            .unwrap_or_else(|_| work()),
        None => work(),
    };
    let mut report = CorpusReport {
        entries: Vec::new(),
        failures: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => report.entries.push(e),
            Err(msg) => report.failures.push((i, msg)),
        }
    }
    report
}

/// Relative family weights of the corpus (graph counts per family).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMix {
    pub erdos_renyi: f64,
    pub geometric: f64,
    pub small_world: f64,
    pub scale_free: f64,
}

impl Default for FamilyMix {
    /// 1600 : 1600 : 4400 : 4400.
    fn default() -> Self {
        Self {
            erdos_renyi: 1600.0,
            geometric: 1600.0,
            small_world: 4400.0,
            scale_free: 4400.0,
        }
    }
}

impl FamilyMix {
    /// Splits `count` graphs by weight; rounding remainders go to the last
    /// family.
    pub fn counts(&self, count: usize) -> [usize; 4] {
        let w = [self.erdos_renyi, self.geometric, self.small_world, self.scale_free];
        let total: f64 = w.iter().sum();
        let mut out = [0usize; 4];
        for i in 0..3 {
            out[i] = (count as f64 * w[i] / total).round() as usize;
        }
        out[3] = count.saturating_sub(out[..3].iter().sum());
        out
    }
}

/// Random corpus plan: `count` specs split by `mix`, sizes uniform in
/// `n_range`, mean degrees spread over sparse-to-moderate densities.
pub fn desk_specs(count: usize, n_range: (usize, usize), mix: &FamilyMix, seed: u64) -> Vec<GraphSpec> {
    let mut rng = rng_from(seed);
    let counts = mix.counts(count);
    let mut specs = Vec::with_capacity(count);
    for (family_idx, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let n = rng.random_range(n_range.0..=n_range.1);
            let family = match family_idx {
                0 => {
                    let k = rng.random_range(8.0..40.0);
                    Family::ErdosRenyi {
                        p: er_probability_for_mean_degree(n, k),
                    }
                }
                1 => {
                    let k = rng.random_range(10.0..40.0);
                    Family::GeometricRandom {
                        radius: radius_for_mean_degree(n, k),
                    }
                }
                2 => {
                    let k = 2 * rng.random_range(3..=15usize);
                    let rewire = 10f64.powf(rng.random_range(-2.0..-0.3));
                    Family::SmallWorld { k, rewire }
                }
                _ => Family::ScaleFreeClustered {
                    m: rng.random_range(3..=15usize),
                    triad: rng.random::<f64>(),
                },
            };
            specs.push(GraphSpec::new(n, family, rng.random()));
        }
    }
    specs
}

const CORPUS_HEADER: &str = "family,n,param,seed,mean_degree,mean_clustering,mean_efficiency,gamma,runs";

pub fn write_corpus_csv<W: Write>(entries: &[CorpusEntry], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CORPUS_HEADER}")?;
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.spec.family.short_name(),
            e.spec.n,
            e.spec.family.param_string(),
            e.spec.seed,
            g12(e.averages.mean_degree),
            g12(e.averages.mean_clustering),
            g12(e.averages.mean_efficiency),
            g12(e.gamma),
            e.runs
        )?;
    }
    Ok(())
}

fn parse_family(name: &str, param: &str) -> Option<Family> {
    let kv: Vec<(&str, &str)> = param.split(';').filter_map(|p| p.split_once('=')).collect();
    let get = |key: &str| kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    let f = |key: &str| get(key)?.parse::<f64>().ok();
    let u = |key: &str| get(key)?.parse::<usize>().ok();
    Some(match name {
        "er" => Family::ErdosRenyi { p: f("p")? },
        "grg" => Family::GeometricRandom { radius: f("r")? },
        "ws" => Family::SmallWorld {
            k: u("k")?,
            rewire: f("pr")?,
        },
        "sf" => Family::ScaleFreeClustered {
            m: u("m")?,
            triad: f("pt")?,
        },
        _ => return None,
    })
}

pub fn read_corpus_csv<R: BufRead>(input: R) -> Result<Vec<CorpusEntry>, AnalysisError> {
    let mut entries = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let err = |msg: &str| AnalysisError::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        if idx == 0 {
            if line.trim() != CORPUS_HEADER {
                return Err(err("unexpected header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(err("expected 9 columns"));
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| err("bad number"));
        let int = |i: usize| cols[i].parse::<u64>().map_err(|_| err("bad integer"));
        let family = parse_family(cols[0], cols[2]).ok_or_else(|| err("bad family or param"))?;
        entries.push(CorpusEntry {
            spec: GraphSpec::new(int(1)? as usize, family, int(3)?),
            averages: MetricAverages {
                mean_degree: num(4)?,
                mean_clustering: num(5)?,
                mean_efficiency: num(6)?,
            },
            gamma: num(7)?,
            runs: int(8)? as usize,
        });
    }
    Ok(entries)
}
