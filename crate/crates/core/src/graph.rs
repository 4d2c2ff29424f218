//! Undirected simple graphs, the four random families used for the training
//! corpus, and the two topology-change transformations (random rewiring and
//! independent link failure).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from, SimRng};

/// Number of fresh sub-seeds tried before a generator gives up.
pub const MAX_GENERATION_ATTEMPTS: u64 = 100;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("{family} generator produced no connected non-bipartite graph in {attempts} attempts")]
    GenerationFailed { family: &'static str, attempts: u64 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph on nodes `0..n`, stored as sorted adjacency lists.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n())
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl Graph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge list, rejecting loops, duplicates and
    /// out-of-range endpoints. Edge orientation is irrelevant.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut sets = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !sets[u].insert(v) {
                return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
            }
            sets[v].insert(u);
        }
        Ok(Self::from_sets(sets))
    }

    fn from_sets(sets: Vec<BTreeSet<usize>>) -> Self {
        Self {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    fn to_sets(&self) -> Vec<BTreeSet<usize>> {
        self.adjacency.iter().map(|a| a.iter().copied().collect()).collect()
    }

    pub fn complete(n: usize) -> Self {
        let sets = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self::from_sets(sets)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 nodes");
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("cycle edges are simple")
    }

    /// Star with node 0 at the center.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Self::from_edges(leaves + 1, &edges).expect("star edges are simple")
    }

    /// Ring where every node links to its `k / 2` nearest neighbours on each
    /// side. `k` must be even and smaller than `n`.
    pub fn ring_lattice(n: usize, k: usize) -> Result<Self, GraphError> {
        if k % 2 != 0 || k == 0 || k >= n {
            return Err(GraphError::InvalidSpec(format!(
                "ring lattice needs even 0 < k < n, got n = {n}, k = {k}"
            )));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in 1..=k / 2 {
                let w = (i + j) % n;
                sets[i].insert(w);
                sets[w].insert(i);
            }
        }
        Ok(Self::from_sets(sets))
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    /// Re-checks the structural invariants: symmetric, loop-free, sorted and
    /// duplicate-free adjacency.
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.n();
        for (i, adj) in self.adjacency.iter().enumerate() {
            for w in adj.windows(2) {
                if w[0] >= w[1] {
                    return Err(GraphError::DuplicateEdge(i.min(w[1]), i.max(w[1])));
                }
            }
            for &j in adj {
                if j >= n {
                    return Err(GraphError::NodeOutOfRange { node: j, n });
                }
                if j == i {
                    return Err(GraphError::SelfLoop(i));
                }
                if !self.has_edge(j, i) {
                    return Err(GraphError::InvalidSpec(format!("asymmetric edge {i}->{j}")));
                }
            }
        }
        Ok(())
    }

    /// Breadth-first hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes have a distance") + 1;
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Writes the edge-list format: `n <count>` then one `i j` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        writeln!(out, "n {}", self.n())?;
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self, GraphError> {
        let mut lines = input.lines().enumerate();
        let n = loop {
            let (idx, line) = lines.next().ok_or(GraphError::Parse {
                line: 1,
                msg: "missing `n <count>` header".into(),
            })?;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("n"), Some(count), None) => {
                    break count.parse::<usize>().map_err(|e| GraphError::Parse {
                        line: idx + 1,
                        msg: format!("bad node count: {e}"),
                    })?
                }
                _ => {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        msg: "expected `n <count>` header".into(),
                    })
                }
            }
        };
        if n == 0 {
            return Err(GraphError::Parse {
                line: 1,
                msg: "node count must be at least 1".into(),
            });
        }
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse = |tok: Option<&str>| -> Result<usize, GraphError> {
                tok.ok_or_else(|| GraphError::Parse {
                    line: idx + 1,
                    msg: "expected two node indices".into(),
                })?
                .parse::<usize>()
                .map_err(|e| GraphError::Parse {
                    line: idx + 1,
                    msg: e.to_string(),
                })
            };
            let mut parts = line.split_whitespace();
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(GraphError::Parse {
                    line: idx + 1,
                    msg: "trailing tokens".into(),
                });
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if i > j {
                return Err(GraphError::Parse {
                    line: idx + 1,
                    msg: format!("edge {i} {j} must be written with i < j"),
                });
            }
            edges.push((i, j));
        }
        Self::from_edges(n, &edges)
    }
}

pub fn is_connected(g: &Graph) -> bool {
    if g.n() == 0 {
        return true;
    }
    g.bfs_distances(0).iter().all(Option::is_some)
}

/// Two-colouring test over every component.
pub fn is_bipartite(g: &Graph) -> bool {
    let mut colour: Vec<Option<bool>> = vec![None; g.n()];
    let mut queue = VecDeque::new();
    for start in 0..g.n() {
        if colour[start].is_some() {
            continue;
        }
        colour[start] = Some(false);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let cu = colour[u].expect("queued nodes are coloured");
            for &w in g.neighbors(u) {
                match colour[w] {
                    None => {
                        colour[w] = Some(!cu);
                        queue.push_back(w);
                    }
                    Some(cw) if cw == cu => return false,
                    Some(_) => {}
                }
            }
        }
    }
    true
}

/// Random graph family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// G(n, p): every pair linked independently with probability `p`.
    ErdosRenyi { p: f64 },
    /// Uniform points in the unit square linked within Euclidean `radius`.
    GeometricRandom { radius: f64 },
    /// Watts–Strogatz: ring lattice of even degree `k`, each edge rewired
    /// with probability `rewire`.
    SmallWorld { k: usize, rewire: f64 },
    /// Holme–Kim growth: `m` preferential edges per new node, each followed
    /// by a triad-formation step with probability `triad`.
    ScaleFreeClustered { m: usize, triad: f64 },
}

impl Family {
    pub fn short_name(&self) -> &'static str {
        match self {
            Family::ErdosRenyi { .. } => "er",
            Family::GeometricRandom { .. } => "grg",
            Family::SmallWorld { .. } => "ws",
            Family::ScaleFreeClustered { .. } => "sf",
        }
    }

    /// Family parameters as a single comma-free token, e.g. `k=16;pr=0.1`.
    pub fn param_string(&self) -> String {
        use crate::format::g12;
        match *self {
            Family::ErdosRenyi { p } => format!("p={}", g12(p)),
            Family::GeometricRandom { radius } => format!("r={}", g12(radius)),
            Family::SmallWorld { k, rewire } => format!("k={k};pr={}", g12(rewire)),
            Family::ScaleFreeClustered { m, triad } => format!("m={m};pt={}", g12(triad)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(n: usize, family: Family, seed: u64) -> Self {
        Self { n, family, seed }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidSpec(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        let prob = |name: &str, v: f64| -> Result<(), GraphError> {
            if !(0.0..=1.0).contains(&v) {
                return Err(GraphError::InvalidSpec(format!("{name} must lie in [0, 1], got {v}")));
            }
            Ok(())
        };
        match self.family {
            Family::ErdosRenyi { p } => {
                prob("p", p)?;
                if p <= 0.0 {
                    return bad("edge probability must be positive".into());
                }
            }
            Family::GeometricRandom { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
            }
            Family::SmallWorld { k, rewire } => {
                prob("rewire probability", rewire)?;
                if k == 0 || k % 2 != 0 || k >= self.n {
                    return bad(format!("ring degree k must be even with 0 < k < n, got {k}"));
                }
            }
            Family::ScaleFreeClustered { m, triad } => {
                prob("triad probability", triad)?;
                if m == 0 || m + 1 >= self.n {
                    return bad(format!("attachment count m must satisfy 0 < m < n - 1, got {m}"));
                }
            }
        }
        Ok(())
    }
}

/// Draws a connected, non-bipartite graph from `spec`. Each attempt uses a
/// fresh sub-seed of `spec.seed`; after [`MAX_GENERATION_ATTEMPTS`] the
/// parameters are deemed too sparse.
pub fn generate(spec: &GraphSpec) -> Result<Graph, GraphError> {
    spec.validate()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = rng_from(derive_seed(spec.seed, attempt));
        let g = sample_family(spec.n, &spec.family, &mut rng);
        if is_connected(&g) && !is_bipartite(&g) {
            return Ok(g);
        }
    }
    Err(GraphError::GenerationFailed {
        family: spec.family.short_name(),
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

fn sample_family(n: usize, family: &Family, rng: &mut SimRng) -> Graph {
    match *family {
        Family::ErdosRenyi { p } => erdos_renyi(n, p, rng),
        Family::GeometricRandom { radius } => geometric(n, radius, rng),
        Family::SmallWorld { k, rewire } => {
            let ring = Graph::ring_lattice(n, k).expect("validated ring parameters");
            rewire_with(&ring, rewire, rng)
        }
        Family::ScaleFreeClustered { m, triad } => holme_kim(n, m, triad, rng),
    }
}

fn erdos_renyi(n: usize, p: f64, rng: &mut SimRng) -> Graph {
    let mut sets = vec![BTreeSet::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
    }
    Graph::from_sets(sets)
}

fn geometric(n: usize, radius: f64, rng: &mut SimRng) -> Graph {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let r2 = radius * radius;
    let mut sets = vec![BTreeSet::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let dx = pts[i].0 - pts[j].0;
            let dy = pts[i].1 - pts[j].1;
            if dx * dx + dy * dy <= r2 {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
    }
    Graph::from_sets(sets)
}

fn holme_kim(n: usize, m: usize, triad: f64, rng: &mut SimRng) -> Graph {
    // Seed core: clique on m + 1 nodes, so the first newcomer finds m targets.
    let core = m + 1;
    let mut sets = vec![BTreeSet::new(); n];
    let mut repeated = Vec::with_capacity(2 * n * m);
    for i in 0..core {
        for j in i + 1..core {
            sets[i].insert(j);
            sets[j].insert(i);
            repeated.push(i);
            repeated.push(j);
        }
    }
    for source in core..n {
        let mut added = 0;
        let mut last_pa: Option<usize> = None;
        while added < m {
            if let Some(anchor) = last_pa.filter(|_| rng.random::<f64>() < triad) {
                let candidates: Vec<usize> = sets[anchor]
                    .iter()
                    .copied()
                    .filter(|&w| w != source && !sets[source].contains(&w))
                    .collect();
                if !candidates.is_empty() {
                    let w = candidates[rng.random_range(0..candidates.len())];
                    sets[source].insert(w);
                    sets[w].insert(source);
                    repeated.push(w);
                    added += 1;
                    continue;
                }
            }
            let target = loop {
                let t = repeated[rng.random_range(0..repeated.len())];
                if !sets[source].contains(&t) {
                    break t;
                }
            };
            sets[source].insert(target);
            sets[target].insert(source);
            repeated.push(target);
            last_pa = Some(target);
            added += 1;
        }
        repeated.extend(std::iter::repeat_n(source, m));
    }
    Graph::from_sets(sets)
}

fn rewire_with(g: &Graph, p: f64, rng: &mut SimRng) -> Graph {
    let n = g.n();
    let mut sets = g.to_sets();
    for (u, v) in g.edges() {
        if rng.random::<f64>() >= p {
            continue;
        }
        if sets[u].len() >= n - 1 {
            continue;
        }
        let w = loop {
            let w = rng.random_range(0..n);
            if w != u && !sets[u].contains(&w) {
                break w;
            }
        };
        sets[u].remove(&v);
        sets[v].remove(&u);
        sets[u].insert(w);
        sets[w].insert(u);
    }
    Graph::from_sets(sets)
}

/// Watts–Strogatz rewiring of an arbitrary graph without the connectivity
/// check: each edge `(u, v)`, `u < v`, independently moves its `v` endpoint
/// with probability `p` to a uniform node that is neither `u` nor already a
/// neighbour of `u`. Edge count is preserved.
pub fn rewire_edges(g: &Graph, p: f64, seed: u64) -> Graph {
    rewire_with(g, p, &mut rng_from(seed))
}

/// [`rewire_edges`] followed by a connectivity check.
pub fn rewire_random(g: &Graph, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidSpec(format!(
            "rewire probability {p} outside [0, 1]"
        )));
    }
    let out = rewire_edges(g, p, seed);
    if is_connected(&out) {
        Ok(out)
    } else {
        Err(GraphError::Disconnected)
    }
}

/// Removes every edge independently with probability `f`. The result may be
/// disconnected; callers check with [`is_connected`].
pub fn fail_links(g: &Graph, f: f64, seed: u64) -> Graph {
    assert!((0.0..=1.0).contains(&f), "failure probability {f} outside [0, 1]");
    let mut rng = rng_from(seed);
    let kept: Vec<_> = g.edges().into_iter().filter(|_| rng.random::<f64>() >= f).collect();
    Graph::from_edges(g.n(), &kept).expect("subset of a simple graph is simple")
}

/// Probability that two uniform points in the unit square lie within
/// distance `r` (valid for `r <= 1`).
pub fn unit_square_link_probability(r: f64) -> f64 {
    let r = r.min(1.0);
    std::f64::consts::PI * r * r - 8.0 / 3.0 * r.powi(3) + 0.5 * r.powi(4)
}

/// Radius giving expected mean degree `k` for a geometric graph on `n`
/// nodes in the unit square, boundary effects included.
pub fn radius_for_mean_degree(n: usize, k: f64) -> f64 {
    let target = k / (n as f64 - 1.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if unit_square_link_probability(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Edge probability giving expected mean degree `k` in G(n, p).
pub fn er_probability_for_mean_degree(n: usize, k: f64) -> f64 {
    (k / (n as f64 - 1.0)).clamp(0.0, 1.0)
}
