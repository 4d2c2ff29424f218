//! Dense matrices of the pairwise gossip scheme: neighbour-selection
//! probabilities, the expected per-interaction weight matrix and its
//! Laplacian, plus numerical checks of the three averaging conditions.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::rng::rng_from;

pub const POWER_ITERATION_CAP: usize = 100_000;
pub const POWER_ITERATION_TOL: f64 = 1e-10;
const POWER_ITERATION_SEED: u64 = 0x5eed_0f_f00d;
/// Smallest spectral gap distinguishable from zero given the stopping rule.
pub const GAP_RESOLUTION: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("node {0} has no neighbours")]
    IsolatedNode(usize),
    #[error("probability matrix invalid: {0}")]
    InvalidProbabilities(String),
    #[error("matrix is not square or has size 0")]
    NotSquare,
    #[error("power iteration did not converge in {iterations} iterations (best estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(SpectralError::NotSquare);
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.n)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for row in self.data.chunks_exact(self.n) {
            for (acc, v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.n).map(<[f64]>::to_vec).collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Neighbour-selection probabilities `p_ij`: row-stochastic, supported on
/// the graph's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(DenseMatrix);

impl ProbabilityMatrix {
    /// Wraps `m` after checking it against `g`.
    pub fn new(g: &Graph, m: DenseMatrix) -> Result<Self, SpectralError> {
        let bad = |msg: String| Err(SpectralError::InvalidProbabilities(msg));
        if m.n() != g.n() {
            return bad(format!("size {} does not match graph size {}", m.n(), g.n()));
        }
        for i in 0..m.n() {
            for j in 0..m.n() {
                let p = m[(i, j)];
                if !(p >= 0.0 && p.is_finite()) {
                    return bad(format!("p[{i}][{j}] = {p}"));
                }
                if p > 0.0 && !g.has_edge(i, j) {
                    return bad(format!("p[{i}][{j}] > 0 on a non-edge"));
                }
            }
            let s: f64 = m.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return bad(format!("row {i} sums to {s}"));
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }
}

/// `p_ij = 1 / |Ω_i|` for every neighbour `j` of `i`.
pub fn uniform_neighbor_probabilities(g: &Graph) -> Result<ProbabilityMatrix, SpectralError> {
    let mut m = DenseMatrix::zeros(g.n());
    for i in 0..g.n() {
        let k = g.degree(i);
        if k == 0 {
            return Err(SpectralError::IsolatedNode(i));
        }
        for &j in g.neighbors(i) {
            m[(i, j)] = 1.0 / k as f64;
        }
    }
    Ok(ProbabilityMatrix(m))
}

/// Expected per-interaction weight matrix `I − D/2n + (P + Pᵀ)/2n` with
/// `D_i = Σ_j (p_ij + p_ji)`. Symmetric and doubly stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedWeightMatrix(DenseMatrix);

impl ExpectedWeightMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }
}

fn pair_rates(p: &ProbabilityMatrix) -> (DenseMatrix, Vec<f64>) {
    let n = p.n();
    let pm = p.matrix();
    let two_n = 2.0 * n as f64;
    let mut sym = DenseMatrix::zeros(n);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let s = pm[(i, j)] + pm[(j, i)];
            sym[(i, j)] = s / two_n;
            diag[i] += s;
        }
    }
    for d in &mut diag {
        *d /= two_n;
    }
    (sym, diag)
}

pub fn expected_weight_matrix(p: &ProbabilityMatrix) -> ExpectedWeightMatrix {
    let (sym, diag) = pair_rates(p);
    let mut w = sym;
    for (i, d) in diag.iter().enumerate() {
        w[(i, i)] += 1.0 - d;
    }
    ExpectedWeightMatrix(w)
}

/// `L = (D − P − Pᵀ) / 2n`, so that `W̄ = I − L`.
pub fn laplacian(p: &ProbabilityMatrix) -> DenseMatrix {
    let (sym, diag) = pair_rates(p);
    let mut l = sym;
    for v in &mut l.data {
        *v = -*v;
    }
    for (i, d) in diag.iter().enumerate() {
        l[(i, i)] += d;
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub row_stochastic_err: f64,
    pub col_stochastic_err: f64,
    /// `1 − ρ(W − 11ᵀ/n)`.
    pub spectral_radius_gap: f64,
    /// Second eigenvalue of `W` by magnitude (the dominant one after
    /// deflating the consensus direction).
    pub lambda2: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Spectral radius of the deflated operator.
    pub radius: f64,
    /// Signed Rayleigh quotient of the final iterate.
    pub rayleigh: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `z ↦ Wz − mean(z)·1`, i.e. on `W − 11ᵀ/n`.
///
/// The radius is tracked as `‖Mz‖` for unit `z`, which converges to `ρ` even
/// when `±ρ` are both eigenvalues.
pub fn deflated_power_iteration(w: &DenseMatrix) -> PowerEstimate {
    power_iteration(w.n(), |z, out| {
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        w.mul_vec_into(z, out);
        out.iter_mut().for_each(|o| *o -= mean);
    })
}

/// Estimate of `ρ(W − 11ᵀ/n)` for a doubly stochastic `W`.
///
/// When `W` is symmetric with every Gershgorin disc in `[s, ∞)`, `s ≥ 0`, the
/// spectrum on `1⊥` is non-negative, so `ρ` is its top eigenvalue and power
/// iteration on `W − sI` finds it with a far better eigenvalue ratio (the
/// gossip `W̄` has its whole spectrum crowded just below 1). Otherwise this
/// is [`deflated_power_iteration`].
pub fn deflated_spectral_radius(w: &DenseMatrix) -> PowerEstimate {
    let n = w.n();
    let s = (0..n)
        .map(|i| {
            let off: f64 = w
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            w[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min);
    if !(s >= 0.0 && w.is_symmetric(SYMMETRY_TOL)) {
        return deflated_power_iteration(w);
    }
    let mut shifted = w.clone();
    for i in 0..n {
        shifted[(i, i)] -= s;
    }
    let mut est = projected_power_iteration(&shifted);
    est.radius += s;
    est.rayleigh += s;
    est
}

/// Power iteration of the matrix projected onto `1⊥`: `z ↦ P⊥ M z`.
fn projected_power_iteration(m: &DenseMatrix) -> PowerEstimate {
    power_iteration(m.n(), |z, out| {
        m.mul_vec_into(z, out);
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|o| *o -= mean);
    })
}

fn power_iteration(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> PowerEstimate {
    let mut rng = rng_from(POWER_ITERATION_SEED);
    let mut z: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut z);
    let mut next = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut estimate = PowerEstimate {
        radius: 0.0,
        rayleigh: 0.0,
        iterations: 0,
        converged: false,
    };
    for it in 1..=POWER_ITERATION_CAP {
        apply(&z, &mut next);
        let rayleigh: f64 = z.iter().zip(&next).map(|(a, b)| a * b).sum();
        let radius = norm(&next);
        estimate = PowerEstimate {
            radius,
            rayleigh,
            iterations: it,
            converged: false,
        };
        if radius == 0.0 || (radius - prev).abs() < POWER_ITERATION_TOL {
            estimate.converged = true;
            return estimate;
        }
        prev = radius;
        for (a, b) in z.iter_mut().zip(&next) {
            *a = b / radius;
        }
    }
    estimate
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let s = norm(v);
    v.iter_mut().for_each(|x| *x /= s);
}

/// Checks `1ᵀW = 1ᵀ`, `W1 = 1` (both within `tol`) and
/// `ρ(W − 11ᵀ/n) < 1`.
pub fn verify_convergence(w: &DenseMatrix, tol: f64) -> Result<ConvergenceReport, SpectralError> {
    if w.n() == 0 {
        return Err(SpectralError::NotSquare);
    }
    let max_dev = |sums: Vec<f64>| sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let row_err = max_dev(w.row_sums());
    let col_err = max_dev(w.col_sums());
    let est = deflated_spectral_radius(w);
    if !est.converged {
        return Err(SpectralError::NoConvergence {
            iterations: est.iterations,
            estimate: est.radius,
        });
    }
    let lambda2 = if est.rayleigh < 0.0 { -est.radius } else { est.radius };
    let gap = 1.0 - est.radius;
    Ok(ConvergenceReport {
        row_stochastic_err: row_err,
        col_stochastic_err: col_err,
        spectral_radius_gap: gap,
        lambda2,
        passes: row_err <= tol && col_err <= tol && gap > GAP_RESOLUTION,
    })
}

/// Second-smallest eigenvalue of a symmetric positive-semidefinite
/// Laplacian with `L1 = 0`, via power iteration on `cI − L` restricted to
/// `1⊥` (`c` is a Gershgorin bound).
pub fn laplacian_second_smallest(l: &DenseMatrix) -> Result<f64, SpectralError> {
    let n = l.n();
    let c = (0..n)
        .map(|i| l.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut shifted = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            shifted[(i, j)] = if i == j { c } else { 0.0 } - l[(i, j)];
        }
    }
    let est = projected_power_iteration(&shifted);
    if !est.converged {
        return Err(SpectralError::NoConvergence {
            iterations: est.iterations,
            estimate: c - est.radius,
        });
    }
    Ok(c - est.radius)
}

/// Graph-level diagnostics for the uniform gossip scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyDiagnostics {
    pub connected: bool,
    pub bipartite: bool,
    pub convergence: ConvergenceReport,
}

pub fn topology_diagnostics(g: &Graph, tol: f64) -> Result<TopologyDiagnostics, SpectralError> {
    let p = uniform_neighbor_probabilities(g)?;
    let w = expected_weight_matrix(&p);
    Ok(TopologyDiagnostics {
        connected: crate::graph::is_connected(g),
        bipartite: crate::graph::is_bipartite(g),
        convergence: verify_convergence(w.matrix(), tol)?,
    })
}
