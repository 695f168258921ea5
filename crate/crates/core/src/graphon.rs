//! Graphon families and exchangeable network sampling.
//!
//! A network on `n` nodes is drawn as `A_ij = 1(eta_ij <= g(u_i, u_j))` for
//! `i != j`, where `u_i = Phi(C_i)` with `C_i ~ N(0, 1)` and `eta_ij = eta_ji`
//! uniform on [0, 1).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::normal;
use crate::rng::{RngStreams, Stream};

/// Symmetric step function on [0,1]^2: `values[a][b]` on block `a x b`.
///
/// `u` belongs to block `k` when exactly `k` breakpoints are strictly below
/// it, so each block is left-open and right-closed except the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl BlockGrid {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let grid = Self { breakpoints, values };
        grid.validate()?;
        Ok(grid)
    }

    /// The two-community step function shared by the piecewise settings.
    pub fn two_block() -> Self {
        Self {
            breakpoints: vec![0.5],
            values: vec![vec![0.6, 0.1], vec![0.1, 0.2]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.breakpoints.len() + 1;
        for (idx, b) in self.breakpoints.iter().enumerate() {
            if !(*b > 0.0 && *b < 1.0) {
                return Err(RgamError::InvalidGraphon(format!(
                    "breakpoint {b} is not inside (0, 1)"
                )));
            }
            if idx > 0 && *b <= self.breakpoints[idx - 1] {
                return Err(RgamError::InvalidGraphon(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        if self.values.len() != k || self.values.iter().any(|row| row.len() != k) {
            return Err(RgamError::InvalidGraphon(format!(
                "{} breakpoints need a {k}x{k} block matrix",
                self.breakpoints.len()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.values[a][b];
                if !(0.0..=1.0).contains(&v) {
                    return Err(RgamError::InvalidGraphon(format!(
                        "block value {v} at ({a}, {b}) is not a probability"
                    )));
                }
                if v != self.values[b][a] {
                    return Err(RgamError::InvalidGraphon(format!(
                        "block matrix is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn block_of(&self, u: f64) -> usize {
        self.breakpoints.iter().take_while(|&&b| u > b).count()
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.values[self.block_of(u)][self.block_of(v)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphonSpec {
    /// Two-block step function times the logistic surface.
    PiecewiseSmooth { blocks: BlockGrid },
    /// `exp(u + v) / (1 + exp(u + v))`.
    SmoothLogistic,
    /// Pure step function (a stochastic block model).
    PiecewiseConstant { blocks: BlockGrid },
    Constant { p: f64 },
    Grid { blocks: BlockGrid },
}

fn logistic_surface(u: f64, v: f64) -> f64 {
    let s = u + v;
    s.exp() / (1.0 + s.exp())
}

impl GraphonSpec {
    pub fn piecewise_smooth() -> Self {
        GraphonSpec::PiecewiseSmooth {
            blocks: BlockGrid::two_block(),
        }
    }

    pub fn piecewise_constant() -> Self {
        GraphonSpec::PiecewiseConstant {
            blocks: BlockGrid::two_block(),
        }
    }

    pub fn constant(p: f64) -> Result<Self> {
        let spec = GraphonSpec::Constant { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid(blocks: BlockGrid) -> Result<Self> {
        blocks.validate()?;
        Ok(GraphonSpec::Grid { blocks })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GraphonSpec::PiecewiseSmooth { blocks }
            | GraphonSpec::PiecewiseConstant { blocks }
            | GraphonSpec::Grid { blocks } => blocks.validate(),
            GraphonSpec::SmoothLogistic => Ok(()),
            GraphonSpec::Constant { p } if (0.0..=1.0).contains(p) => Ok(()),
            GraphonSpec::Constant { p } => Err(RgamError::InvalidGraphon(format!(
                "constant edge probability {p} is outside [0, 1]"
            ))),
        }
    }

    /// Evaluates `g(u, v)` without range checks.
    pub fn value(&self, u: f64, v: f64) -> f64 {
        match self {
            GraphonSpec::PiecewiseSmooth { blocks } => blocks.eval(u, v) * logistic_surface(u, v),
            GraphonSpec::SmoothLogistic => logistic_surface(u, v),
            GraphonSpec::PiecewiseConstant { blocks } | GraphonSpec::Grid { blocks } => {
                blocks.eval(u, v)
            }
            GraphonSpec::Constant { p } => *p,
        }
    }
}

pub fn eval_graphon(spec: &GraphonSpec, u: f64, v: f64) -> Result<f64> {
    for (what, x) in [("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(RgamError::OutOfRange {
                what,
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    Ok(spec.value(u, v))
}

/// Latent draws `C_i ~ N(0, 1)` together with `Phi(C_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub c_raw: Vec<f64>,
    pub c_unit: Vec<f64>,
}

impl LatentSample {
    pub fn from_raw(c_raw: Vec<f64>) -> Self {
        let c_unit = c_raw.iter().map(|&c| normal::cdf(c)).collect();
        Self { c_raw, c_unit }
    }

    pub fn len(&self) -> usize {
        self.c_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_raw.is_empty()
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            c_raw: keep.iter().map(|&i| self.c_raw[i]).collect(),
            c_unit: keep.iter().map(|&i| self.c_unit[i]).collect(),
        }
    }
}

/// Undirected simple graph: symmetric 0/1 adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
}

impl Network {
    pub fn from_adjacency(n: usize, adjacency: Vec<u8>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(RgamError::ShapeMismatch(format!(
                "adjacency has {} entries, expected {n}x{n}",
                adjacency.len()
            )));
        }
        for i in 0..n {
            if adjacency[i * n + i] != 0 {
                return Err(RgamError::InvalidGraphon(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[i * n + j];
                if a > 1 {
                    return Err(RgamError::ShapeMismatch(format!(
                        "adjacency entry ({i}, {j}) = {a} is not binary"
                    )));
                }
                if a != adjacency[j * n + i] {
                    return Err(RgamError::ShapeMismatch(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i * n + j] == 1).collect())
            .collect();
        Ok(Self {
            n,
            adjacency,
            neighbors,
        })
    }

    /// Builds a network from undirected edges; rejects self-loops, duplicate
    /// edges (in either orientation) and out-of-range ids.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![0u8; n * n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(RgamError::ShapeMismatch(format!(
                    "edge {k} ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(RgamError::InvalidGraphon(format!("self-loop at node {a}")));
            }
            if adjacency[a * n + b] == 1 {
                return Err(RgamError::InvalidGraphon(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a * n + b] = 1;
            adjacency[b * n + a] = 1;
        }
        Self::from_adjacency(n, adjacency)
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n * n)
            .map(|k| u8::from(k / n != k % n))
            .collect();
        Self::from_adjacency(n, adjacency).expect("complete graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] == 1
    }

    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| {
                self.neighbors[i]
                    .iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (i, j))
            })
            .collect()
    }

    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / (self.n * (self.n - 1)) as f64
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.neighbors[i].is_empty()).collect()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(self.adjacency[i * self.n + j]))
    }

    /// Subgraph induced by `keep` (relabelled `0..keep.len()` in that order).
    pub fn induced(&self, keep: &[usize]) -> Self {
        let m = keep.len();
        let mut adjacency = vec![0u8; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                adjacency[a * m + b] = self.adjacency[i * self.n + j];
            }
        }
        Self::from_adjacency(m, adjacency).expect("induced subgraph is valid")
    }
}

/// Row-normalised adjacency `W = D^{-1} A`, stored through neighbour lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    neighbors: Vec<Vec<usize>>,
    inv_degree: Vec<f64>,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.neighbors[i].binary_search(&j).is_ok() {
            self.inv_degree[i]
        } else {
            0.0
        }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `w_i^T y`, the neighbour average of `y` at node `i`.
    pub fn row_dot(&self, i: usize, y: &[f64]) -> f64 {
        self.neighbors[i].iter().map(|&j| y[j]).sum::<f64>() * self.inv_degree[i]
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.row_dot(i, y)).collect()
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, y);
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for &j in &self.neighbors[i] {
                w[(i, j)] = self.inv_degree[i];
            }
        }
        w
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.inv_degree[i] * self.neighbors[i].len() as f64)
            .collect()
    }
}

pub fn row_normalize(net: &Network) -> Result<WeightMatrix> {
    if let Some(&i) = net.isolated_nodes().first() {
        return Err(RgamError::IsolatedNode(i));
    }
    Ok(WeightMatrix {
        neighbors: net.neighbors.clone(),
        inv_degree: net.neighbors.iter().map(|nb| 1.0 / nb.len() as f64).collect(),
    })
}

pub fn sample_network(spec: &GraphonSpec, n: usize, seed: u64) -> Result<(Network, LatentSample)> {
    sample_network_with(spec, n, &RngStreams::new(seed))
}

pub fn sample_network_with(
    spec: &GraphonSpec,
    n: usize,
    streams: &RngStreams,
) -> Result<(Network, LatentSample)> {
    if n < 2 {
        return Err(RgamError::Config(format!("need at least 2 nodes, got {n}")));
    }
    spec.validate()?;
    let mut latent_rng = streams.stream(Stream::Latent);
    let c_raw: Vec<f64> = (0..n).map(|_| latent_rng.sample(StandardNormal)).collect();
    let latents = LatentSample::from_raw(c_raw);

    let mut edge_rng = streams.stream(Stream::Edges);
    let mut adjacency = vec![0u8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let eta: f64 = edge_rng.random();
            // eta lies in [0, 1), so the strict comparison keeps g = 0 edge-free
            // while giving the same edge probability g.
            if eta < spec.value(latents.c_unit[i], latents.c_unit[j]) {
                adjacency[i * n + j] = 1;
                adjacency[j * n + i] = 1;
            }
        }
    }
    Ok((Network::from_adjacency(n, adjacency)?, latents))
}
