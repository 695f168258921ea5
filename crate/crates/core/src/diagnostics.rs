//! Checks of connectivity, mixing and hub concentration for a network.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::{Network, WeightMatrix};

/// Largest `n` for which the full symmetric eigendecomposition is used.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
pub const ITERATIVE_TOL: f64 = 1e-10;
pub const SWEEP_CUTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDiagnostics {
    pub n: usize,
    pub edges: usize,
    pub density: f64,
    pub connected: bool,
    pub bipartite: bool,
    pub isolated: Vec<usize>,
    /// `1 - max(|lambda_2|, |lambda_min|)`; only when connected and not bipartite.
    pub spectral_gap: Option<f64>,
    pub pi: Vec<f64>,
    pub influence_mass: Option<f64>,
    /// Smallest conductance over sweep cuts of the Fiedler vector, an upper
    /// bound on the bottleneck ratio.
    pub bottleneck_upper: Option<f64>,
}

/// Breadth-first search for connectivity and a two-colouring attempt.
pub fn check_connectivity(net: &Network) -> (bool, bool) {
    let n = net.n();
    let mut colour: Vec<Option<bool>> = vec![None; n];
    let mut components = 0;
    let mut bipartite = true;
    for root in 0..n {
        if colour[root].is_some() {
            continue;
        }
        components += 1;
        colour[root] = Some(false);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let c = colour[v].expect("queued nodes are coloured");
            for &nb in net.neighbors(v) {
                match colour[nb] {
                    None => {
                        colour[nb] = Some(!c);
                        queue.push_back(nb);
                    }
                    Some(other) if other == c => bipartite = false,
                    Some(_) => {}
                }
            }
        }
    }
    (components <= 1, bipartite)
}

pub fn stationary_distribution(net: &Network) -> Result<Vec<f64>> {
    let total = 2 * net.edge_count();
    if total == 0 {
        return Err(RgamError::NoEdges);
    }
    Ok(net.degrees().iter().map(|&d| d as f64 / total as f64).collect())
}

/// `sum_i pi_i^2` with `pi_i = d_i / (2|E|)`.
pub fn influence_mass(net: &Network) -> Result<f64> {
    Ok(stationary_distribution(net)?.iter().map(|p| p * p).sum())
}

fn normalized_adjacency(net: &Network) -> DMatrix<f64> {
    let n = net.n();
    let scale: Vec<f64> = net.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in net.neighbors(i) {
            m[(i, j)] = scale[i] * scale[j];
        }
    }
    m
}

fn require_connected(net: &Network) -> Result<()> {
    if let Some(&i) = net.isolated_nodes().first() {
        return Err(RgamError::NotConnected(format!("node {i} is isolated")));
    }
    if !check_connectivity(net).0 {
        return Err(RgamError::NotConnected("more than one component".into()));
    }
    Ok(())
}

/// Eigenvalues of `D^{-1/2} A D^{-1/2}` in decreasing order.
pub fn normalized_spectrum(net: &Network) -> Result<Vec<f64>> {
    if let Some(&i) = net.isolated_nodes().first() {
        return Err(RgamError::IsolatedNode(i));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(normalized_adjacency(net))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

pub fn spectral_gap(net: &Network) -> Result<f64> {
    spectral_gap_with(net, DENSE_EIGEN_LIMIT)
}

/// As [`spectral_gap`], switching to deflated power iteration above `dense_limit` nodes.
pub fn spectral_gap_with(net: &Network, dense_limit: usize) -> Result<f64> {
    require_connected(net)?;
    if net.n() < 2 {
        return Err(RgamError::NotConnected("need at least two nodes".into()));
    }
    let second = if net.n() <= dense_limit {
        let ev = normalized_spectrum(net)?;
        ev[1].abs().max(ev[ev.len() - 1].abs())
    } else {
        deflated_power(net)
    };
    Ok((1.0 - second).clamp(0.0, 2.0))
}

/// Top eigenvector of the normalised adjacency, `sqrt(d) / |sqrt(d)|`.
fn top_vector(net: &Network) -> Vec<f64> {
    let v: Vec<f64> = net.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn apply_deflated(net: &Network, scale: &[f64], top: &[f64], x: &[f64], shift: f64) -> Vec<f64> {
    let proj: f64 = top.iter().zip(x).map(|(a, b)| a * b).sum();
    let mut out: Vec<f64> = (0..net.n())
        .map(|i| {
            let s: f64 = net.neighbors(i).iter().map(|&j| scale[j] * x[j]).sum();
            scale[i] * s - proj * top[i] + shift * x[i]
        })
        .collect();
    let proj_out: f64 = top.iter().zip(&out).map(|(a, b)| a * b).sum();
    for (o, t) in out.iter_mut().zip(top) {
        *o -= proj_out * t;
    }
    out
}

fn start_vector(n: usize, top: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|i| ((i * 7919 % 104_729) as f64 / 104_729.0) - 0.5).collect();
    let proj: f64 = top.iter().zip(&x).map(|(a, b)| a * b).sum();
    for (v, t) in x.iter_mut().zip(top) {
        *v -= proj * t;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

/// Largest `|lambda|` of the normalised adjacency after removing the top pair,
/// by power iteration on the deflated operator.
fn deflated_power(net: &Network) -> f64 {
    let n = net.n();
    let scale: Vec<f64> = net.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let top = top_vector(net);
    let mut x = start_vector(n, &top);
    let mut estimate = 0.0;
    for _ in 0..200_000 {
        let y = apply_deflated(net, &scale, &top, &x, 0.0);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / norm).collect();
        if (norm - estimate).abs() < ITERATIVE_TOL {
            return norm;
        }
        estimate = norm;
    }
    estimate
}

/// Second eigenvector of the random-walk operator (`D^{-1/2}` times the
/// normalised-adjacency eigenvector).
fn fiedler_vector(net: &Network, dense_limit: usize) -> Vec<f64> {
    let n = net.n();
    let scale: Vec<f64> = net.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let v = if n <= dense_limit {
        let eig = SymmetricEigen::new(normalized_adjacency(net));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        eig.eigenvectors.column(order[1]).iter().copied().collect::<Vec<_>>()
    } else {
        // Shift by one so the largest algebraic eigenvalue dominates.
        let top = top_vector(net);
        let mut x = start_vector(n, &top);
        let mut prev = 0.0;
        for _ in 0..200_000 {
            let y = apply_deflated(net, &scale, &top, &x, 1.0);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.into_iter().map(|v| v / norm).collect();
            if (norm - prev).abs() < ITERATIVE_TOL {
                break;
            }
            prev = norm;
        }
        x
    };
    v.iter().zip(&scale).map(|(a, s)| a * s).collect()
}

/// Minimum conductance `|E(S, S^c)| / min(vol S, vol S^c)` over up to
/// [`SWEEP_CUTS`] evenly spaced prefix cuts of the Fiedler ordering.
pub fn bottleneck_sweep(net: &Network) -> Result<f64> {
    bottleneck_sweep_with(net, DENSE_EIGEN_LIMIT)
}

pub fn bottleneck_sweep_with(net: &Network, dense_limit: usize) -> Result<f64> {
    require_connected(net)?;
    let n = net.n();
    if n < 2 {
        return Err(RgamError::NotConnected("need at least two nodes".into()));
    }
    let f = fiedler_vector(net, dense_limit);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
    let cuts = SWEEP_CUTS.min(n - 1);
    let positions: Vec<usize> = (1..=cuts).map(|k| (k * (n - 1)).div_ceil(cuts).max(1)).collect();

    let total_vol = 2 * net.edge_count();
    let mut in_s = vec![false; n];
    let (mut vol, mut boundary) = (0usize, 0isize);
    let mut best = f64::INFINITY;
    let mut next = 0;
    for (k, &v) in order.iter().enumerate().take(n - 1) {
        in_s[v] = true;
        vol += net.degree(v);
        for &nb in net.neighbors(v) {
            boundary += if in_s[nb] { -1 } else { 1 };
        }
        while next < positions.len() && positions[next] < k + 1 {
            next += 1;
        }
        if next < positions.len() && positions[next] == k + 1 {
            let denom = vol.min(total_vol - vol) as f64;
            best = best.min(boundary as f64 / denom);
            next += 1;
        }
    }
    Ok(best)
}

/// Frobenius norm of `W^j`.
pub fn power_frobenius(w: &WeightMatrix, j: usize) -> f64 {
    let n = w.n();
    let wd = w.to_dense();
    let mut p = DMatrix::identity(n, n);
    for _ in 0..j {
        p = &wd * p;
    }
    p.norm()
}

pub fn diagnose(net: &Network, approx_bottleneck: bool) -> NetworkDiagnostics {
    let (connected, bipartite) = check_connectivity(net);
    let isolated = net.isolated_nodes();
    let usable = connected && isolated.is_empty() && net.n() >= 2;
    let pi = stationary_distribution(net).unwrap_or_default();
    NetworkDiagnostics {
        n: net.n(),
        edges: net.edge_count(),
        density: net.density(),
        connected,
        bipartite,
        spectral_gap: (usable && !bipartite)
            .then(|| spectral_gap(net).ok())
            .flatten(),
        influence_mass: influence_mass(net).ok(),
        bottleneck_upper: (usable && approx_bottleneck)
            .then(|| bottleneck_sweep(net).ok())
            .flatten(),
        isolated,
        pi,
    }
}

/// `|pi W - pi|_inf`, zero for a reversible walk's stationary law.
pub fn stationarity_residual(pi: &[f64], w: &WeightMatrix) -> f64 {
    let n = w.n();
    let mut out = vec![0.0; n];
    for (i, p) in pi.iter().enumerate() {
        for &j in w.neighbors(i) {
            out[j] += p * w.get(i, j);
        }
    }
    out.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn top_eigenvector_residual(net: &Network) -> f64 {
    let m = normalized_adjacency(net);
    let v = DVector::from_vec(top_vector(net));
    (&m * &v - &v).amax()
}
