//! Codegree distances, bandwidth selection and the kernel-smoothing
//! estimators of the covariate effect and the latent baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::Network;
use crate::sim::Covariates;

pub const DEFAULT_H0: f64 = 1.5;
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Squared codegree distances
/// `d2[i][j] = (1/N) sum_t ((1/N) sum_s A_ts (A_is - A_js))^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodegreeDistances {
    n: usize,
    d2: Vec<f64>,
    /// Sorted values of `d2[i][j]`, `i < j`, that are strictly positive.
    pub positive_values: Vec<f64>,
}

impl CodegreeDistances {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d2[i * self.n..(i + 1) * self.n]
    }
}

/// The common-neighbour counts `A^2` are integers, so the sums of squared
/// differences are exact and the only rounding is the final division.
pub fn codegree_distance(net: &Network) -> CodegreeDistances {
    let n = net.n();
    let mut counts = vec![0i64; n * n];
    for t in 0..n {
        let nb = net.neighbors(t);
        for &a in nb {
            for &b in nb {
                counts[a * n + b] += 1;
            }
        }
    }
    let scale = (n as f64).powi(3);
    let mut d2 = vec![0.0; n * n];
    let mut positive_values = Vec::new();
    for i in 0..n {
        let ci = &counts[i * n..(i + 1) * n];
        for j in (i + 1)..n {
            let cj = &counts[j * n..(j + 1) * n];
            let ss: i64 = ci.iter().zip(cj).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = ss as f64 / scale;
            d2[i * n + j] = v;
            d2[j * n + i] = v;
            if ss > 0 {
                positive_values.push(v);
            }
        }
    }
    positive_values.sort_by(f64::total_cmp);
    CodegreeDistances {
        n,
        d2,
        positive_values,
    }
}

/// Linear-interpolation sample quantile (`x[floor(h)] + frac * gap` with
/// `h = (m - 1) a`) of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], a: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * a.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bandwidth at quantile level `min(1, h0 / sqrt(n))` of the positive distances.
pub fn select_bandwidth(d: &CodegreeDistances, h0: f64, n: usize) -> Result<f64> {
    if !(h0 > 0.0) || n == 0 {
        return Err(RgamError::Config(format!(
            "bandwidth rule needs h0 > 0 and n > 0, got h0 = {h0}, n = {n}"
        )));
    }
    if d.positive_values.is_empty() {
        return Err(RgamError::AllDistancesZero);
    }
    let level = (h0 / (n as f64).sqrt()).min(1.0);
    Ok(quantile_sorted(&d.positive_values, level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(1 - x^2)^3` on [0, 1).
    #[default]
    Triweight,
    /// `(1 - x^3)^3` on [0, 1).
    Tricube,
}

impl Kernel {
    pub fn eval(self, x: f64) -> f64 {
        if !(0.0..1.0).contains(&x) {
            return 0.0;
        }
        match self {
            Kernel::Triweight => (1.0 - x * x).powi(3),
            Kernel::Tricube => (1.0 - x * x * x).powi(3),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = RgamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triweight" => Ok(Kernel::Triweight),
            "tricube" => Ok(Kernel::Tricube),
            other => Err(RgamError::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub kernel: Kernel,
}

impl KernelConfig {
    pub fn new(bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(RgamError::OutOfRange {
                what: "bandwidth",
                value: bandwidth,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { bandwidth, kernel })
    }

    /// Weight of a pair at squared distance `d2`.
    pub fn weight(&self, d2: f64) -> f64 {
        self.kernel.eval(d2 / self.bandwidth)
    }
}

pub fn kernel_eval(cfg: &KernelConfig, x: f64) -> f64 {
    cfg.kernel.eval(x)
}

/// Nonzero kernel weights `K(d2_ij / h)` per row, including the diagonal,
/// with column indices ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    rows: Vec<Vec<(usize, f64)>>,
}

impl KernelWeights {
    pub fn new(d: &CodegreeDistances, cfg: &KernelConfig) -> Self {
        let rows = (0..d.n())
            .map(|i| {
                d.row(i)
                    .iter()
                    .enumerate()
                    .filter_map(|(j, &v)| {
                        let k = cfg.weight(v);
                        (k > 0.0).then_some((j, k))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// Builds weights from a dense symmetric matrix (used by tests and tools).
    pub fn from_dense(k: &DMatrix<f64>) -> Self {
        let rows = (0..k.nrows())
            .map(|i| {
                (0..k.ncols())
                    .filter(|&j| k[(i, j)] != 0.0)
                    .map(|j| (j, k[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, k)| k).sum()
    }

    /// Pairs `i < j` with positive weight.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, k)| (i, j, k))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub gamma_hat: Vec<f64>,
    /// `(2 / (N (N - 1))) sum_{i<j} (U_i - U_j)(U_i - U_j)' K_ij`.
    pub gram: DMatrix<f64>,
    /// The matching right-hand side with `e^_i - e^_j`.
    pub rhs: Vec<f64>,
}

/// `(2 / (N (N - 1))) sum_{i<j} (U_i - U_j) (v_i - v_j) K_ij`.
pub fn pair_moment(u: &Covariates, v: &[f64], weights: &KernelWeights) -> Vec<f64> {
    let n = u.n();
    let p = u.p();
    let mut out = vec![0.0; p];
    for (i, j, k) in weights.upper_pairs() {
        let dv = (v[i] - v[j]) * k;
        for (c, o) in out.iter_mut().enumerate() {
            *o += (u.get(i, c) - u.get(j, c)) * dv;
        }
    }
    let norm = 2.0 / (n * (n - 1)) as f64;
    out.iter_mut().for_each(|o| *o *= norm);
    out
}

pub fn pair_gram(u: &Covariates, weights: &KernelWeights) -> DMatrix<f64> {
    let n = u.n();
    let p = u.p();
    let mut g = DMatrix::zeros(p, p);
    let mut diff = vec![0.0; p];
    for (i, j, k) in weights.upper_pairs() {
        for (c, d) in diff.iter_mut().enumerate() {
            *d = u.get(i, c) - u.get(j, c);
        }
        for a in 0..p {
            for b in a..p {
                g[(a, b)] += diff[a] * diff[b] * k;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g * (2.0 / (n * (n - 1)) as f64)
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let hi = sv.max();
    if hi == 0.0 || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / sv.min()
    }
}

/// Inverse of the Gram matrix, guarded by its condition number.
pub fn invert_gram(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_number(gram);
    if !(cond < GRAM_CONDITION_LIMIT) {
        return Err(RgamError::SingularGram(cond));
    }
    gram.clone()
        .try_inverse()
        .ok_or(RgamError::SingularGram(cond))
}

pub fn estimate_gamma(
    u: &Covariates,
    ehat: &[f64],
    d: &CodegreeDistances,
    cfg: &KernelConfig,
) -> Result<GammaEstimate> {
    check_lengths(u, ehat, d.n())?;
    estimate_gamma_weighted(u, ehat, &KernelWeights::new(d, cfg))
}

fn check_lengths(u: &Covariates, ehat: &[f64], n: usize) -> Result<()> {
    if u.n() != n || ehat.len() != n {
        return Err(RgamError::ShapeMismatch(format!(
            "{} covariate rows, {} residual means, {n} nodes",
            u.n(),
            ehat.len()
        )));
    }
    if n < 2 {
        return Err(RgamError::ShapeMismatch("need at least 2 nodes".into()));
    }
    Ok(())
}

pub fn estimate_gamma_weighted(
    u: &Covariates,
    ehat: &[f64],
    weights: &KernelWeights,
) -> Result<GammaEstimate> {
    check_lengths(u, ehat, weights.n())?;
    let gram = pair_gram(u, weights);
    let rhs = pair_moment(u, ehat, weights);
    if u.p() == 0 {
        return Ok(GammaEstimate {
            gamma_hat: Vec::new(),
            gram,
            rhs,
        });
    }
    let inv = invert_gram(&gram)?;
    let gamma_hat = (inv * DVector::from_column_slice(&rhs)).as_slice().to_vec();
    Ok(GammaEstimate {
        gamma_hat,
        gram,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FHatVector {
    pub values: Vec<f64>,
    pub kernel_mass: Vec<f64>,
}

pub fn estimate_f(
    u: &Covariates,
    ehat: &[f64],
    gamma: &GammaEstimate,
    d: &CodegreeDistances,
    cfg: &KernelConfig,
) -> Result<FHatVector> {
    check_lengths(u, ehat, d.n())?;
    estimate_f_weighted(u, ehat, gamma, &KernelWeights::new(d, cfg))
}

pub fn estimate_f_weighted(
    u: &Covariates,
    ehat: &[f64],
    gamma: &GammaEstimate,
    weights: &KernelWeights,
) -> Result<FHatVector> {
    check_lengths(u, ehat, weights.n())?;
    if gamma.gamma_hat.len() != u.p() {
        return Err(RgamError::ShapeMismatch(format!(
            "gamma has length {} but covariates have {} columns",
            gamma.gamma_hat.len(),
            u.p()
        )));
    }
    let adjusted: Vec<f64> = (0..u.n())
        .map(|t| ehat[t] - u.dot(t, &gamma.gamma_hat))
        .collect();
    let mut values = Vec::with_capacity(u.n());
    let mut kernel_mass = Vec::with_capacity(u.n());
    for i in 0..u.n() {
        let (mut num, mut den) = (0.0, 0.0);
        for &(t, k) in weights.row(i) {
            num += k * adjusted[t];
            den += k;
        }
        values.push(num / den);
        kernel_mass.push(den);
    }
    Ok(FHatVector {
        values,
        kernel_mass,
    })
}
