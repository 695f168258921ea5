//! First-difference instrumental-variable estimation of `(alpha, beta)`.
//!
//! Differencing removes the node baseline:
//! `dY_{t+1} = alpha dY_t + beta W dY_t + d eps_{t+1}`. The lagged levels
//! `(Y_{t-1}, W Y_{t-1})` are valid instruments for the differenced regressors.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::WeightMatrix;
use crate::sim::PanelSeries;

pub const CONDITION_LIMIT: f64 = 1e12;

/// Regressors, instruments and response for one time index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBlock {
    pub t: usize,
    /// Rows `(dY_{i,t}, (W dY_t)_i)`.
    pub x: Vec<[f64; 2]>,
    /// Rows `(Y_{i,t-1}, (W Y_{t-1})_i)`.
    pub z: Vec<[f64; 2]>,
    pub dy_next: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffDesign {
    pub n: usize,
    /// Blocks for `t = 1..T-1`, in order.
    pub blocks: Vec<DesignBlock>,
}

/// How the innovation variance is estimated from the profiled residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Mode {
    /// Residuals centred at their node means, divided by `N (T - 1)`.
    #[default]
    Centered,
    /// Raw residual second moment, divided by `N T`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub s1: Matrix2<f64>,
    pub s2: Matrix2<f64>,
    pub sigma2_hat: f64,
    pub n: usize,
    pub t_len: usize,
}

impl ThetaEstimate {
    pub fn theta(&self) -> [f64; 2] {
        [self.alpha_hat, self.beta_hat]
    }

    /// `N (T - 1)`, the effective sample size of the differenced design.
    pub fn scale(&self) -> f64 {
        (self.n * (self.t_len - 1)) as f64
    }

    /// `S1^{-1} S2 S1^{-T}`.
    pub fn sandwich(&self) -> Result<Matrix2<f64>> {
        let inv = invert2(&self.s1, "Sigma_1 estimate")?;
        Ok(inv * self.s2 * inv.transpose())
    }
}

/// `W Y_t` for every column.
pub fn neighbour_panel(y: &PanelSeries, w: &WeightMatrix) -> Result<PanelSeries> {
    if y.n() != w.n() {
        return Err(RgamError::ShapeMismatch(format!(
            "panel has {} nodes but the network has {}",
            y.n(),
            w.n()
        )));
    }
    let n = y.n();
    let mut data = vec![0.0; n * (y.t_len() + 1)];
    for (t, out) in data.chunks_mut(n.max(1)).enumerate().take(y.t_len() + 1) {
        w.apply_into(y.col(t), out);
    }
    PanelSeries::new(n, y.t_len(), data)
}

pub fn build_design(y: &PanelSeries, w: &WeightMatrix) -> Result<DiffDesign> {
    if y.t_len() < 3 {
        return Err(RgamError::TooShort {
            needed: 3,
            got: y.t_len(),
        });
    }
    let wy = neighbour_panel(y, w)?;
    let n = y.n();
    let mut dy = vec![0.0; n];
    let mut wdy = vec![0.0; n];
    let blocks = (1..y.t_len())
        .map(|t| {
            for i in 0..n {
                dy[i] = y.get(i, t) - y.get(i, t - 1);
            }
            w.apply_into(&dy, &mut wdy);
            DesignBlock {
                t,
                x: (0..n).map(|i| [dy[i], wdy[i]]).collect(),
                z: (0..n).map(|i| [y.get(i, t - 1), wy.get(i, t - 1)]).collect(),
                dy_next: (0..n).map(|i| y.get(i, t + 1) - y.get(i, t)).collect(),
            }
        })
        .collect();
    Ok(DiffDesign { n, blocks })
}

fn cross(a: &[[f64; 2]], b: &[[f64; 2]]) -> Matrix2<f64> {
    let mut m = Matrix2::zeros();
    for (u, v) in a.iter().zip(b) {
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] += u[r] * v[c];
            }
        }
    }
    m
}

pub fn condition_number2(m: &Matrix2<f64>) -> f64 {
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if hi == 0.0 || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn invert2(m: &Matrix2<f64>, what: &str) -> Result<Matrix2<f64>> {
    let cond = condition_number2(m);
    if !(cond < CONDITION_LIMIT) {
        return Err(RgamError::SingularDesign(format!(
            "{what} has condition number {cond:e}"
        )));
    }
    m.try_inverse()
        .ok_or_else(|| RgamError::SingularDesign(format!("{what} is not invertible")))
}

pub fn estimate_theta(y: &PanelSeries, w: &WeightMatrix) -> Result<ThetaEstimate> {
    estimate_theta_with(y, w, Sigma2Mode::Centered)
}

pub fn estimate_theta_with(
    y: &PanelSeries,
    w: &WeightMatrix,
    mode: Sigma2Mode,
) -> Result<ThetaEstimate> {
    let design = build_design(y, w)?;
    let n = design.n;
    let t_len = y.t_len();

    let mut zx = Matrix2::zeros();
    let mut zdy = Vector2::zeros();
    let mut zz = Matrix2::zeros();
    let mut zz_lag = Matrix2::zeros();
    for (k, b) in design.blocks.iter().enumerate() {
        zx += cross(&b.z, &b.x);
        zz += cross(&b.z, &b.z);
        for (zi, d) in b.z.iter().zip(&b.dy_next) {
            zdy[0] += zi[0] * d;
            zdy[1] += zi[1] * d;
        }
        if k > 0 {
            let lag = cross(&design.blocks[k - 1].z, &b.z);
            zz_lag += lag + lag.transpose();
        }
    }
    let inv = invert2(&zx, "instrument cross-product")?;
    let theta = inv * zdy;

    let nt1 = (n * (t_len - 1)) as f64;
    let nt2 = (n * (t_len - 2)) as f64;
    let s1 = zx / nt1;
    let s2 = zz * (2.0 / nt1) - zz_lag / nt2;

    let mut est = ThetaEstimate {
        alpha_hat: theta[0],
        beta_hat: theta[1],
        s1,
        s2,
        sigma2_hat: 0.0,
        n,
        t_len,
    };
    est.sigma2_hat = sigma2_from_residuals(&profiled_residuals(y, w, &est)?, n, t_len, mode);
    Ok(est)
}

/// `e~_{i,t} = Y_{i,t} - alpha Y_{i,t-1} - beta (W Y_{t-1})_i` for `t = 1..T`,
/// stored column by column (`T` columns).
pub fn profiled_residuals(
    y: &PanelSeries,
    w: &WeightMatrix,
    theta: &ThetaEstimate,
) -> Result<Vec<f64>> {
    let wy = neighbour_panel(y, w)?;
    let n = y.n();
    let mut out = Vec::with_capacity(n * y.t_len());
    for t in 1..=y.t_len() {
        for i in 0..n {
            out.push(y.get(i, t) - theta.alpha_hat * y.get(i, t - 1) - theta.beta_hat * wy.get(i, t - 1));
        }
    }
    Ok(out)
}

fn node_means(resid: &[f64], n: usize, t_len: usize) -> Vec<f64> {
    let mut means = vec![0.0; n];
    for col in resid.chunks(n) {
        for (m, r) in means.iter_mut().zip(col) {
            *m += r;
        }
    }
    means.iter_mut().for_each(|m| *m /= t_len as f64);
    means
}

fn sigma2_from_residuals(resid: &[f64], n: usize, t_len: usize, mode: Sigma2Mode) -> f64 {
    match mode {
        Sigma2Mode::Raw => resid.iter().map(|r| r * r).sum::<f64>() / (n * t_len) as f64,
        Sigma2Mode::Centered => {
            let means = node_means(resid, n, t_len);
            let ss: f64 = resid
                .chunks(n)
                .flat_map(|col| col.iter().zip(&means).map(|(r, m)| (r - m).powi(2)))
                .sum();
            ss / (n * (t_len - 1)) as f64
        }
    }
}

/// Node means `e^_i` of the profiled residuals.
pub fn residual_means(
    y: &PanelSeries,
    w: &WeightMatrix,
    theta: &ThetaEstimate,
) -> Result<Vec<f64>> {
    Ok(node_means(&profiled_residuals(y, w, theta)?, y.n(), y.t_len()))
}
