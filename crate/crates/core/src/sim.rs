//! Simulation of the autoregressive process
//! `Y_{t+1} = f + alpha Y_t + beta W Y_t + eps_{t+1}` and its stationary mean.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::{LatentSample, WeightMatrix};
use crate::rng::{RngStreams, Stream};

/// Latent baseline `f(C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentBaseline {
    Zero,
    Constant { value: f64 },
    /// `below` when `Phi(C) <= threshold`, otherwise `above`.
    Step { threshold: f64, below: f64, above: f64 },
    /// `f(C) = C` on the raw normal scale.
    Identity,
    /// Piecewise constant in `Phi(C)`: `values[k]` on the k-th interval cut
    /// by `breakpoints` (right-closed, like the block graphon).
    Table { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl LatentBaseline {
    /// Step baseline of the two piecewise settings: `0.5 * 1(Phi(C) <= 1/2)`.
    pub fn half_step() -> Self {
        LatentBaseline::Step {
            threshold: 0.5,
            below: 0.5,
            above: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentBaseline::Table { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return Err(RgamError::Config(format!(
                        "baseline table needs {} values for {} breakpoints",
                        breakpoints.len() + 1,
                        breakpoints.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(RgamError::Config(
                        "baseline table breakpoints must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, c_raw: f64, c_unit: f64) -> f64 {
        match self {
            LatentBaseline::Zero => 0.0,
            LatentBaseline::Constant { value } => *value,
            LatentBaseline::Step {
                threshold,
                below,
                above,
            } => {
                if c_unit <= *threshold {
                    *below
                } else {
                    *above
                }
            }
            LatentBaseline::Identity => c_raw,
            LatentBaseline::Table { breakpoints, values } => {
                values[breakpoints.iter().take_while(|&&b| c_unit > b).count()]
            }
        }
    }
}

/// Innovation distribution, standardised to unit variance and scaled by sigma.
pub trait InnovationLaw: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Student t rescaled to unit variance; needs `df > 2`.
    StudentT { df: f64 },
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

impl InnovationLaw for Innovation {
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            Innovation::Gaussian => StandardNormal.sample(rng),
            Innovation::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("df checked").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            Innovation::Uniform => (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt(),
        }
    }
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Innovation::StudentT { df } if !(*df > 2.0) => Err(RgamError::Config(format!(
                "Student t innovations need df > 2, got {df}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub f_spec: LatentBaseline,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: Vec<f64>,
        f_spec: LatentBaseline,
        sigma: f64,
    ) -> Result<Self> {
        let params = Self {
            alpha,
            beta,
            gamma,
            f_spec,
            sigma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_stationary(self.alpha, self.beta)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(RgamError::OutOfRange {
                what: "sigma",
                value: self.sigma,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        self.f_spec.validate()
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }
}

pub fn check_stationary(alpha: f64, beta: f64) -> Result<()> {
    if alpha.abs() + beta.abs() < 1.0 {
        Ok(())
    } else {
        Err(RgamError::StationarityViolation { alpha, beta })
    }
}

/// Node covariates, `n x p`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Covariates {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(RgamError::ShapeMismatch(format!(
                "covariate buffer has {} entries, expected {n}x{p}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(RgamError::ShapeMismatch(format!(
                "covariate for node {} is not finite",
                k / p.max(1)
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(RgamError::ShapeMismatch("ragged covariate rows".into()));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    /// `n` nodes with no covariates.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            p: 0,
            data: Vec::new(),
        }
    }

    /// I.i.d. standard normal covariates from the covariate stream.
    pub fn standard_normal(n: usize, p: usize, streams: &RngStreams) -> Self {
        let mut rng = streams.stream(Stream::Covariates);
        let data = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        Self { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.p + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dot(&self, i: usize, gamma: &[f64]) -> f64 {
        self.row(i).iter().zip(gamma).map(|(u, g)| u * g).sum()
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        let data = keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            n: keep.len(),
            p: self.p,
            data,
        }
    }
}

/// Responses `Y_{i,t}` for `t = 0..=T`, stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSeries {
    n: usize,
    t_len: usize,
    data: Vec<f64>,
}

impl PanelSeries {
    /// `data` holds `t_len + 1` columns of length `n`, column `t` first at `t * n`.
    pub fn new(n: usize, t_len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * (t_len + 1) {
            return Err(RgamError::ShapeMismatch(format!(
                "panel buffer has {} entries, expected {n}x{}",
                data.len(),
                t_len + 1
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(RgamError::ShapeMismatch(format!(
                "panel value for node {} at t = {} is not finite",
                k % n.max(1),
                k / n.max(1)
            )));
        }
        Ok(Self { n, t_len, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(RgamError::ShapeMismatch("panel has no columns".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(RgamError::ShapeMismatch("ragged panel columns".into()));
        }
        Self::new(n, columns.len() - 1, columns.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `T`; the panel has `T + 1` columns.
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.data[t * self.n + i]
    }

    pub fn col(&self, t: usize) -> &[f64] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The first `cols` columns (`t = 0..cols`).
    pub fn head(&self, cols: usize) -> Result<Self> {
        if cols == 0 || cols > self.t_len + 1 {
            return Err(RgamError::ShapeMismatch(format!(
                "cannot keep {cols} of {} columns",
                self.t_len + 1
            )));
        }
        Self::new(self.n, cols - 1, self.data[..cols * self.n].to_vec())
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        let data = (0..=self.t_len)
            .flat_map(|t| keep.iter().map(move |&i| self.get(i, t)))
            .collect();
        Self {
            n: keep.len(),
            t_len: self.t_len,
            data,
        }
    }
}

/// `f_i = f(C_i) + gamma' U_i`.
pub fn f_values(
    params: &ModelParams,
    latents: &LatentSample,
    covs: &Covariates,
) -> Result<Vec<f64>> {
    if latents.len() != covs.n() {
        return Err(RgamError::ShapeMismatch(format!(
            "{} latent draws but {} covariate rows",
            latents.len(),
            covs.n()
        )));
    }
    if params.p() != covs.p() {
        return Err(RgamError::ShapeMismatch(format!(
            "gamma has length {} but covariates have {} columns",
            params.p(),
            covs.p()
        )));
    }
    Ok((0..covs.n())
        .map(|i| {
            params.f_spec.eval(latents.c_raw[i], latents.c_unit[i]) + covs.dot(i, &params.gamma)
        })
        .collect())
}

/// Gaussian simulation from zero with innovations drawn from the seed's
/// innovation stream.
pub fn simulate(
    params: &ModelParams,
    w: &WeightMatrix,
    fvals: &[f64],
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<PanelSeries> {
    let mut rng = RngStreams::new(seed).stream(Stream::Innovations);
    let start = vec![0.0; w.n()];
    simulate_from(params, w, fvals, &start, t_len, burn_in, &Innovation::Gaussian, &mut rng)
}

/// Runs `burn_in` steps from `start`, then records `T + 1` further states.
#[allow(clippy::too_many_arguments)]
pub fn simulate_from(
    params: &ModelParams,
    w: &WeightMatrix,
    fvals: &[f64],
    start: &[f64],
    t_len: usize,
    burn_in: usize,
    law: &dyn InnovationLaw,
    rng: &mut dyn RngCore,
) -> Result<PanelSeries> {
    check_stationary(params.alpha, params.beta)?;
    let n = w.n();
    if fvals.len() != n || start.len() != n {
        return Err(RgamError::ShapeMismatch(format!(
            "network has {n} nodes but f has {} and the start state {} entries",
            fvals.len(),
            start.len()
        )));
    }
    let mut y = start.to_vec();
    let mut wy = vec![0.0; n];
    let mut data = Vec::with_capacity(n * (t_len + 1));
    for step in 0..burn_in + t_len + 1 {
        w.apply_into(&y, &mut wy);
        for i in 0..n {
            let eps = if params.sigma > 0.0 {
                params.sigma * law.draw(rng)
            } else {
                0.0
            };
            y[i] = fvals[i] + params.alpha * y[i] + params.beta * wy[i] + eps;
        }
        if step >= burn_in {
            data.extend_from_slice(&y);
        }
    }
    PanelSeries::new(n, t_len, data)
}

/// Solves `((1 - alpha) I - beta W) m = f`.
pub fn stationary_mean(params: &ModelParams, w: &WeightMatrix, fvals: &[f64]) -> Result<Vec<f64>> {
    check_stationary(params.alpha, params.beta)?;
    let n = w.n();
    if fvals.len() != n {
        return Err(RgamError::ShapeMismatch(format!(
            "network has {n} nodes but f has {} entries",
            fvals.len()
        )));
    }
    let system = DMatrix::identity(n, n) * (1.0 - params.alpha) - w.to_dense() * params.beta;
    system
        .lu()
        .solve(&DVector::from_column_slice(fvals))
        .map(|m| m.as_slice().to_vec())
        .ok_or_else(|| RgamError::SingularSystem("stationary mean system".into()))
}
