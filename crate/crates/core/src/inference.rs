//! Standard errors and confidence intervals for `(alpha, beta)`, the
//! covariate effect and the latent baseline, plus the truncated trace-series
//! values of the population `Sigma_1`/`Sigma_2` matrices.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::WeightMatrix;
use crate::iv::ThetaEstimate;
use crate::normal;
use crate::sim::{check_stationary, Covariates, PanelSeries};
use crate::smooth::{invert_gram, pair_moment, FHatVector, GammaEstimate, KernelWeights};

/// Lagged time means `Ybar_i = (1/T) sum_{t=1..T} Y_{i,t-1}` and `W Ybar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSummaries {
    pub ybar: Vec<f64>,
    pub wybar: Vec<f64>,
}

impl PanelSummaries {
    pub fn new(y: &PanelSeries, w: &WeightMatrix) -> Result<Self> {
        if y.n() != w.n() {
            return Err(RgamError::ShapeMismatch(format!(
                "panel has {} nodes but the network has {}",
                y.n(),
                w.n()
            )));
        }
        let t_len = y.t_len();
        let mut ybar = vec![0.0; y.n()];
        for t in 0..t_len {
            for (b, v) in ybar.iter_mut().zip(y.col(t)) {
                *b += v;
            }
        }
        ybar.iter_mut().for_each(|b| *b /= t_len as f64);
        let wybar = w.apply(&ybar);
        Ok(Self { ybar, wybar })
    }
}

pub type Interval = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaInference {
    pub se_alpha: f64,
    pub se_beta: f64,
    pub ci_alpha: Interval,
    pub ci_beta: Interval,
    pub level: f64,
}

fn check_level(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(normal::two_sided_z(level))
    } else {
        Err(RgamError::OutOfRange {
            what: "confidence level",
            value: level,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

fn interval(est: f64, se: f64, z: f64, scale: f64) -> Interval {
    let half = z * se / scale.sqrt();
    (est - half, est + half)
}

pub fn ci_theta(est: &ThetaEstimate, level: f64) -> Result<ThetaInference> {
    let z = check_level(level)?;
    let sandwich = est.sandwich()?;
    let sigma = est.sigma2_hat.sqrt();
    let se_alpha = sigma * sandwich[(0, 0)].max(0.0).sqrt();
    let se_beta = sigma * sandwich[(1, 1)].max(0.0).sqrt();
    Ok(ThetaInference {
        se_alpha,
        se_beta,
        ci_alpha: interval(est.alpha_hat, se_alpha, z, est.scale()),
        ci_beta: interval(est.beta_hat, se_beta, z, est.scale()),
        level,
    })
}

/// Sensitivity of the covariate moment to `(alpha, beta)`: pair moments of
/// `Ybar` and `W Ybar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLoadings {
    pub l_alpha: Vec<f64>,
    pub l_beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaInference {
    pub se: Vec<f64>,
    pub ci: Vec<Interval>,
    pub v_hat: DMatrix<f64>,
    pub sigma3: DMatrix<f64>,
    pub loadings: ThetaLoadings,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FInference {
    pub node: usize,
    pub estimate: f64,
    pub se_c: f64,
    pub ci: Interval,
    pub a_n: f64,
    pub b_n: f64,
    pub iii1: Vec<f64>,
    pub iii2: f64,
    pub iii3: f64,
    pub sigma_tilde: f64,
    pub level: f64,
}

/// Shared state for the covariate and baseline intervals of one fit.
pub struct SmoothInference<'a> {
    theta: &'a ThetaEstimate,
    gamma: &'a GammaEstimate,
    u: &'a Covariates,
    weights: &'a KernelWeights,
    summaries: &'a PanelSummaries,
    sandwich: Matrix2<f64>,
    gram_inv: DMatrix<f64>,
    loadings: ThetaLoadings,
    /// `s_t = sum_j (U_t - U_j) K_tj`, one row per node.
    pair_sums: DMatrix<f64>,
}

impl<'a> SmoothInference<'a> {
    pub fn new(
        theta: &'a ThetaEstimate,
        gamma: &'a GammaEstimate,
        u: &'a Covariates,
        weights: &'a KernelWeights,
        summaries: &'a PanelSummaries,
    ) -> Result<Self> {
        let n = u.n();
        if weights.n() != n || summaries.ybar.len() != n || gamma.gamma_hat.len() != u.p() {
            return Err(RgamError::ShapeMismatch(
                "covariates, kernel weights, panel summaries and gamma disagree".into(),
            ));
        }
        let p = u.p();
        let gram_inv = if p == 0 {
            DMatrix::zeros(0, 0)
        } else {
            invert_gram(&gamma.gram)?
        };
        // The pair moments carry 2/(N(N-1)) over i<j, the same as
        // 1/(N(N-1)) over i != j.
        let loadings = ThetaLoadings {
            l_alpha: pair_moment(u, &summaries.ybar, weights),
            l_beta: pair_moment(u, &summaries.wybar, weights),
        };
        let mut pair_sums = DMatrix::zeros(n, p);
        for i in 0..n {
            for &(j, k) in weights.row(i) {
                for c in 0..p {
                    pair_sums[(i, c)] += (u.get(i, c) - u.get(j, c)) * k;
                }
            }
        }
        Ok(Self {
            theta,
            gamma,
            u,
            weights,
            summaries,
            sandwich: theta.sandwich()?,
            gram_inv,
            loadings,
            pair_sums,
        })
    }

    pub fn loadings(&self) -> &ThetaLoadings {
        &self.loadings
    }

    fn loading_matrix(&self) -> DMatrix<f64> {
        let p = self.u.p();
        DMatrix::from_fn(p, 2, |r, c| {
            if c == 0 {
                self.loadings.l_alpha[r]
            } else {
                self.loadings.l_beta[r]
            }
        })
    }

    /// `(1/N) sum_i (s_i / (N-1)) (s_i / (N-1))'`.
    pub fn sigma3(&self) -> DMatrix<f64> {
        let n = self.u.n() as f64;
        let scaled = &self.pair_sums / (n - 1.0);
        scaled.transpose() * scaled / n
    }

    pub fn v_hat(&self) -> DMatrix<f64> {
        let l = self.loading_matrix();
        let s = DMatrix::from_fn(2, 2, |r, c| self.sandwich[(r, c)]);
        &l * s * l.transpose() * self.theta.sigma2_hat
    }

    /// Coordinate-wise intervals from
    /// `Gram^{-1} (v_hat + 4 sigma2 Sigma3) Gram^{-T}`. The residual means carry
    /// innovation noise of variance `sigma^2 / T`, so the pairwise term is
    /// scaled by the estimated innovation variance.
    pub fn ci_gamma(&self, level: f64) -> Result<GammaInference> {
        let z = check_level(level)?;
        let v_hat = self.v_hat();
        let sigma3 = self.sigma3();
        let middle = &v_hat + &sigma3 * (4.0 * self.theta.sigma2_hat);
        let cov = &self.gram_inv * middle * self.gram_inv.transpose();
        let se: Vec<f64> = (0..self.u.p()).map(|c| cov[(c, c)].max(0.0).sqrt()).collect();
        let ci = se
            .iter()
            .zip(&self.gamma.gamma_hat)
            .map(|(s, g)| interval(*g, *s, z, self.theta.scale()))
            .collect();
        Ok(GammaInference {
            se,
            ci,
            v_hat,
            sigma3,
            loadings: self.loadings.clone(),
            level,
        })
    }

    pub fn ci_f(&self, i: usize, fhat: &FHatVector, level: f64) -> Result<FInference> {
        let z = check_level(level)?;
        let n = self.u.n();
        let p = self.u.p();
        if i >= n {
            return Err(RgamError::ShapeMismatch(format!("node {i} is outside 0..{n}")));
        }
        let row = self.weights.row(i);
        let mass = self.weights.mass(i);
        if !(mass > 0.0) {
            return Err(RgamError::ShapeMismatch(format!("node {i} has no kernel mass")));
        }
        let mut iii1 = vec![0.0; p];
        let (mut iii2, mut iii3) = (0.0, 0.0);
        for &(t, k) in row {
            let share = k / mass;
            for (c, v) in iii1.iter_mut().enumerate() {
                *v += share * self.u.get(t, c);
            }
            iii2 += share * self.summaries.ybar[t];
            iii3 += share * self.summaries.wybar[t];
        }
        let iii1_vec = DVector::from_column_slice(&iii1);
        let correction = |l: &[f64]| -> f64 {
            if p == 0 {
                return 0.0;
            }
            (&self.gram_inv * DVector::from_column_slice(l)).dot(&iii1_vec)
        };
        let a_n = -correction(&self.loadings.l_alpha) + iii2;
        let b_n = -correction(&self.loadings.l_beta) + iii3;

        // weight_t = -(Gram^{-1} (2/(N(N-1))) s_t)' III_1 + K_it / mass
        let mut weight = vec![0.0; n];
        if p > 0 {
            let pair_norm = 2.0 / (n * (n - 1)) as f64;
            let direction = self.gram_inv.transpose() * &iii1_vec * pair_norm;
            let projected = &self.pair_sums * direction;
            for (w, v) in weight.iter_mut().zip(projected.iter()) {
                *w = -v;
            }
        }
        for &(t, k) in row {
            weight[t] += k / mass;
        }
        let sigma_tilde = n as f64 * weight.iter().map(|w| w * w).sum::<f64>();

        let ab = nalgebra::Vector2::new(a_n, b_n);
        let quad = ab.dot(&(self.sandwich * ab));
        let var = self.theta.sigma2_hat * (quad + sigma_tilde);
        let se_c = var.max(0.0).sqrt();
        let estimate = fhat.values[i];
        Ok(FInference {
            node: i,
            estimate,
            se_c,
            ci: interval(estimate, se_c, z, self.theta.scale()),
            a_n,
            b_n,
            iii1,
            iii2,
            iii3,
            sigma_tilde,
            level,
        })
    }
}

/// Truncated trace-series values of the population `Sigma_1` and `Sigma_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalSigma {
    pub sigma1: Matrix2<f64>,
    pub sigma2: Matrix2<f64>,
}

/// Sums the series over powers `G^0 .. G^m` of `G = alpha I + beta W`.
/// Rows index the instruments `(Y, WY)`, columns the regressors.
pub fn theoretical_sigma(
    w: &WeightMatrix,
    theta: (f64, f64),
    sigma: f64,
    fvals: &[f64],
    m: usize,
) -> Result<TheoreticalSigma> {
    let (alpha, beta) = theta;
    check_stationary(alpha, beta)?;
    if m < 1 {
        return Err(RgamError::Config("truncation order must be at least 1".into()));
    }
    let n = w.n();
    if fvals.len() != n {
        return Err(RgamError::ShapeMismatch(format!(
            "network has {n} nodes but f has {} entries",
            fvals.len()
        )));
    }
    let wd = w.to_dense();
    let g = DMatrix::identity(n, n) * alpha + &wd * beta;
    let mu = (DMatrix::identity(n, n) - &g)
        .lu()
        .solve(&DVector::from_column_slice(fvals))
        .ok_or_else(|| RgamError::SingularSystem("I - G".into()))?;

    // tr(P' Q) is the elementwise product sum.
    let tr = |p: &DMatrix<f64>, q: &DMatrix<f64>| p.component_mul(q).sum();
    let (mut a0, mut a1) = (0.0, 0.0);
    let (mut b0, mut b_fwd, mut b_bwd) = (0.0, 0.0, 0.0);
    let (mut c0, mut c1) = (0.0, 0.0);
    let mut pk = DMatrix::identity(n, n);
    let mut wpk = wd.clone();
    for _ in 0..=m {
        let pk1 = &g * &pk;
        let wpk1 = &wd * &pk1;
        a0 += tr(&pk, &pk);
        a1 += tr(&pk, &pk1);
        b0 += tr(&wpk, &pk);
        b_fwd += tr(&wpk, &pk1);
        b_bwd += tr(&wpk1, &pk);
        c0 += tr(&wpk, &wpk);
        c1 += tr(&wpk, &wpk1);
        pk = pk1;
        wpk = wpk1;
    }
    let s = sigma * sigma / n as f64;
    let nf = n as f64;
    let wmu = &wd * &mu;
    let m11 = mu.dot(&mu) / nf;
    let m12 = mu.dot(&wmu) / nf;
    let m22 = wmu.dot(&wmu) / nf;

    let minus = Matrix2::new(m11 + s * a0, m12 + s * b0, m12 + s * b0, m22 + s * c0);
    let plus = Matrix2::new(m11 + s * a1, m12 + s * b_bwd, m12 + s * b_fwd, m22 + s * c1);
    Ok(TheoreticalSigma {
        sigma1: plus - minus,
        sigma2: minus * 2.0 - plus - plus.transpose(),
    })
}
