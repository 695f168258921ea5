//! End-to-end estimation: IV step, residual profiling, kernel smoothing and
//! inference, collected into a serialisable report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::NetworkDiagnostics;
use crate::error::{Result, RgamError};
use crate::graphon::{Network, WeightMatrix};
use crate::inference::{ci_theta, FInference, GammaInference, PanelSummaries, SmoothInference, ThetaInference};
use crate::iv::{estimate_theta_with, residual_means, Sigma2Mode, ThetaEstimate};
use crate::sim::{Covariates, PanelSeries};
use crate::smooth::{
    codegree_distance, estimate_f_weighted, estimate_gamma_weighted, select_bandwidth, FHatVector,
    GammaEstimate, Kernel, KernelConfig, KernelWeights, DEFAULT_H0,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub h0: f64,
    /// Fixed bandwidth; when absent the quantile rule with `h0` is used.
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    pub level: f64,
    pub sigma2_mode: Sigma2Mode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            h0: DEFAULT_H0,
            bandwidth: None,
            kernel: Kernel::Triweight,
            level: 0.95,
            sigma2_mode: Sigma2Mode::Centered,
        }
    }
}

impl FitOptions {
    pub fn kernel_config(&self, net: &Network) -> Result<(KernelConfig, KernelWeights)> {
        let d = codegree_distance(net);
        let h = match self.bandwidth {
            Some(h) => h,
            None => select_bandwidth(&d, self.h0, net.n())?,
        };
        let cfg = KernelConfig::new(h, self.kernel)?;
        let weights = KernelWeights::new(&d, &cfg);
        Ok((cfg, weights))
    }
}

#[derive(Debug, Clone)]
pub struct RgamFit {
    pub theta: ThetaEstimate,
    pub ehat: Vec<f64>,
    pub kernel: KernelConfig,
    pub weights: KernelWeights,
    pub gamma: GammaEstimate,
    pub fhat: FHatVector,
    pub summaries: PanelSummaries,
}

pub struct FitInference {
    pub theta: ThetaInference,
    pub gamma: GammaInference,
    pub f: Vec<FInference>,
}

pub fn fit_rgam(
    y: &PanelSeries,
    net: &Network,
    w: &WeightMatrix,
    u: &Covariates,
    opts: &FitOptions,
) -> Result<RgamFit> {
    let (cfg, weights) = opts.kernel_config(net)?;
    fit_rgam_weighted(y, w, u, weights, cfg, opts.sigma2_mode)
}

/// Fit with precomputed kernel weights (the network, hence the weights, is
/// often reused across panels).
pub fn fit_rgam_weighted(
    y: &PanelSeries,
    w: &WeightMatrix,
    u: &Covariates,
    weights: KernelWeights,
    kernel: KernelConfig,
    mode: Sigma2Mode,
) -> Result<RgamFit> {
    if u.n() != y.n() || weights.n() != y.n() {
        return Err(RgamError::ShapeMismatch(format!(
            "panel has {} nodes, covariates {}, kernel weights {}",
            y.n(),
            u.n(),
            weights.n()
        )));
    }
    let theta = estimate_theta_with(y, w, mode)?;
    let ehat = residual_means(y, w, &theta)?;
    let gamma = estimate_gamma_weighted(u, &ehat, &weights)?;
    let fhat = estimate_f_weighted(u, &ehat, &gamma, &weights)?;
    let summaries = PanelSummaries::new(y, w)?;
    Ok(RgamFit {
        theta,
        ehat,
        kernel,
        weights,
        gamma,
        fhat,
        summaries,
    })
}

impl RgamFit {
    /// `f^(C_i) + gamma^' U_i`, the fitted node baseline.
    pub fn node_baseline(&self, u: &Covariates) -> Vec<f64> {
        (0..u.n())
            .map(|i| self.fhat.values[i] + u.dot(i, &self.gamma.gamma_hat))
            .collect()
    }

    pub fn inference(&self, u: &Covariates, level: f64, nodes: &[usize]) -> Result<FitInference> {
        let smooth = SmoothInference::new(&self.theta, &self.gamma, u, &self.weights, &self.summaries)?;
        Ok(FitInference {
            theta: ci_theta(&self.theta, level)?,
            gamma: smooth.ci_gamma(level)?,
            f: nodes
                .iter()
                .map(|&i| smooth.ci_f(i, &self.fhat, level))
                .collect::<Result<_>>()?,
        })
    }

    pub fn report(
        &self,
        u: &Covariates,
        level: f64,
        labels: &[usize],
        diagnostics: Option<NetworkDiagnostics>,
    ) -> Result<InferenceReport> {
        let nodes: Vec<usize> = (0..u.n()).collect();
        let inf = self.inference(u, level, &nodes)?;
        let scale = self.theta.scale().sqrt();
        let param = |est: f64, se: f64, ci: (f64, f64)| ParamReport {
            est,
            se: se / scale,
            ci: [ci.0, ci.1],
        };
        Ok(InferenceReport {
            n: self.theta.n,
            t_len: self.theta.t_len,
            level,
            bandwidth: self.kernel.bandwidth,
            kernel: self.kernel.kernel,
            sigma2: self.theta.sigma2_hat,
            theta: ThetaReport {
                alpha: param(self.theta.alpha_hat, inf.theta.se_alpha, inf.theta.ci_alpha),
                beta: param(self.theta.beta_hat, inf.theta.se_beta, inf.theta.ci_beta),
            },
            gamma: (0..u.p())
                .map(|k| param(self.gamma.gamma_hat[k], inf.gamma.se[k], inf.gamma.ci[k]))
                .collect(),
            f: inf
                .f
                .iter()
                .map(|fi| NodeReport {
                    node: labels.get(fi.node).copied().unwrap_or(fi.node),
                    est: fi.estimate,
                    se: fi.se_c / scale,
                    ci: [fi.ci.0, fi.ci.1],
                })
                .collect(),
            diagnostics,
        })
    }
}

/// Point estimate, standard error of the estimate and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub est: f64,
    pub se: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub alpha: ParamReport,
    pub beta: ParamReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: usize,
    pub est: f64,
    pub se: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub n: usize,
    pub t_len: usize,
    pub level: f64,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub sigma2: f64,
    pub theta: ThetaReport,
    pub gamma: Vec<ParamReport>,
    pub f: Vec<NodeReport>,
    pub diagnostics: Option<NetworkDiagnostics>,
}

impl InferenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Long table `parameter,index,est,se,ci_lo,ci_hi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,index,est,se,ci_lo,ci_hi\n");
        let mut row = |name: &str, idx: usize, p: &ParamReport| {
            let _ = writeln!(out, "{name},{idx},{},{},{},{}", p.est, p.se, p.ci[0], p.ci[1]);
        };
        row("alpha", 0, &self.theta.alpha);
        row("beta", 0, &self.theta.beta);
        for (k, g) in self.gamma.iter().enumerate() {
            row("gamma", k + 1, g);
        }
        for f in &self.f {
            let p = ParamReport {
                est: f.est,
                se: f.se,
                ci: f.ci,
            };
            row("f", f.node, &p);
        }
        let _ = writeln!(out, "sigma2,0,{},NA,NA,NA", self.sigma2);
        out
    }
}
