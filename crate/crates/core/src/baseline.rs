//! Pooled least-squares network autoregression and rolling one-step-ahead
//! prediction errors for comparing it with the latent-baseline model.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::fit::{fit_rgam_weighted, FitOptions};
use crate::graphon::{Network, WeightMatrix};
use crate::iv::{estimate_theta, neighbour_panel};
use crate::sim::{Covariates, PanelSeries};

pub const RANK_CONDITION_LIMIT: f64 = 1e12;

/// Common-intercept network autoregression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarEstimate {
    pub intercept: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
}

/// Normal equations of `Y_{i,t+1}` on `(1, Y_{i,t}, (W Y_t)_i, U_i)`, or on
/// `(1, U_i)` after removing `alpha Y + beta W Y` when `theta` is given.
fn normal_equations(
    y: &PanelSeries,
    w: &WeightMatrix,
    u: &Covariates,
    theta: Option<(f64, f64)>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if u.n() != y.n() {
        return Err(RgamError::ShapeMismatch(format!(
            "panel has {} nodes, covariates {}",
            y.n(),
            u.n()
        )));
    }
    if y.t_len() < 1 {
        return Err(RgamError::TooShort { needed: 1, got: y.t_len() });
    }
    let wy = neighbour_panel(y, w)?;
    let lagged = if theta.is_some() { 0 } else { 2 };
    let k = 1 + lagged + u.p();
    let mut xtx = DMatrix::zeros(k, k);
    let mut xty = DVector::zeros(k);
    let mut row = vec![0.0; k];
    for t in 0..y.t_len() {
        for i in 0..y.n() {
            row[0] = 1.0;
            let mut target = y.get(i, t + 1);
            match theta {
                None => {
                    row[1] = y.get(i, t);
                    row[2] = wy.get(i, t);
                }
                Some((a, b)) => target -= a * y.get(i, t) + b * wy.get(i, t),
            }
            row[1 + lagged..].copy_from_slice(u.row(i));
            for r in 0..k {
                xty[r] += row[r] * target;
                for c in r..k {
                    xtx[(r, c)] += row[r] * row[c];
                }
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            xtx[(r, c)] = xtx[(c, r)];
        }
    }
    Ok((xtx, xty))
}

fn solve_normal(xtx: &DMatrix<f64>, xty: &DVector<f64>, allow_min_norm: bool) -> Result<DVector<f64>> {
    let svd = xtx.clone().svd(true, true);
    let hi = svd.singular_values.max();
    let lo = svd.singular_values.min();
    let cond = if hi == 0.0 { f64::INFINITY } else { hi / lo };
    if cond < RANK_CONDITION_LIMIT {
        return Ok(svd.solve(xty, 0.0).expect("SVD has both factors"));
    }
    if !allow_min_norm {
        return Err(RgamError::RankDeficient(cond));
    }
    Ok(svd
        .solve(xty, hi * 1e-12)
        .expect("SVD has both factors"))
}

fn unpack(beta: &DVector<f64>, theta: Option<(f64, f64)>) -> NarEstimate {
    match theta {
        None => NarEstimate {
            intercept: beta[0],
            alpha: beta[1],
            beta: beta[2],
            gamma: beta.iter().skip(3).copied().collect(),
        },
        Some((a, b)) => NarEstimate {
            intercept: beta[0],
            alpha: a,
            beta: b,
            gamma: beta.iter().skip(1).copied().collect(),
        },
    }
}

pub fn fit_nar_ls(y: &PanelSeries, w: &WeightMatrix, u: &Covariates) -> Result<NarEstimate> {
    let (xtx, xty) = normal_equations(y, w, u, None)?;
    Ok(unpack(&solve_normal(&xtx, &xty, false)?, None))
}

/// Minimum-norm least squares; never fails on a rank-deficient design.
pub fn fit_nar_ls_min_norm(y: &PanelSeries, w: &WeightMatrix, u: &Covariates) -> Result<NarEstimate> {
    let (xtx, xty) = normal_equations(y, w, u, None)?;
    Ok(unpack(&solve_normal(&xtx, &xty, true)?, None))
}

/// NAR with `(alpha, beta)` from the differenced IV estimator and the common
/// intercept and covariate effect from least squares given those.
pub fn fit_nar_iv(y: &PanelSeries, w: &WeightMatrix, u: &Covariates) -> Result<NarEstimate> {
    let theta = estimate_theta(y, w)?;
    let t = Some((theta.alpha_hat, theta.beta_hat));
    let (xtx, xty) = normal_equations(y, w, u, t)?;
    Ok(unpack(&solve_normal(&xtx, &xty, true)?, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    /// Node-specific baseline `f^(C_i) + gamma^' U_i`.
    Rgam { alpha: f64, beta: f64, baseline: Vec<f64> },
    Nar(NarEstimate),
}

/// One-step forecast from the last observed column `y_t`.
pub fn predict_one_step(model: &Predictor, y_t: &[f64], w: &WeightMatrix, u: &Covariates) -> Vec<f64> {
    let wy = w.apply(y_t);
    match model {
        Predictor::Rgam { alpha, beta, baseline } => (0..y_t.len())
            .map(|i| alpha * y_t[i] + beta * wy[i] + baseline[i])
            .collect(),
        Predictor::Nar(m) => (0..y_t.len())
            .map(|i| m.intercept + m.alpha * y_t[i] + m.beta * wy[i] + u.dot(i, &m.gamma))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rgam,
    NarOls,
    NarIv,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rgam => "rgam",
            Method::NarOls => "nar_ols",
            Method::NarIv => "nar_iv",
        }
    }

    /// Smallest target column the method can forecast.
    pub fn min_target(self) -> usize {
        match self {
            Method::Rgam | Method::NarIv => 4,
            Method::NarOls => 2,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = RgamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgam" => Ok(Method::Rgam),
            "nar_ols" | "nar" | "ols" => Ok(Method::NarOls),
            "nar_iv" | "iv" => Ok(Method::NarIv),
            other => Err(RgamError::Config(format!("unknown prediction method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekError {
    pub target_t: usize,
    /// Mean absolute error over nodes; absent when the fit failed.
    pub mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub method: String,
    pub weeks: Vec<WeekError>,
}

impl PredictionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target_t,method,mae\n");
        self.append_rows(&mut out);
        out
    }

    pub fn append_rows(&self, out: &mut String) {
        for wk in &self.weeks {
            match wk.mae {
                Some(m) => writeln!(out, "{},{},{}", wk.target_t, self.method, m),
                None => writeln!(out, "{},{},NA", wk.target_t, self.method),
            }
            .expect("writing to a String cannot fail");
        }
    }

    pub fn mae(&self, target_t: usize) -> Option<f64> {
        self.weeks.iter().find(|w| w.target_t == target_t).and_then(|w| w.mae)
    }
}

fn fit_predictor(
    method: Method,
    history: &PanelSeries,
    net: &Network,
    w: &WeightMatrix,
    u: &Covariates,
    opts: &FitOptions,
) -> Result<Predictor> {
    Ok(match method {
        Method::NarOls => Predictor::Nar(fit_nar_ls_min_norm(history, w, u)?),
        Method::NarIv => Predictor::Nar(fit_nar_iv(history, w, u)?),
        Method::Rgam => {
            let (cfg, weights) = opts.kernel_config(net)?;
            let fit = fit_rgam_weighted(history, w, u, weights, cfg, opts.sigma2_mode)?;
            Predictor::Rgam {
                alpha: fit.theta.alpha_hat,
                beta: fit.theta.beta_hat,
                baseline: fit.node_baseline(u),
            }
        }
    })
}

/// For each target column `tau`, fits on columns `0..tau` and scores the
/// forecast of column `tau` made from column `tau - 1`.
pub fn mape_rolling(
    y: &PanelSeries,
    net: &Network,
    w: &WeightMatrix,
    u: &Covariates,
    targets: &[usize],
    method: Method,
    opts: &FitOptions,
) -> Result<PredictionReport> {
    for &tau in targets {
        if tau < method.min_target() || tau > y.t_len() {
            return Err(RgamError::InsufficientHistory {
                target: tau,
                needed: method.min_target(),
            });
        }
    }
    let weeks = targets
        .iter()
        .map(|&tau| {
            let outcome = y
                .head(tau)
                .and_then(|history| fit_predictor(method, &history, net, w, u, opts))
                .map(|model| {
                    let pred = predict_one_step(&model, y.col(tau - 1), w, u);
                    let actual = y.col(tau);
                    pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / actual.len() as f64
                });
            match outcome {
                Ok(mae) => WeekError { target_t: tau, mae: Some(mae), error: None },
                Err(e) => WeekError { target_t: tau, mae: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(PredictionReport {
        method: method.label().to_string(),
        weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{row_normalize, sample_network, GraphonSpec};
    use crate::rng::RngStreams;
    use crate::sim::{f_values, simulate, LatentBaseline, ModelParams};
    use proptest::prelude::*;

    fn setup(n: usize, seed: u64) -> (Network, WeightMatrix, Covariates, crate::graphon::LatentSample) {
        let (net, lat) = sample_network(&GraphonSpec::constant(0.4).unwrap(), n, seed).unwrap();
        let w = row_normalize(&net).unwrap();
        let u = Covariates::standard_normal(n, 1, &RngStreams::new(seed));
        (net, w, u, lat)
    }

    #[test]
    fn noiseless_nar_is_recovered() {
        let (_, w, u, lat) = setup(30, 3);
        let p = ModelParams::new(0.3, 0.4, vec![1.2], LatentBaseline::Constant { value: 0.7 }, 0.0).unwrap();
        let f = f_values(&p, &lat, &u).unwrap();
        let y = simulate(&p, &w, &f, 12, 0, 1).unwrap();
        let m = fit_nar_ls(&y, &w, &u).unwrap();
        assert!((m.intercept - 0.7).abs() < 1e-8);
        assert!((m.alpha - 0.3).abs() < 1e-8);
        assert!((m.beta - 0.4).abs() < 1e-8);
        assert!((m.gamma[0] - 1.2).abs() < 1e-8);
        let pred = predict_one_step(&Predictor::Nar(m), y.col(11), &w, &u);
        for (a, b) in pred.iter().zip(y.col(12)) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn toy_normal_equations() {
        let net = Network::from_edges(2, &[(0, 1)]).unwrap();
        let w = row_normalize(&net).unwrap();
        let u = Covariates::empty(2);
        let y = PanelSeries::from_columns(&[vec![1.0, 0.0], vec![0.5, 2.0], vec![1.5, -1.0], vec![0.2, 0.9]]).unwrap();
        let m = fit_nar_ls(&y, &w, &u).unwrap();
        // Rows (1, y_i, y_j) -> y_i next, solved by Cramer's rule on X'X.
        let mut x = Vec::new();
        let mut r = Vec::new();
        for t in 0..3 {
            for i in 0..2 {
                x.push([1.0, y.get(i, t), y.get(1 - i, t)]);
                r.push(y.get(i, t + 1));
            }
        }
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for (row, target) in x.iter().zip(&r) {
            for p in 0..3 {
                b[p] += row[p] * target;
                for q in 0..3 {
                    a[p][q] += row[p] * row[q];
                }
            }
        }
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let sol: Vec<f64> = (0..3)
            .map(|k| {
                let mut ak = a;
                for p in 0..3 {
                    ak[p][k] = b[p];
                }
                det(ak) / d
            })
            .collect();
        assert!((m.intercept - sol[0]).abs() < 1e-10);
        assert!((m.alpha - sol[1]).abs() < 1e-10);
        assert!((m.beta - sol[2]).abs() < 1e-10);
    }

    #[test]
    fn residuals_are_orthogonal_to_design() {
        let (_, w, u, lat) = setup(25, 8);
        let p = ModelParams::new(0.2, 0.3, vec![1.5], LatentBaseline::Identity, 1.0).unwrap();
        let f = f_values(&p, &lat, &u).unwrap();
        let y = simulate(&p, &w, &f, 20, 50, 2).unwrap();
        let m = fit_nar_ls(&y, &w, &u).unwrap();
        let wy = neighbour_panel(&y, &w).unwrap();
        let mut dots = [0.0; 4];
        for t in 0..20 {
            for i in 0..25 {
                let row = [1.0, y.get(i, t), wy.get(i, t), u.get(i, 0)];
                let fitted = m.intercept + m.alpha * row[1] + m.beta * row[2] + m.gamma[0] * row[3];
                let r = y.get(i, t + 1) - fitted;
                for k in 0..4 {
                    dots[k] += r * row[k];
                }
            }
        }
        assert!(dots.iter().all(|d| d.abs() < 1e-8), "{dots:?}");
    }

    #[test]
    fn nar_bias_under_heterogeneous_baselines() {
        let reps = 200;
        let (mut nar, mut iv) = (0.0, 0.0);
        for r in 0..reps {
            let (net, lat) = sample_network(&GraphonSpec::piecewise_constant(), 100, 500 + r).unwrap();
            let keep: Vec<usize> = (0..100).filter(|&i| net.degree(i) > 0).collect();
            let (net, lat) = (net.induced(&keep), lat.select(&keep));
            let w = row_normalize(&net).unwrap();
            let u = Covariates::empty(net.n());
            let p = ModelParams::new(0.2, 0.2, vec![], LatentBaseline::Step { threshold: 0.5, below: 2.0, above: -2.0 }, 1.0).unwrap();
            let f = f_values(&p, &lat, &u).unwrap();
            let y = simulate(&p, &w, &f, 100, 100, 900 + r).unwrap();
            nar += fit_nar_ls(&y, &w, &u).unwrap().beta - 0.2;
            iv += estimate_theta(&y, &w).unwrap().beta_hat - 0.2;
        }
        let (nar, iv) = (nar / reps as f64, iv / reps as f64);
        assert!(nar.abs() > 0.05, "NAR bias {nar}");
        assert!(iv.abs() < 0.02, "IV bias {iv}");
    }

    #[test]
    fn noiseless_rgam_predicts_exactly() {
        let (net, w, u, lat) = setup(20, 4);
        let p = ModelParams::new(0.3, 0.2, vec![1.0], LatentBaseline::Identity, 0.0).unwrap();
        let f = f_values(&p, &lat, &u).unwrap();
        let y = simulate(&p, &w, &f, 6, 0, 1).unwrap();
        let model = Predictor::Rgam { alpha: 0.3, beta: 0.2, baseline: f.clone() };
        let pred = predict_one_step(&model, y.col(5), &w, &u);
        for (a, b) in pred.iter().zip(y.col(6)) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = Predictor::Rgam { alpha: 0.0, beta: 0.0, baseline: f.clone() };
        assert_eq!(predict_one_step(&flat, y.col(5), &w, &u), f);
        let _ = net;
    }

    #[test]
    fn constant_and_perturbed_panels() {
        let (net, w, _, _) = setup(10, 6);
        let u = Covariates::empty(10);
        let y = PanelSeries::new(10, 8, vec![3.0; 90]).unwrap();
        let opts = FitOptions::default();
        let nar = mape_rolling(&y, &net, &w, &u, &[5, 6, 7, 8], Method::NarOls, &opts).unwrap();
        assert!(nar.weeks.iter().all(|wk| wk.mae.unwrap().abs() < 1e-10));
        let iv = mape_rolling(&y, &net, &w, &u, &[5, 6], Method::Rgam, &opts).unwrap();
        assert!(iv.weeks.iter().all(|wk| wk.mae.is_none() && wk.error.as_ref().unwrap().contains("singular")));
        assert!(iv.to_csv().contains("5,rgam,NA"));

        let mut data = vec![3.0; 90];
        data[8 * 10 + 4] += 0.7;
        let bumped = PanelSeries::new(10, 8, data).unwrap();
        let rep = mape_rolling(&bumped, &net, &w, &u, &[8], Method::NarOls, &opts).unwrap();
        assert!((rep.mae(8).unwrap() - 0.07).abs() < 1e-10);

        assert!(matches!(
            mape_rolling(&y, &net, &w, &u, &[3], Method::Rgam, &opts),
            Err(RgamError::InsufficientHistory { .. })
        ));
        assert!(mape_rolling(&y, &net, &w, &u, &[9], Method::NarOls, &opts).is_err());

        let json = serde_json::to_string(&nar).unwrap();
        assert_eq!(serde_json::from_str::<PredictionReport>(&json).unwrap(), nar);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn forecasts_are_affine_in_last_column(scale in 0.1f64..5.0, seed in 0u64..100) {
            let (_, w, u, _) = setup(15, seed);
            let baseline: Vec<f64> = (0..15).map(|i| i as f64 * 0.1).collect();
            let model = Predictor::Rgam { alpha: 0.3, beta: -0.2, baseline: baseline.clone() };
            let nar = Predictor::Nar(NarEstimate { intercept: 0.4, alpha: 0.1, beta: 0.5, gamma: vec![0.3] });
            let y: Vec<f64> = (0..15).map(|i| ((i * 37 + seed as usize) % 11) as f64 - 5.0).collect();
            let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
            for (m, offset) in [(&model, baseline.clone()), (&nar, (0..15).map(|i| 0.4 + 0.3 * u.get(i, 0)).collect())] {
                let a = predict_one_step(m, &y, &w, &u);
                let b = predict_one_step(m, &scaled, &w, &u);
                for i in 0..15 {
                    prop_assert!(((b[i] - offset[i]) - scale * (a[i] - offset[i])).abs() < 1e-10);
                }
            }
        }
    }
}
