//! Python bindings for simulation, fitting, replication and diagnostics.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rgam_core::baseline::{mape_rolling, Method};
use rgam_core::diagnostics::diagnose;
use rgam_core::experiment::{run_replications, simulate_draw, ExperimentConfig};
use rgam_core::fit::{fit_rgam, FitOptions, RgamFit};
use rgam_core::graphon::{row_normalize, Network};
use rgam_core::iv::Sigma2Mode;
use rgam_core::sim::{Covariates, PanelSeries};
use rgam_core::smooth::{Kernel, DEFAULT_H0};
use rgam_core::RgamError;

fn to_py(e: RgamError) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Node-major rows `panel[i][t]`, `t = 0..=T`.
fn panel_from_rows(rows: &[Vec<f64>]) -> PyResult<PanelSeries> {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("panel rows must share a length of at least 2"));
    }
    let mut data = Vec::with_capacity(n * width);
    for t in 0..width {
        data.extend(rows.iter().map(|r| r[t]));
    }
    PanelSeries::new(n, width - 1, data).map_err(to_py)
}

fn panel_to_rows(y: &PanelSeries) -> Vec<Vec<f64>> {
    (0..y.n())
        .map(|i| (0..=y.t_len()).map(|t| y.get(i, t)).collect())
        .collect()
}

fn config_from(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value: String = v.str()?.extract()?;
            let value = if key == "gamma" {
                value.trim_matches(|c| c == '[' || c == ']' || c == '(' || c == ')').to_string()
            } else {
                value
            };
            cfg.set(&key, &value, Path::new(".")).map_err(to_py)?;
        }
    }
    Ok(cfg)
}

/// Undirected graph on nodes `0..n`.
#[pyclass(name = "Network", module = "rgam")]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: Network::from_edges(n, &edges).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    /// Diagnostics as a JSON string.
    #[pyo3(signature = (approx_bottleneck = false))]
    fn diagnose(&self, approx_bottleneck: bool) -> PyResult<String> {
        serde_json::to_string(&diagnose(&self.inner, approx_bottleneck))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Network(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

/// One simulated data set.
#[pyclass(name = "Draw", module = "rgam", get_all)]
struct PyDraw {
    panel: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    covariates: Vec<Vec<f64>>,
    n: usize,
    truth_json: String,
}

#[pymethods]
impl PyDraw {
    fn network(&self) -> PyResult<PyNetwork> {
        PyNetwork::new(self.n, self.edges.clone())
    }
}

/// Draws a network, covariates and panel. Keyword arguments are experiment
/// keys such as `setting`, `n`, `t`, `seed`, `sigma` or `gamma`.
#[pyfunction]
#[pyo3(signature = (trim_isolated = true, **kwargs))]
fn simulate(trim_isolated: bool, kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<PyDraw> {
    let cfg = config_from(kwargs)?;
    let draw = simulate_draw(&cfg, trim_isolated).map_err(to_py)?;
    let truth = serde_json::to_string(&draw.truth(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let u = &draw.covariates;
    Ok(PyDraw {
        panel: panel_to_rows(&draw.panel),
        edges: draw.network.edges(),
        covariates: (0..u.n()).map(|i| u.row(i).to_vec()).collect(),
        n: draw.network.n(),
        truth_json: truth,
    })
}

/// Fitted model with its inference report.
#[pyclass(name = "Fit", module = "rgam")]
struct PyFit {
    fit: RgamFit,
    report_json: String,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn alpha(&self) -> f64 {
        self.fit.theta.alpha_hat
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.fit.theta.beta_hat
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.fit.theta.sigma2_hat
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.fit.gamma.gamma_hat.clone()
    }

    #[getter]
    fn fhat(&self) -> Vec<f64> {
        self.fit.fhat.values.clone()
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.fit.kernel.bandwidth
    }

    fn report_json(&self) -> String {
        self.report_json.clone()
    }
}

struct Inputs {
    panel: PanelSeries,
    net: Network,
    u: Covariates,
}

fn inputs(panel: Vec<Vec<f64>>, edges: Vec<(usize, usize)>, covariates: Vec<Vec<f64>>) -> PyResult<Inputs> {
    let panel = panel_from_rows(&panel)?;
    let net = Network::from_edges(panel.n(), &edges).map_err(to_py)?;
    let u = if covariates.is_empty() || covariates.iter().all(Vec::is_empty) {
        Covariates::empty(panel.n())
    } else {
        Covariates::from_rows(&covariates).map_err(to_py)?
    };
    Ok(Inputs { panel, net, u })
}

fn options(h0: f64, bandwidth: Option<f64>, kernel: &str, level: f64, sigma2_raw: bool) -> PyResult<FitOptions> {
    Ok(FitOptions {
        h0,
        bandwidth,
        kernel: kernel.parse::<Kernel>().map_err(to_py)?,
        level,
        sigma2_mode: if sigma2_raw { Sigma2Mode::Raw } else { Sigma2Mode::Centered },
    })
}

/// Fits the model to node-major panel rows, an edge list and covariate rows.
#[pyfunction]
#[pyo3(signature = (panel, edges, covariates, h0 = DEFAULT_H0, bandwidth = None, kernel = "triweight", level = 0.95, sigma2_raw = false))]
#[allow(clippy::too_many_arguments)]
fn fit(
    panel: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    covariates: Vec<Vec<f64>>,
    h0: f64,
    bandwidth: Option<f64>,
    kernel: &str,
    level: f64,
    sigma2_raw: bool,
) -> PyResult<PyFit> {
    let inp = inputs(panel, edges, covariates)?;
    let opts = options(h0, bandwidth, kernel, level, sigma2_raw)?;
    let w = row_normalize(&inp.net).map_err(to_py)?;
    let fit = fit_rgam(&inp.panel, &inp.net, &w, &inp.u, &opts).map_err(to_py)?;
    let labels: Vec<usize> = (0..inp.panel.n()).collect();
    let report = fit
        .report(&inp.u, level, &labels, Some(diagnose(&inp.net, false)))
        .and_then(|r| r.to_json())
        .map_err(to_py)?;
    Ok(PyFit {
        fit,
        report_json: report,
    })
}

/// Rolling one-step mean absolute errors as `(target_t, mae or None)` pairs.
#[pyfunction]
#[pyo3(signature = (panel, edges, covariates, targets, method = "rgam", h0 = DEFAULT_H0))]
fn predict(
    panel: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    covariates: Vec<Vec<f64>>,
    targets: Vec<usize>,
    method: &str,
    h0: f64,
) -> PyResult<Vec<(usize, Option<f64>)>> {
    let inp = inputs(panel, edges, covariates)?;
    let method: Method = method.parse().map_err(to_py)?;
    let opts = options(h0, None, "triweight", 0.95, false)?;
    let w = row_normalize(&inp.net).map_err(to_py)?;
    let report = mape_rolling(&inp.panel, &inp.net, &w, &inp.u, &targets, method, &opts).map_err(to_py)?;
    Ok(report.weeks.iter().map(|wk| (wk.target_t, wk.mae)).collect())
}

/// Runs a Monte Carlo study and returns the summary as JSON. Keyword
/// arguments are experiment keys (`setting`, `n`, `t`, `reps`, `seed`, ...).
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn replicate(py: Python<'_>, kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<String> {
    let cfg = config_from(kwargs)?;
    let run = py.detach(|| run_replications(&cfg)).map_err(to_py)?;
    run.summary().to_json().map_err(to_py)
}

#[pymodule]
fn rgam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyDraw>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    Ok(())
}
