//! Simulation settings, the flat `key = value` experiment configuration and
//! the Monte Carlo replication harness behind the error and coverage tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::fit::{fit_rgam, fit_rgam_weighted, FitOptions};
use crate::graphon::{row_normalize, sample_network_with, GraphonSpec, LatentSample, Network, WeightMatrix};
use crate::io::{parse_grid, read_to_string, Truth};
use crate::iv::Sigma2Mode;
use crate::rng::{RngStreams, Stream};
use crate::sim::{check_stationary, f_values, simulate_from, Covariates, Innovation, LatentBaseline, ModelParams, PanelSeries};
use crate::smooth::{Kernel, KernelConfig, KernelWeights};

/// Network redraws allowed before a replication gives up on finding a graph
/// without isolated nodes.
pub const MAX_NETWORK_ATTEMPTS: u64 = 100;

/// Share of failed replications above which a run counts as failed.
pub const FAILURE_TOLERANCE: f64 = 0.05;

const FIXED_NETWORK_CHILD: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    I,
    II,
    III,
    Custom,
}

impl Setting {
    pub fn label(self) -> &'static str {
        match self {
            Setting::I => "I",
            Setting::II => "II",
            Setting::III => "III",
            Setting::Custom => "custom",
        }
    }

    /// Built-in graphon, `None` for custom runs.
    pub fn graphon(self) -> Option<GraphonSpec> {
        match self {
            Setting::I => Some(GraphonSpec::piecewise_smooth()),
            Setting::II => Some(GraphonSpec::SmoothLogistic),
            Setting::III => Some(GraphonSpec::piecewise_constant()),
            Setting::Custom => None,
        }
    }

    pub fn baseline(self) -> Option<LatentBaseline> {
        match self {
            Setting::I | Setting::III => Some(LatentBaseline::half_step()),
            Setting::II => Some(LatentBaseline::Identity),
            Setting::Custom => None,
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = RgamError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Setting::I),
            "ii" | "2" => Ok(Setting::II),
            "iii" | "3" => Ok(Setting::III),
            "custom" => Ok(Setting::Custom),
            other => Err(RgamError::Config(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub n: usize,
    pub t_len: usize,
    pub reps: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub h0: f64,
    pub gamma: Vec<f64>,
    pub seed: u64,
    pub outputs: PathBuf,
    pub level: f64,
    /// Hold one network (and its covariates) fixed across replications.
    pub fix_network: bool,
    pub sigma2_mode: Sigma2Mode,
    pub kernel: Kernel,
    pub bandwidth: Option<f64>,
    /// Overrides the setting's graphon; required for custom runs.
    pub graphon: Option<GraphonSpec>,
    /// Overrides the setting's latent baseline; required for custom runs.
    pub baseline: Option<LatentBaseline>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::I,
            n: 50,
            t_len: 10,
            reps: 100,
            burn_in: 300,
            alpha: 0.2,
            beta: 0.2,
            sigma: 1.5,
            h0: 1.5,
            gamma: vec![1.5],
            seed: 1,
            outputs: PathBuf::from("out"),
            level: 0.95,
            fix_network: false,
            sigma2_mode: Sigma2Mode::Centered,
            kernel: Kernel::Triweight,
            bandwidth: None,
            graphon: None,
            baseline: None,
            threads: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| RgamError::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(RgamError::Config(format!("`{key}` expects true or false, got `{value}`"))),
    }
}

/// Graphon by name, or a path to a JSON block grid.
pub fn parse_graphon(value: &str, base: &Path) -> Result<GraphonSpec> {
    match value.trim() {
        "piecewise_smooth" | "block_logistic" => Ok(GraphonSpec::piecewise_smooth()),
        "logistic" | "smooth" => Ok(GraphonSpec::SmoothLogistic),
        "block" | "piecewise_constant" => Ok(GraphonSpec::piecewise_constant()),
        v => {
            if let Some(p) = v.strip_prefix("constant:") {
                return GraphonSpec::constant(parse_num("graphon", p)?);
            }
            let path = base.join(v);
            GraphonSpec::grid(parse_grid(&read_to_string(&path)?)?)
        }
    }
}

/// `zero`, `step`, `identity` or `constant:<value>`.
pub fn parse_baseline(value: &str) -> Result<LatentBaseline> {
    match value.trim() {
        "zero" => Ok(LatentBaseline::Zero),
        "step" => Ok(LatentBaseline::half_step()),
        "identity" => Ok(LatentBaseline::Identity),
        v => match v.strip_prefix("constant:") {
            Some(c) => Ok(LatentBaseline::Constant {
                value: parse_num("baseline", c)?,
            }),
            None => Err(RgamError::Config(format!("unknown baseline `{v}`"))),
        },
    }
}

impl ExperimentConfig {
    /// Sets one key. Relative file paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "setting" => self.setting = value.parse()?,
            "n" => self.n = parse_num(key, value)?,
            "t" | "t_len" => self.t_len = parse_num(key, value)?,
            "reps" => self.reps = parse_num(key, value)?,
            "burn_in" => self.burn_in = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "h0" => self.h0 = parse_num(key, value)?,
            "gamma" => {
                self.gamma = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|g| parse_num(key, g))
                        .collect::<Result<_>>()?
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "outputs" => self.outputs = base.join(value),
            "level" => self.level = parse_num(key, value)?,
            "fix_network" => self.fix_network = parse_bool(key, value)?,
            "sigma2_raw" => {
                self.sigma2_mode = if parse_bool(key, value)? {
                    Sigma2Mode::Raw
                } else {
                    Sigma2Mode::Centered
                }
            }
            "kernel" => self.kernel = value.parse()?,
            "bandwidth" => self.bandwidth = Some(parse_num(key, value)?),
            "graphon" => self.graphon = Some(parse_graphon(value, base)?),
            "baseline" => self.baseline = Some(parse_baseline(value)?),
            "threads" => self.threads = Some(parse_num(key, value)?),
            other => return Err(RgamError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| RgamError::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key, value, base).map_err(|e| RgamError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, base)?;
        Ok(cfg)
    }

    pub fn graphon_spec(&self) -> Result<GraphonSpec> {
        self.graphon
            .clone()
            .or_else(|| self.setting.graphon())
            .ok_or_else(|| RgamError::Config("custom setting needs a `graphon`".into()))
    }

    pub fn baseline_spec(&self) -> Result<LatentBaseline> {
        self.baseline
            .clone()
            .or_else(|| self.setting.baseline())
            .ok_or_else(|| RgamError::Config("custom setting needs a `baseline`".into()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.alpha, self.beta, self.gamma.clone(), self.baseline_spec()?, self.sigma)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            h0: self.h0,
            bandwidth: self.bandwidth,
            kernel: self.kernel,
            level: self.level,
            sigma2_mode: self.sigma2_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(RgamError::Config("reps must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(RgamError::Config(format!("n must be at least 3, got {}", self.n)));
        }
        if self.t_len < 3 {
            return Err(RgamError::TooShort {
                needed: 3,
                got: self.t_len,
            });
        }
        check_stationary(self.alpha, self.beta)?;
        if !(self.h0 > 0.0) {
            return Err(RgamError::Config(format!("h0 must be positive, got {}", self.h0)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(RgamError::OutOfRange {
                what: "level",
                value: self.level,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.threads == Some(0) {
            return Err(RgamError::Config("threads must be at least 1".into()));
        }
        self.graphon_spec()?.validate()?;
        self.params()?.validate()
    }
}

/// One simulated data set together with its ground truth.
#[derive(Debug, Clone)]
pub struct Draw {
    pub network: Network,
    pub latents: LatentSample,
    pub covariates: Covariates,
    /// Latent part `f(C_i)`.
    pub f_latent: Vec<f64>,
    /// Full baseline `f(C_i) + gamma' U_i`.
    pub fvals: Vec<f64>,
    pub panel: PanelSeries,
    /// Original ids of the kept nodes.
    pub labels: Vec<usize>,
    pub trimmed: Vec<usize>,
}

impl Draw {
    pub fn truth(&self, cfg: &ExperimentConfig) -> Truth {
        Truth {
            setting: cfg.setting.label().to_string(),
            seed: cfg.seed,
            n: self.network.n(),
            t_len: cfg.t_len,
            burn_in: cfg.burn_in,
            alpha: cfg.alpha,
            beta: cfg.beta,
            gamma: cfg.gamma.clone(),
            sigma: cfg.sigma,
            f: self.f_latent.clone(),
            fvals: self.fvals.clone(),
            c_raw: self.latents.c_raw.clone(),
            trimmed: self.trimmed.clone(),
        }
    }
}

/// Network, latents and covariates of one draw.
#[derive(Debug, Clone)]
struct NetworkDraw {
    network: Network,
    latents: LatentSample,
    covariates: Covariates,
    resamples: u64,
}

/// Draws until no node is isolated, moving to child streams on each retry.
fn draw_connected_network(spec: &GraphonSpec, cfg: &ExperimentConfig, streams: &RngStreams) -> Result<NetworkDraw> {
    let mut last = None;
    for attempt in 0..MAX_NETWORK_ATTEMPTS {
        let s = if attempt == 0 { *streams } else { streams.child(attempt) };
        let (network, latents) = sample_network_with(spec, cfg.n, &s)?;
        if let Some(&i) = network.isolated_nodes().first() {
            last = Some(i);
            continue;
        }
        let covariates = Covariates::standard_normal(cfg.n, cfg.gamma.len(), &s);
        return Ok(NetworkDraw {
            network,
            latents,
            covariates,
            resamples: attempt,
        });
    }
    Err(RgamError::IsolatedNode(last.unwrap_or(0)))
}

/// Network shared by every replication under `fix_network`.
struct FixedNetwork {
    draw: NetworkDraw,
    w: WeightMatrix,
    kernel: KernelConfig,
    weights: KernelWeights,
}

fn latent_values(baseline: &LatentBaseline, latents: &LatentSample) -> Vec<f64> {
    latents
        .c_raw
        .iter()
        .zip(&latents.c_unit)
        .map(|(&r, &u)| baseline.eval(r, u))
        .collect()
}

/// Single draw for `simulate`, using the master seed directly. Isolated
/// nodes are an error unless `trim_isolated` drops them.
pub fn simulate_draw(cfg: &ExperimentConfig, trim_isolated: bool) -> Result<Draw> {
    cfg.validate()?;
    let spec = cfg.graphon_spec()?;
    let params = cfg.params()?;
    let streams = RngStreams::new(cfg.seed);
    let (mut network, mut latents) = sample_network_with(&spec, cfg.n, &streams)?;
    let mut covariates = Covariates::standard_normal(cfg.n, cfg.gamma.len(), &streams);
    let isolated = network.isolated_nodes();
    let mut labels: Vec<usize> = (0..cfg.n).collect();
    if !isolated.is_empty() {
        if !trim_isolated {
            return Err(RgamError::IsolatedNode(isolated[0]));
        }
        labels.retain(|i| !isolated.contains(i));
        if labels.len() < 3 {
            return Err(RgamError::NotConnected(format!(
                "only {} nodes left after trimming",
                labels.len()
            )));
        }
        network = network.induced(&labels);
        latents = latents.select(&labels);
        covariates = covariates.select(&labels);
    }
    let w = row_normalize(&network)?;
    let f_latent = latent_values(&params.f_spec, &latents);
    let fvals = f_values(&params, &latents, &covariates)?;
    let mut rng = streams.stream(Stream::Innovations);
    let start = vec![0.0; network.n()];
    let panel = simulate_from(&params, &w, &fvals, &start, cfg.t_len, cfg.burn_in, &Innovation::Gaussian, &mut rng)?;
    Ok(Draw {
        network,
        latents,
        covariates,
        f_latent,
        fvals,
        panel,
        labels,
        trimmed: isolated,
    })
}

/// Absolute errors and interval hits of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub resamples: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: Vec<f64>,
    pub err_alpha: f64,
    pub err_beta: f64,
    pub err_gamma: Vec<f64>,
    /// `|f^(C_0) - f(C_0)|`.
    pub err_f_node0: f64,
    /// Node average of `|f^(C_i) - f(C_i)|`.
    pub err_f_avg: f64,
    /// Node maximum of `|f^(C_i) - f(C_i)|`.
    pub err_f_max: f64,
    pub hit_alpha: bool,
    pub hit_beta: bool,
    pub hit_gamma: Vec<bool>,
    pub hit_f_node0: bool,
    /// Share of nodes whose baseline interval covers the truth.
    pub hit_f_share: f64,
    /// Signed errors `f^(C_i) - f(C_i)` for the pooled histogram.
    pub f_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    pub message: String,
}

fn covers(ci: (f64, f64), truth: f64) -> bool {
    ci.0 <= truth && truth <= ci.1
}

fn run_one(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    spec: &GraphonSpec,
    fixed: Option<&FixedNetwork>,
    rep: usize,
) -> Result<RepResult> {
    let rep_streams = RngStreams::new(cfg.seed).child(rep as u64);
    let opts = cfg.fit_options();
    let owned;
    let (draw, w) = match fixed {
        Some(f) => (&f.draw, f.w.clone()),
        None => {
            owned = draw_connected_network(spec, cfg, &rep_streams)?;
            let w = row_normalize(&owned.network)?;
            (&owned, w)
        }
    };
    let f_latent = latent_values(&params.f_spec, &draw.latents);
    let fvals = f_values(params, &draw.latents, &draw.covariates)?;
    let mut rng = rep_streams.stream(Stream::Innovations);
    let start = vec![0.0; cfg.n];
    let y = simulate_from(params, &w, &fvals, &start, cfg.t_len, cfg.burn_in, &Innovation::Gaussian, &mut rng)?;
    let fit = match fixed {
        Some(f) => fit_rgam_weighted(&y, &w, &draw.covariates, f.weights.clone(), f.kernel, opts.sigma2_mode)?,
        None => fit_rgam(&y, &draw.network, &w, &draw.covariates, &opts)?,
    };
    let nodes: Vec<usize> = (0..cfg.n).collect();
    let inf = fit.inference(&draw.covariates, cfg.level, &nodes)?;

    let f_errors: Vec<f64> = fit
        .fhat
        .values
        .iter()
        .zip(&f_latent)
        .map(|(e, t)| e - t)
        .collect();
    let abs: Vec<f64> = f_errors.iter().map(|e| e.abs()).collect();
    let hits_f: Vec<bool> = inf
        .f
        .iter()
        .map(|fi| covers(fi.ci, f_latent[fi.node]))
        .collect();
    let gamma_hat = fit.gamma.gamma_hat.clone();
    Ok(RepResult {
        rep,
        resamples: if fixed.is_some() { 0 } else { draw.resamples },
        alpha_hat: fit.theta.alpha_hat,
        beta_hat: fit.theta.beta_hat,
        err_alpha: (fit.theta.alpha_hat - cfg.alpha).abs(),
        err_beta: (fit.theta.beta_hat - cfg.beta).abs(),
        err_gamma: gamma_hat.iter().zip(&cfg.gamma).map(|(g, t)| (g - t).abs()).collect(),
        gamma_hat,
        err_f_node0: abs[0],
        err_f_avg: abs.iter().sum::<f64>() / abs.len() as f64,
        err_f_max: abs.iter().cloned().fold(0.0, f64::max),
        hit_alpha: covers(inf.theta.ci_alpha, cfg.alpha),
        hit_beta: covers(inf.theta.ci_beta, cfg.beta),
        hit_gamma: inf
            .gamma
            .ci
            .iter()
            .zip(&cfg.gamma)
            .map(|(&ci, &t)| covers(ci, t))
            .collect(),
        hit_f_node0: hits_f[0],
        hit_f_share: hits_f.iter().filter(|&&h| h).count() as f64 / hits_f.len() as f64,
        f_errors,
    })
}

/// Runs every replication. Per-replication seeds are fixed up front and
/// results are collected in replication order, so the outcome does not
/// depend on the number of worker threads.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<ReplicationRun> {
    cfg.validate()?;
    let params = cfg.params()?;
    let spec = cfg.graphon_spec()?;
    let opts = cfg.fit_options();
    let fixed = if cfg.fix_network {
        let streams = RngStreams::new(cfg.seed).child(FIXED_NETWORK_CHILD);
        let draw = draw_connected_network(&spec, cfg, &streams)?;
        let w = row_normalize(&draw.network)?;
        let (kernel, weights) = opts.kernel_config(&draw.network)?;
        Some(FixedNetwork {
            draw,
            w,
            kernel,
            weights,
        })
    } else {
        None
    };

    let work = |rep: usize| -> std::result::Result<RepResult, RepFailure> {
        run_one(cfg, &params, &spec, fixed.as_ref(), rep).map_err(|e| RepFailure {
            rep,
            message: e.to_string(),
        })
    };
    let threads = cfg.threads.or_else(threads_from_env).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RgamError::Config(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| (0..cfg.reps).into_par_iter().map(work).collect());

    let mut results = Vec::with_capacity(cfg.reps);
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(ReplicationRun {
        config: cfg.clone(),
        results,
        failures,
    })
}

/// Worker cap from `RGAM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("RGAM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&t: &usize| t > 0)
}

#[derive(Debug, Clone)]
pub struct ReplicationRun {
    pub config: ExperimentConfig,
    pub results: Vec<RepResult>,
    pub failures: Vec<RepFailure>,
}

impl ReplicationRun {
    pub fn failure_rate(&self) -> f64 {
        self.failures.len() as f64 / self.config.reps as f64
    }

    pub fn too_many_failures(&self) -> bool {
        self.failure_rate() > FAILURE_TOLERANCE
    }

    pub fn summary(&self) -> ReplicationSummary {
        let r = &self.results;
        let p = self.config.gamma.len();
        let mut errors = vec![
            ErrorRow::from_values("alpha", r.iter().map(|x| x.err_alpha)),
            ErrorRow::from_values("beta", r.iter().map(|x| x.err_beta)),
        ];
        for k in 0..p {
            errors.push(ErrorRow::from_values(&gamma_name(k, p), r.iter().map(|x| x.err_gamma[k])));
        }
        errors.push(ErrorRow::from_values("f_node0", r.iter().map(|x| x.err_f_node0)));
        errors.push(ErrorRow::from_values("f_avg", r.iter().map(|x| x.err_f_avg)));
        errors.push(ErrorRow::from_values("f_max", r.iter().map(|x| x.err_f_max)));

        let rate = |hits: Vec<f64>| -> f64 {
            if hits.is_empty() {
                f64::NAN
            } else {
                hits.iter().sum::<f64>() / hits.len() as f64
            }
        };
        let as_f = |b: bool| if b { 1.0 } else { 0.0 };
        let mut coverage = vec![
            CoverageRow::new("alpha", rate(r.iter().map(|x| as_f(x.hit_alpha)).collect()), r.len()),
            CoverageRow::new("beta", rate(r.iter().map(|x| as_f(x.hit_beta)).collect()), r.len()),
        ];
        for k in 0..p {
            coverage.push(CoverageRow::new(
                &gamma_name(k, p),
                rate(r.iter().map(|x| as_f(x.hit_gamma[k])).collect()),
                r.len(),
            ));
        }
        coverage.push(CoverageRow::new("f_node0", rate(r.iter().map(|x| as_f(x.hit_f_node0)).collect()), r.len()));
        coverage.push(CoverageRow::new("f_all", rate(r.iter().map(|x| x.hit_f_share).collect()), r.len()));

        ReplicationSummary {
            setting: self.config.setting.label().to_string(),
            n: self.config.n,
            t_len: self.config.t_len,
            reps: self.config.reps,
            completed: r.len(),
            failed: self.failures.len(),
            network_resamples: r.iter().map(|x| x.resamples).sum(),
            level: self.config.level,
            errors,
            coverage,
        }
    }

    /// Signed baseline errors pooled over nodes and replications.
    pub fn pooled_f_errors(&self) -> Vec<f64> {
        self.results.iter().flat_map(|r| r.f_errors.iter().copied()).collect()
    }
}

fn gamma_name(k: usize, p: usize) -> String {
    if p == 1 {
        "gamma".to_string()
    } else {
        format!("gamma{}", k + 1)
    }
}

/// Mean absolute error and the standard error of that mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub parameter: String,
    pub mean_abs_error: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl ErrorRow {
    fn from_values(name: &str, values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let n = v.len();
        let mean = if n == 0 { f64::NAN } else { v.iter().sum::<f64>() / n as f64 };
        let std_error = if n < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            parameter: name.to_string(),
            mean_abs_error: mean,
            std_error,
            reps: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub parameter: String,
    pub coverage: f64,
    pub reps: usize,
}

impl CoverageRow {
    fn new(name: &str, coverage: f64, reps: usize) -> Self {
        Self {
            parameter: name.to_string(),
            coverage,
            reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub setting: String,
    pub n: usize,
    pub t_len: usize,
    pub reps: usize,
    pub completed: usize,
    pub failed: usize,
    pub network_resamples: u64,
    pub level: f64,
    pub errors: Vec<ErrorRow>,
    pub coverage: Vec<CoverageRow>,
}

impl ReplicationSummary {
    pub fn error(&self, parameter: &str) -> Option<&ErrorRow> {
        self.errors.iter().find(|r| r.parameter == parameter)
    }

    pub fn coverage(&self, parameter: &str) -> Option<f64> {
        self.coverage.iter().find(|r| r.parameter == parameter).map(|r| r.coverage)
    }

    /// Errors scaled by 100 and their standard errors by 1000.
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("parameter,mean_abs_error_x100,se_x1000,reps\n");
        for r in &self.errors {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{}",
                r.parameter,
                r.mean_abs_error * 100.0,
                r.std_error * 1000.0,
                r.reps
            );
        }
        out
    }

    pub fn coverage_csv(&self) -> String {
        let mut out = String::from("parameter,coverage,level,reps\n");
        for r in &self.coverage {
            let _ = writeln!(out, "{},{:.6},{},{}", r.parameter, r.coverage, self.level, r.reps);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
