use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rgam_core::baseline::{mape_rolling, Method, PredictionReport};
use rgam_core::diagnostics::{diagnose, NetworkDiagnostics};
use rgam_core::experiment::{run_replications, simulate_draw, ExperimentConfig};
use rgam_core::fit::{fit_rgam, FitOptions};
use rgam_core::graphon::{row_normalize, Network};
use rgam_core::io::{
    format_covariates, format_edges, format_fhat, format_panel, network_from_edges, parse_covariates,
    parse_edges, parse_panel, read_to_string, write_string,
};
use rgam_core::iv::Sigma2Mode;
use rgam_core::plot::{histogram_svg, scatter_svg};
use rgam_core::sim::{Covariates, PanelSeries};
use rgam_core::smooth::{Kernel, DEFAULT_H0};
use rgam_core::{Result, RgamError};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "rgam", version, about = "Simulate and estimate network autoregressions with latent homophily")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one network, covariates and panel and write them with the truth.
    Simulate(SimulateArgs),
    /// Estimate the model on a panel, edge list and covariate table.
    Fit(FitArgs),
    /// Monte Carlo error and coverage summaries.
    Replicate(ReplicateArgs),
    /// Rolling one-step-ahead prediction errors.
    Predict(PredictArgs),
    /// Connectivity, spectral gap and related network checks.
    Diagnose(DiagnoseArgs),
}

/// Every experiment key, overriding the config file when given.
#[derive(Args, Default)]
struct ExperimentArgs {
    /// Flat `key = value` file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "t")]
    t_len: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    h0: Option<String>,
    /// Comma-separated coefficients; an empty string means no covariates.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    bandwidth: Option<String>,
    /// Named graphon or a JSON block-grid file.
    #[arg(long)]
    graphon: Option<String>,
    /// `zero`, `step`, `identity` or `constant:<value>`.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    sigma2_raw: bool,
    /// Output directory.
    #[arg(long = "out")]
    outputs: Option<PathBuf>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let cwd = Path::new(".");
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let base = path.parent().unwrap_or(cwd);
            cfg.apply_text(&read_to_string(path)?, base)?;
        }
        let pairs = [
            ("setting", &self.setting),
            ("n", &self.n),
            ("t", &self.t_len),
            ("reps", &self.reps),
            ("burn_in", &self.burn_in),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("sigma", &self.sigma),
            ("h0", &self.h0),
            ("gamma", &self.gamma),
            ("seed", &self.seed),
            ("level", &self.level),
            ("kernel", &self.kernel),
            ("bandwidth", &self.bandwidth),
            ("graphon", &self.graphon),
            ("baseline", &self.baseline),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v, cwd)?;
            }
        }
        if self.sigma2_raw {
            cfg.sigma2_mode = Sigma2Mode::Raw;
        }
        if let Some(out) = &self.outputs {
            cfg.outputs = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Drop isolated nodes instead of failing; the truth file lists them.
    #[arg(long)]
    trim_isolated: bool,
}

#[derive(Args)]
struct InputArgs {
    /// Panel CSV `node,t,y`.
    #[arg(long)]
    panel: PathBuf,
    /// Edge list CSV `src,dst`.
    #[arg(long)]
    edges: PathBuf,
    /// Covariate CSV `node,u1..up`.
    #[arg(long)]
    covariates: PathBuf,
    /// Drop isolated nodes (and their rows) instead of failing.
    #[arg(long)]
    trim_isolated: bool,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long, default_value_t = DEFAULT_H0)]
    h0: f64,
    /// Fixed bandwidth on the squared codegree distance.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value = "triweight")]
    kernel: String,
    /// Use the raw residual second moment for sigma^2.
    #[arg(long)]
    sigma2_raw: bool,
}

impl SmoothArgs {
    fn options(&self, level: f64) -> Result<FitOptions> {
        Ok(FitOptions {
            h0: self.h0,
            bandwidth: self.bandwidth,
            kernel: self.kernel.parse::<Kernel>()?,
            level,
            sigma2_mode: if self.sigma2_raw {
                Sigma2Mode::Raw
            } else {
                Sigma2Mode::Centered
            },
        })
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Report JSON path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Long-format CSV of the same report.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// `node,fhat` CSV.
    #[arg(long)]
    fhat: Option<PathBuf>,
    /// SVG histogram of the fitted baselines.
    #[arg(long)]
    hist: Option<PathBuf>,
    /// Sweep approximation for the bottleneck bound on large graphs.
    #[arg(long)]
    approx_bottleneck: bool,
}

#[derive(Args)]
struct ReplicateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Hold one network and its covariates fixed across replications.
    #[arg(long)]
    fix_network: bool,
    /// Worker threads; defaults to `RGAM_THREADS`, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rgam,
    Nar,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum NarEstimator {
    Ols,
    Iv,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// Comma-separated target times.
    #[arg(long, value_delimiter = ',', conflicts_with = "last")]
    weeks: Vec<usize>,
    /// Score the final `last` periods.
    #[arg(long, default_value_t = 7)]
    last: usize,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "ols")]
    nar_estimator: NarEstimator,
    #[arg(long, default_value = "prediction.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Node count when trailing nodes have no edges.
    #[arg(long)]
    n: Option<usize>,
    /// Diagnostics JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    approx_bottleneck: bool,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<RgamError> for Failure {
    fn from(e: RgamError) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        let hint = match e {
            RgamError::AllDistancesZero => " (pass --bandwidth to fix the smoothing scale)",
            RgamError::IsolatedNode(_) => " (pass --trim-isolated to drop isolated nodes)",
            _ => "",
        };
        Failure {
            code,
            message: format!("{e}{hint}"),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Replicate(a) => cmd_replicate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        RgamError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())))
    })
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let cfg = args.exp.load()?;
    let draw = simulate_draw(&cfg, args.trim_isolated)?;
    if !draw.trimmed.is_empty() {
        eprintln!(
            "trimmed {} isolated nodes: {} -> {} nodes",
            draw.trimmed.len(),
            cfg.n,
            draw.network.n()
        );
    }
    let dir = &cfg.outputs;
    create_dir(dir)?;
    write_string(&dir.join("edges.csv"), &format_edges(&draw.network))?;
    write_string(&dir.join("covariates.csv"), &format_covariates(&draw.covariates))?;
    write_string(&dir.join("panel.csv"), &format_panel(&draw.panel))?;
    let truth = serde_json_pretty(&draw.truth(&cfg))?;
    write_string(&dir.join("truth.json"), &truth)?;

    let w = row_normalize(&draw.network)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in 0..draw.panel.t_len() {
        xs.extend(w.apply(draw.panel.col(t)));
        ys.extend_from_slice(draw.panel.col(t + 1));
    }
    let svg = scatter_svg(&xs, &ys, "Response against lagged neighbour average", "neighbour average at t", "response at t+1");
    write_string(&dir.join("scatter.svg"), &svg)?;
    println!(
        "wrote {} nodes, {} edges, T = {} to {}",
        draw.network.n(),
        draw.network.edge_count(),
        cfg.t_len,
        dir.display()
    );
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Loaded inputs after optional trimming, with original node labels.
struct Inputs {
    panel: PanelSeries,
    network: Network,
    covariates: Covariates,
    labels: Vec<usize>,
}

fn load_inputs(input: &InputArgs) -> Result<Inputs> {
    let panel = parse_panel(&read_to_string(&input.panel)?)?;
    let n = panel.n();
    let edges = parse_edges(&read_to_string(&input.edges)?)?;
    let network = network_from_edges(&edges, Some(n))?;
    let covariates = parse_covariates(&read_to_string(&input.covariates)?, n)?;
    let isolated = network.isolated_nodes();
    if isolated.is_empty() {
        return Ok(Inputs {
            panel,
            network,
            covariates,
            labels: (0..n).collect(),
        });
    }
    if !input.trim_isolated {
        return Err(RgamError::IsolatedNode(isolated[0]));
    }
    let keep: Vec<usize> = (0..n).filter(|i| !isolated.contains(i)).collect();
    eprintln!("trimmed {} isolated nodes: {n} -> {} nodes", isolated.len(), keep.len());
    Ok(Inputs {
        panel: panel.select(&keep),
        network: network.induced(&keep),
        covariates: covariates.select(&keep),
        labels: keep,
    })
}

fn cmd_fit(args: FitArgs) -> CliResult {
    let inputs = load_inputs(&args.input)?;
    let opts = args.smooth.options(args.level)?;
    let w = row_normalize(&inputs.network)?;
    let fit = fit_rgam(&inputs.panel, &inputs.network, &w, &inputs.covariates, &opts)?;
    let diag = diagnose(&inputs.network, args.approx_bottleneck);
    let report = fit.report(&inputs.covariates, args.level, &inputs.labels, Some(diag))?;
    write_string(&args.out, &report.to_json()?)?;
    if let Some(path) = &args.csv {
        write_string(path, &report.to_csv())?;
    }
    if let Some(path) = &args.fhat {
        write_string(path, &format_fhat(&inputs.labels, &fit.fhat.values))?;
    }
    if let Some(path) = &args.hist {
        let svg = histogram_svg(&fit.fhat.values, 30, "Estimated individual baselines", "fitted baseline");
        write_string(path, &svg)?;
    }
    println!(
        "alpha = {:.4} [{:.4}, {:.4}]  beta = {:.4} [{:.4}, {:.4}]  sigma^2 = {:.4}",
        report.theta.alpha.est,
        report.theta.alpha.ci[0],
        report.theta.alpha.ci[1],
        report.theta.beta.est,
        report.theta.beta.ci[0],
        report.theta.beta.ci[1],
        report.sigma2
    );
    for (k, g) in report.gamma.iter().enumerate() {
        println!("gamma{} = {:.4} [{:.4}, {:.4}]", k + 1, g.est, g.ci[0], g.ci[1]);
    }
    Ok(())
}

fn cmd_replicate(args: ReplicateArgs) -> CliResult {
    let mut cfg = args.exp.load()?;
    if args.fix_network {
        cfg.fix_network = true;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let run = run_replications(&cfg)?;
    let summary = run.summary();
    let dir = &cfg.outputs;
    create_dir(dir)?;
    write_string(&dir.join("table1.csv"), &summary.errors_csv())?;
    write_string(&dir.join("table2.csv"), &summary.coverage_csv())?;
    write_string(&dir.join("summary.json"), &summary.to_json()?)?;
    let svg = histogram_svg(
        &run.pooled_f_errors(),
        40,
        "Pooled baseline estimation errors",
        "fitted minus true baseline",
    );
    write_string(&dir.join("f_errors.svg"), &svg)?;
    print!("{}", summary.errors_csv());
    print!("{}", summary.coverage_csv());
    for f in &run.failures {
        eprintln!("replication {} failed: {}", f.rep, f.message);
    }
    if run.too_many_failures() {
        return Err(Failure {
            code: EXIT_PARTIAL,
            message: format!("{} of {} replications failed", run.failures.len(), cfg.reps),
        });
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CliResult {
    let inputs = load_inputs(&args.input)?;
    let opts = args.smooth.options(0.95)?;
    let w = row_normalize(&inputs.network)?;
    let t_len = inputs.panel.t_len();
    let targets: Vec<usize> = if args.weeks.is_empty() {
        let last = args.last.min(t_len);
        (t_len + 1 - last..=t_len).collect()
    } else {
        args.weeks.clone()
    };
    let nar = match args.nar_estimator {
        NarEstimator::Ols => Method::NarOls,
        NarEstimator::Iv => Method::NarIv,
    };
    let methods: Vec<Method> = match args.method {
        MethodArg::Rgam => vec![Method::Rgam],
        MethodArg::Nar => vec![nar],
        MethodArg::Both => vec![Method::Rgam, nar],
    };
    let reports: Vec<PredictionReport> = methods
        .iter()
        .map(|&m| mape_rolling(&inputs.panel, &inputs.network, &w, &inputs.covariates, &targets, m, &opts))
        .collect::<Result<_>>()?;
    let mut csv = String::from("target_t,method,mae\n");
    for r in &reports {
        r.append_rows(&mut csv);
    }
    write_string(&args.out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn print_diagnostics(d: &NetworkDiagnostics) {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
    println!("{:<18}{}", "nodes", d.n);
    println!("{:<18}{}", "edges", d.edges);
    println!("{:<18}{:.6}", "density", d.density);
    println!("{:<18}{}", "connected", d.connected);
    println!("{:<18}{}", "bipartite", d.bipartite);
    println!("{:<18}{}", "isolated", d.isolated.len());
    println!("{:<18}{}", "spectral gap", opt(d.spectral_gap));
    println!("{:<18}{}", "influence mass", opt(d.influence_mass));
    println!("{:<18}{}", "bottleneck (upper)", opt(d.bottleneck_upper));
}

fn cmd_diagnose(args: DiagnoseArgs) -> CliResult {
    let edges = parse_edges(&read_to_string(&args.edges)?)?;
    let network = network_from_edges(&edges, args.n)?;
    if network.edge_count() == 0 {
        return Err(RgamError::NoEdges.into());
    }
    let d = diagnose(&network, args.approx_bottleneck);
    print_diagnostics(&d);
    if let Some(path) = &args.out {
        write_string(path, &serde_json_pretty(&d)?)?;
    }
    Ok(())
}
