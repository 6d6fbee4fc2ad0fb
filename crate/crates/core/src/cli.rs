//! Command-line front end: a JSON run config plus one subcommand.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::critical::{
    fit_beta, fit_delta, magnetization_curve, predicted_exponents, write_curve_csv, Control, ExponentFit, DEFAULT_POINTS,
    DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::kernels::{uniqueness_bound, GridKernel, Kernel};
use crate::measures::{concavity_scan, cumulant, detect_k, make_measure, MeasureSpec, Observable, DEFAULT_K_TOL, DEFAULT_NODES};
use crate::meanfield::{
    finite_volume_offset, pressure_general_best, pressure_rank2, solve_m, solve_record, solve_v_branches, theta_c_parts,
    ModelSpec, PicardOptions, Start, DEFAULT_TOL,
};
use crate::simulate::{run_mc, run_mc_chains, write_trace_csv, McOptions};
use crate::weights::{WeightModel, WeightSpec};

#[derive(Debug, Parser)]
#[command(name = "annealed-grg", version, about = "Annealed continuous-spin models on generalized random graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (CSV for curve and simulate traces, JSON otherwise).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Validate the config and print the resolved model only.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Critical coupling and its ingredients.
    ThetaC,
    /// Scalar fixed point m⁺.
    Solve,
    /// Sweep of θ or h.
    Curve,
    /// Pressure at the selected fixed point.
    Pressure,
    /// Fitted β and δ next to the predicted values.
    Exponents,
    /// Sufficient condition for a unique functional fixed point.
    Uniqueness,
    /// Cumulants of g, the order k and the concavity certificate.
    Cumulants,
    /// Functional fixed points from several starts.
    SolveGeneral,
    /// Joint edge/spin Monte Carlo.
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    #[default]
    Sigma,
    Cube,
    HalfSine,
}

impl ObservableSpec {
    pub fn build(self) -> Observable {
        match self {
            ObservableSpec::Sigma => Observable::identity(),
            ObservableSpec::Cube => Observable::cube(),
            ObservableSpec::HalfSine => Observable::half_sine(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// c + θ g(σ) g(σ').
    Rank2 { c: f64, theta: f64 },
    /// cosh β + sinh β g(σ) g(σ'), which is e^{βσσ'} for Ising spins.
    Ising { beta: f64 },
    /// e^{β g(σ) g(σ')} tabulated on the measure's support.
    Exp { beta: f64 },
    /// Square table read from CSV (path relative to the config file).
    Grid { csv: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub control: Control,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            return Ok(v.clone());
        }
        match (self.from, self.to, self.points) {
            (Some(a), Some(b), Some(n)) if n >= 2 => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            _ => Err(Error::Config("sweep needs `values` or `from`, `to` and `points` >= 2".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsConfig {
    pub beta_window: (f64, f64),
    pub delta_window: (f64, f64),
    pub points: usize,
    /// Defaults to the predicted regime's log-correction flag.
    pub log_corrected: Option<bool>,
    pub k_max: usize,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        Self { beta_window: DEFAULT_WINDOW, delta_window: DEFAULT_WINDOW, points: DEFAULT_POINTS, log_corrected: None, k_max: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CumulantsConfig {
    pub k_max: usize,
    pub tol: f64,
    pub concavity_t_max: f64,
    pub concavity_points: usize,
}

impl Default for CumulantsConfig {
    fn default() -> Self {
        Self { k_max: 10, tol: DEFAULT_K_TOL, concavity_t_max: 20.0, concavity_points: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralConfig {
    /// Random starts, in addition to the paramagnetic and ±ε-perturbed ones.
    pub random_starts: usize,
    pub amplitude: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub distinct_tol: f64,
}

impl Default for GeneralConfig {
    fn default() -> Self {
        Self { random_starts: 5, amplitude: 1.0, damping: 0.5, tol: 1e-12, max_iter: 100_000, distinct_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub sweeps: usize,
    #[serde(default)]
    pub burnin: Option<usize>,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "one")]
    pub trace_every: usize,
}

fn one() -> usize {
    1
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// Everything one invocation needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureSpec,
    #[serde(default)]
    pub observable: ObservableSpec,
    pub kernel: KernelSpec,
    pub weights: WeightSpec,
    #[serde(default)]
    pub h: f64,
    /// Quadrature nodes for measures with a density.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub exponents: ExponentsConfig,
    #[serde(default)]
    pub cumulants: CumulantsConfig,
    #[serde(default)]
    pub general: GeneralConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolves every spec into a validated model.
    pub fn model(&self) -> Result<ModelSpec> {
        let mu = make_measure(&self.measure, self.nodes)?;
        let g = self.observable.build();
        let w = WeightModel::from_spec(&self.weights)?;
        match &self.kernel {
            KernelSpec::Rank2 { c, theta } => ModelSpec::rank2(mu, g, *c, *theta, w, self.h),
            KernelSpec::Ising { beta } => ModelSpec::rank2(mu, g, beta.cosh(), beta.sinh(), w, self.h),
            KernelSpec::Exp { beta } => {
                let k = GridKernel::exponential(*beta, &g, &mu)?;
                ModelSpec::new(mu, g, Kernel::Grid(k), w, self.h)
            }
            KernelSpec::Grid { csv } => {
                let k = GridKernel::from_csv(&self.base_dir.join(csv), &mu)?;
                ModelSpec::new(mu, g, Kernel::Grid(k), w, self.h)
            }
        }
    }
}

/// Parses arguments, runs, prints errors to stderr and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    match run(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let model = cfg.model()?;
    if cli.dry_run {
        writeln!(out, "{}", model.describe())?;
        writeln!(out, "{}", serde_json::to_string(&cfg)?)?;
        return Ok(());
    }
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli, &cfg, &model, out))
        }
        None => dispatch(cli, &cfg, &model, out),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn emit(cli: &Cli, out: &mut (dyn Write + Send), line: String, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{line}")?;
    if let Some(p) = &cli.out {
        write_json(p, &value)?;
    }
    Ok(())
}

fn fit_json(fit: &ExponentFit, predicted: f64, regime: &crate::weights::TailRegime) -> serde_json::Value {
    json!({
        "estimate": fit.estimate,
        "stderr": fit.stderr,
        "window": [fit.window.0, fit.window.1],
        "predicted": predicted,
        "regime": regime,
        "n_points": fit.n_points,
        "r_squared": fit.r_squared,
        "log_corrected": fit.log_corrected,
    })
}

fn dispatch(cli: &Cli, cfg: &RunConfig, model: &ModelSpec, out: &mut (dyn Write + Send)) -> Result<()> {
    match cli.command {
        Command::ThetaC => {
            let p = theta_c_parts(model)?;
            let line = format!(
                "theta_c={:?} size_biased_mean={:?} g_second_moment={:?}",
                p.theta_c, p.size_biased_mean, p.g_second_moment
            );
            emit(cli, out, line, serde_json::to_value(p)?)
        }
        Command::Solve => {
            let r = solve_record(model, cfg.tol)?;
            let line = format!("m_plus={:?} residual={:?} iterations={:?}", r.m_plus, r.residual, r.iterations);
            emit(cli, out, line, serde_json::to_value(r)?)
        }
        Command::Curve => {
            let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("curve needs a `sweep` section".into()))?;
            let rows = magnetization_curve(model, sweep.control, &sweep.grid()?)?;
            for r in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("warning: theta={:?} h={:?}: {}", r.theta, r.h, r.error.as_deref().unwrap_or_default());
            }
            match &cli.out {
                Some(p) => {
                    write_curve_csv(&rows, std::fs::File::create(p)?)?;
                    writeln!(out, "rows={:?} written to {}", rows.len(), p.display())?;
                }
                None => write_curve_csv(&rows, &mut *out)?,
            }
            Ok(())
        }
        Command::Pressure => match model.kernel() {
            Kernel::Rank2(_) => {
                let fp = solve_m(model, cfg.tol)?;
                let p = pressure_rank2(model, &fp)?;
                let offset = finite_volume_offset(model.weights());
                let line = format!("pressure={p:?} m_plus={:?} finite_n_limit={:?}", fp.m_plus, p + offset);
                emit(cli, out, line, json!({"pressure": p, "m_plus": fp.m_plus, "finite_volume_offset": offset}))
            }
            Kernel::Grid(_) => {
                let sols = general_branches(cfg, model)?;
                let (p, idx) = pressure_general_best(model, &sols)?;
                let offset = finite_volume_offset(model.weights());
                let line = format!("pressure={p:?} branches={:?} best={idx} finite_n_limit={:?}", sols.len(), p + offset);
                emit(cli, out, line, json!({"pressure": p, "branches": sols.len(), "best": idx, "finite_volume_offset": offset}))
            }
        },
        Command::Exponents => {
            let e = &cfg.exponents;
            let k = detect_k(model.measure(), model.observable(), e.k_max, DEFAULT_K_TOL)?;
            let regime = model.weights().classify_tail(k)?;
            let pred = predicted_exponents(k, regime)?;
            let corrected = e.log_corrected.unwrap_or(pred.log_correction);
            let b = fit_beta(model, e.beta_window, e.points, corrected)?;
            let d = fit_delta(model, e.delta_window, e.points, corrected)?;
            let line = format!(
                "k={k} regime={regime:?} beta_fit={:?} (predicted {:?}) delta_fit={:?} (predicted {:?}) log_corrected={corrected}",
                b.estimate, pred.beta, d.estimate, pred.delta
            );
            let value = json!({
                "k": k,
                "beta": fit_json(&b, pred.beta, &regime),
                "delta": fit_json(&d, pred.delta, &regime),
            });
            emit(cli, out, line, value)
        }
        Command::Uniqueness => {
            let r = uniqueness_bound(model.kernel(), model.weights());
            let line = format!("{}, lhs={:?}", if r.holds { "holds" } else { "inconclusive" }, r.lhs);
            emit(cli, out, line, serde_json::to_value(r)?)
        }
        Command::Cumulants => {
            let c = &cfg.cumulants;
            let (mu, g) = (model.measure(), model.observable());
            let kappas = (1..=c.k_max).map(|j| cumulant(mu, g, j)).collect::<Result<Vec<_>>>()?;
            let k = detect_k(mu, g, c.k_max, c.tol)?;
            let scan = concavity_scan(mu, g, c.concavity_t_max, c.concavity_points)?;
            let line = format!("k={k} kappa_k={:?} concavity={}", kappas[k - 1], if scan.pass { "pass" } else { "fail" });
            emit(cli, out, line, json!({"k": k, "cumulants": kappas, "concavity": scan}))
        }
        Command::SolveGeneral => {
            let sols = general_branches(cfg, model)?;
            let (p, idx) = pressure_general_best(model, &sols)?;
            let line = format!("branches={:?} best={idx} pressure={p:?} residual={:?}", sols.len(), sols[idx].residual);
            emit(cli, out, line, json!({"pressure": p, "best": idx, "solutions": sols}))
        }
        Command::Simulate => {
            let s = cfg.simulate.as_ref().ok_or_else(|| Error::Config("simulate needs a `simulate` section".into()))?;
            let opts = McOptions {
                sweeps: s.sweeps,
                burnin: s.burnin.unwrap_or(s.sweeps / 10),
                seed: cfg.seed,
                stream: 0,
                trace_every: if cli.out.is_some() && s.chains == 1 { s.trace_every } else { 0 },
            };
            let summary = if s.chains == 1 {
                let (summary, trace) = run_mc(model, s.n, &opts)?;
                if let Some(p) = &cli.out {
                    write_trace_csv(&trace, cfg.seed, std::fs::File::create(p)?)?;
                }
                summary
            } else {
                let summary = run_mc_chains(model, s.n, &opts, s.chains)?;
                if let Some(p) = &cli.out {
                    write_json(p, &serde_json::to_value(&summary)?)?;
                }
                summary
            };
            writeln!(out, "{}", serde_json::to_string(&summary)?)?;
            Ok(())
        }
    }
}

fn general_branches(cfg: &RunConfig, model: &ModelSpec) -> Result<Vec<crate::meanfield::PotentialSolution>> {
    let gc = &cfg.general;
    let mut starts = vec![Start::Paramagnetic, Start::Perturbed(0.5), Start::Perturbed(-0.5)];
    starts.extend((0..gc.random_starts as u64).map(|i| Start::Random { seed: cfg.seed.wrapping_add(i), amplitude: gc.amplitude }));
    let opts = PicardOptions { damping: gc.damping, tol: gc.tol, max_iter: gc.max_iter };
    solve_v_branches(model, &starts, opts, gc.distinct_tol)
}
