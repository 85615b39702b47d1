//! Command-line front end. Each subcommand runs one experiment, writes its
//! artifacts into the output directory and finishes with `manifest.json`.
//!
//! Exit codes: 0 when every asserted inequality or identity holds, 1 when one
//! fails (or the experiment cannot be carried out), 2 for usage errors.

use crate::carleman::{
    boundary_tail, carleman_probe, check_conjugation, check_hardy, check_ibp_identities,
    hardy_failure_at_one, kernel_function, random_hardy_sample, random_test_function,
    weight_sign_structure, CarlemanConfig, IBP_TOLERANCE,
};
use crate::error::{LabError, Result};
use crate::hum::{DualForm, HumContext, ImpulseTimes};
use crate::io::{sig17, ArtifactSink, CsvTable};
use crate::null_control::{
    epsilon_sweep, sweep_is_monotone, sweep_table, NullControlProblem, DEFAULT_EPSILONS,
};
use crate::observability::{
    check_chain, gram_matrix, propagate_constants, spectral_constant_sweep, ChainTally, CHAIN_TIMES,
};
use crate::semigroup::random_state;
use crate::spectral::{
    build_analytic_model, build_galerkin_model, weyl_fit, DegenerateOperator, ModalState,
    WEYL_FIT_MODES,
};
use crate::stabilizer::{build_schedule, run_stabilization, RatioChoice, ScheduleParams};
use crate::window::{ObservationWindow, TimeSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "degen-lab",
    version,
    about = "Spectral, observability and control experiments for -(x^a u')' on (0,1)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Eigenpairs from both solvers and their agreement.
    Eigen(Invocation),
    /// Fit the spectral-inequality constants and check the propagated chain.
    ObservabilityFit(Invocation),
    /// Single-impulse HUM synthesis with its certificate.
    Impulse(Invocation),
    /// Distributed null control on a measurable time set, swept over epsilon.
    NullControl(Invocation),
    /// Closed-loop impulse stabilization on a geometric schedule.
    Stabilize(Invocation),
    /// Numerical checks of the weighted Hardy, integration-by-parts and Carleman inequalities.
    Verify(Invocation),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen(_) => "eigen",
            Command::ObservabilityFit(_) => "observability-fit",
            Command::Impulse(_) => "impulse",
            Command::NullControl(_) => "null-control",
            Command::Stabilize(_) => "stabilize",
            Command::Verify(_) => "verify",
        }
    }

    fn invocation(&self) -> &Invocation {
        match self {
            Command::Eigen(i)
            | Command::ObservabilityFit(i)
            | Command::Impulse(i)
            | Command::NullControl(i)
            | Command::Stabilize(i)
            | Command::Verify(i) => i,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Flat key-value TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMode {
    /// Solve for the ratio `b`; `--b` is the fallback when the iteration fails.
    FixedPoint,
    /// Use `--b` as given.
    Given,
}

/// Every experiment parameter. Unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    /// Degeneracy exponent in (0, 2).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Observation window `a,b[,c,d...]` inside [0, 1].
    #[arg(long)]
    pub omega: Option<String>,
    /// Control time set `a,b[,c,d...]` inside [0, T].
    #[arg(long = "E")]
    #[serde(rename = "E")]
    pub time_set: Option<String>,
    /// Horizon.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Impulse experiment start time
    #[arg(long)]
    pub t0: Option<f64>,
    /// Impulse time
    #[arg(long)]
    pub t1: Option<f64>,
    /// Terminal time of the impulse experiment
    #[arg(long)]
    pub t2: Option<f64>,
    /// One value, or a decreasing comma list for sweeps.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// A positive number or `empirical`.
    #[arg(long)]
    pub ell: Option<String>,
    /// A positive number or `auto`.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<String>,
    /// Active (controlled) modes J.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Buffer modes J_buf used for simulation.
    #[arg(long)]
    pub buffer: Option<usize>,
    /// Galerkin elements.
    #[arg(long)]
    pub mesh: Option<usize>,
    /// Spectral exponent in `C e^{C λ^σ}`, 0 < σ < 1
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Interpolation constant of the stabilization schedule
    #[arg(long = "C3")]
    #[serde(rename = "C3")]
    pub c3: Option<f64>,
    /// Geometric ratio of the stabilization schedule.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, value_enum)]
    pub b_mode: Option<RatioMode>,
    /// Free exponent in the stage control-norm constant (defaults to β)
    #[arg(long)]
    pub theta: Option<f64>,
    /// Last stabilization stage to run
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Number of random samples where an experiment draws them.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Modal JSON `{"coeffs": [...]}` of a tracking target.
    #[arg(long)]
    pub target_file: Option<PathBuf>,
    /// RNG seed for random initial data (default 1)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `degen-lab-out/<command>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Fields set here win over those of `base`.
    pub fn over(self, base: ExperimentConfig) -> Result<Self> {
        let mut merged = serde_json::to_value(base)?;
        if let (Value::Object(m), Value::Object(top)) = (&mut merged, serde_json::to_value(self)?) {
            for (k, v) in top {
                if !v.is_null() {
                    m.insert(k, v);
                }
            }
        }
        Ok(serde_json::from_value(merged)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn alpha_or(&self, default: f64) -> Result<f64> {
        let a = self.alpha.unwrap_or(default);
        DegenerateOperator::new(a)?;
        Ok(a)
    }

    fn window_or(&self, default: &str) -> Result<ObservationWindow> {
        ObservationWindow::parse(self.omega.as_deref().unwrap_or(default))
    }

    fn truncation(&self, modes: usize, buffer: usize) -> Result<(usize, usize)> {
        let j = self.modes.unwrap_or(modes);
        let jb = self.buffer.unwrap_or(buffer.max(j));
        if j == 0 || jb < j {
            return Err(LabError::InvalidArgument(format!(
                "need 1 <= modes ({j}) <= buffer ({jb})"
            )));
        }
        Ok((j, jb))
    }

    fn epsilons_or(&self, default: &[f64]) -> Result<Vec<f64>> {
        let Some(text) = &self.epsilon else {
            return Ok(default.to_vec());
        };
        let eps: Vec<f64> = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| LabError::InvalidArgument(format!("epsilon '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
        if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(LabError::InvalidArgument(format!(
                "epsilon values must be positive, got '{text}'"
            )));
        }
        Ok(eps)
    }
}

/// `Some(x)` for a positive number, `None` for the keyword.
fn number_or_keyword(text: Option<&str>, keyword: &str, name: &str) -> Result<Option<f64>> {
    match text {
        None => Ok(None),
        Some(t) if t.eq_ignore_ascii_case(keyword) => Ok(None),
        Some(t) => match t.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(Some(x)),
            _ => Err(LabError::InvalidArgument(format!(
                "{name} must be a positive number or '{keyword}', got '{t}'"
            ))),
        },
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(msg()))
    }
}

/// What a pipeline reports back besides its files.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    /// Effective parameters after defaults.
    pub resolved: Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    /// Parameters given on the command line or in the config file.
    inputs: Value,
    resolved: &'a Value,
    passed: bool,
    #[serde(with = "sig17")]
    wall_time_seconds: f64,
    files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ManifestEntry {
    name: String,
    sha256: String,
}

pub fn usage_error(e: &LabError) -> bool {
    matches!(
        e,
        LabError::AlphaOutOfRange(_)
            | LabError::InvalidArgument(_)
            | LabError::InvalidIntervals(_)
            | LabError::Config(_)
    )
}

/// Parse, run and report; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok((outcome, dir)) => {
            println!("{}: {}", cli.command.name(), outcome.summary);
            println!("artifacts in {}", dir.display());
            if outcome.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAIL
            }
        }
    }
}

/// Resolve the configuration, run the pipeline and write the manifest.
pub fn run(command: &Command) -> Result<(Outcome, PathBuf)> {
    let inv = command.invocation();
    let cfg = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
            inv.flags
                .clone()
                .over(ExperimentConfig::from_toml(&text)?)?
        }
        None => inv.flags.clone(),
    };
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| Path::new("degen-lab-out").join(command.name()));
    let start = Instant::now();
    let mut sink = ArtifactSink::new(&dir)?;
    let outcome = match command {
        Command::Eigen(_) => eigen(&cfg, &mut sink),
        Command::ObservabilityFit(_) => observability_fit(&cfg, &mut sink),
        Command::Impulse(_) => impulse(&cfg, &mut sink),
        Command::NullControl(_) => null_control(&cfg, &mut sink),
        Command::Stabilize(_) => stabilize(&cfg, &mut sink),
        Command::Verify(_) => verify(&cfg, &mut sink),
    }?;
    let manifest = Manifest {
        tool: "degen-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed: cfg.seed(),
        inputs: given_fields(&cfg)?,
        resolved: &outcome.resolved,
        passed: outcome.passed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: sink
            .entries()
            .iter()
            .map(|(n, h)| ManifestEntry {
                name: n.clone(),
                sha256: h.clone(),
            })
            .collect(),
    };
    sink.write_json("manifest.json", &manifest)?;
    Ok((outcome, dir))
}

fn given_fields(cfg: &ExperimentConfig) -> Result<Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    Ok(v)
}

fn rng_for(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed())
}

// ---------------------------------------------------------------- eigen

pub const EIGEN_TOLERANCE: f64 = 1e-5;
pub const WEYL_RANGE: (f64, f64) = (1.95, 2.05);

fn eigen(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let modes = cfg.modes.unwrap_or(20);
    let mesh = cfg.mesh.unwrap_or(16384);
    require(modes >= 1, || "modes must be at least 1".into())?;
    require(mesh >= 2 * modes, || {
        format!("mesh ({mesh}) must have at least twice as many elements as modes ({modes})")
    })?;
    let op = DegenerateOperator::new(alpha)?;
    let analytic = build_analytic_model(op, modes)?;
    let galerkin = build_galerkin_model(op, mesh, modes)?;
    let mut table = CsvTable::new(&["mode", "analytic", "galerkin", "relative_difference"]);
    let mut worst: f64 = 0.0;
    for j in 0..modes {
        let (a, g) = (analytic.lambda(j), galerkin.lambda(j));
        let rel = (a - g).abs() / a;
        worst = worst.max(rel);
        table.push_reals(&[(j + 1) as f64, a, g, rel]);
    }
    let weyl = weyl_fit(&build_analytic_model(op, WEYL_FIT_MODES.max(modes))?)?;
    let weyl_ok = weyl.0 >= WEYL_RANGE.0 && weyl.0 <= WEYL_RANGE.1;
    let agree = worst < EIGEN_TOLERANCE;
    sink.write_json("model_analytic.json", &analytic.to_document())?;
    sink.write_json("model_galerkin.json", &galerkin.to_document())?;
    sink.write_csv("eigen_agreement.csv", &table)?;

    #[derive(Serialize)]
    struct Report {
        #[serde(with = "sig17")]
        alpha: f64,
        modes: usize,
        mesh: usize,
        #[serde(with = "sig17")]
        max_relative_difference: f64,
        #[serde(with = "sig17")]
        tolerance: f64,
        weyl_modes: usize,
        #[serde(with = "sig17")]
        weyl_exponent: f64,
        #[serde(with = "sig17")]
        weyl_prefactor: f64,
        solvers_agree: bool,
        weyl_in_range: bool,
    }
    let report = Report {
        alpha,
        modes,
        mesh,
        max_relative_difference: worst,
        tolerance: EIGEN_TOLERANCE,
        weyl_modes: WEYL_FIT_MODES.max(modes),
        weyl_exponent: weyl.0,
        weyl_prefactor: weyl.1,
        solvers_agree: agree,
        weyl_in_range: weyl_ok,
    };
    sink.write_json("eigen_report.json", &report)?;
    Ok(Outcome {
        passed: agree && weyl_ok,
        summary: format!(
            "max relative difference {worst:.3e} (tolerance {EIGEN_TOLERANCE:e}), Weyl exponent {:.4}",
            weyl.0
        ),
        resolved: json!({"alpha": alpha, "modes": modes, "mesh": mesh}),
    })
}

// ---------------------------------------------------- observability-fit

fn observability_fit(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let window = cfg.window_or("0.2,0.5")?;
    let (modes, _) = cfg.truncation(16, 16)?;
    let samples = cfg.samples.unwrap_or(50);
    let model = build_analytic_model(DegenerateOperator::new(alpha)?, modes)?;
    let grid = model.lambdas().to_vec();
    let sweep = spectral_constant_sweep(&model, &window, &grid, cfg.sigma.unwrap_or(0.75))?;
    let sigma = match cfg.sigma {
        Some(s) => s,
        None if sweep.sigma_fit.is_finite() => sweep.sigma_fit,
        None => {
            return Err(LabError::InvalidArgument(
                "too few resolved grid points to fit sigma; pass --sigma".into(),
            ))
        }
    };
    let c1 = sweep.envelope_constant(sigma).max(f64::MIN_POSITIVE);
    let chain = propagate_constants(c1, sigma)?;

    let mut table = CsvTable::new(&["lambda_cap", "mode_count", "mu_min", "saturated"]);
    for i in 0..grid.len() {
        table.push_cells(vec![
            crate::io::fmt17(grid[i]),
            sweep.mode_counts[i].to_string(),
            crate::io::fmt17(sweep.mu_min[i]),
            sweep.saturated[i].to_string(),
        ]);
    }
    sink.write_csv("spectral_sweep.csv", &table)?;

    let gram = gram_matrix(&model, &window, modes)?;
    let mut rng = rng_for(cfg);
    let states: Vec<ModalState> = (0..samples)
        .map(|_| random_state(&mut rng, modes, modes, 0.0))
        .collect();
    let (tally, checks) = check_chain(&model, &gram, &chain, &states, &CHAIN_TIMES);
    sink.write_csv("chain_checks.csv", &checks)?;

    #[derive(Serialize)]
    struct Report<'a> {
        sweep: &'a crate::observability::SpectralConstantReport,
        #[serde(with = "sig17")]
        sigma_used: f64,
        constants: &'a crate::observability::ChainConstants,
        tally: &'a ChainTally,
    }
    sink.write_json(
        "constants.json",
        &Report {
            sweep: &sweep,
            sigma_used: sigma,
            constants: &chain,
            tally: &tally,
        },
    )?;
    let total = tally.total_violations();
    Ok(Outcome {
        passed: total == 0,
        summary: format!(
            "sigma {sigma:.2}, C1 {:.4e}, C2 {:.4e}, C3 {:.4e}, C4 {:.4e}; {total} violations in {} checks",
            chain.c1, chain.c2, chain.c3, chain.c4, tally.checks
        ),
        resolved: json!({"alpha": alpha, "omega": window.to_string(), "modes": modes, "samples": samples, "sigma": sigma}),
    })
}

// -------------------------------------------------------------- impulse

pub const HUM_RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Deserialize)]
struct ModalFile {
    coeffs: Vec<f64>,
}

fn impulse(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let window = cfg.window_or("0.3,0.6")?;
    let times = ImpulseTimes::new(
        cfg.t0.unwrap_or(0.0),
        cfg.t1.unwrap_or(0.18),
        cfg.t2.unwrap_or(0.2),
    )?;
    let eps = cfg.epsilons_or(&[1e-4])?;
    require(eps.len() == 1, || "impulse takes a single epsilon".into())?;
    let epsilon = eps[0];
    let fixed_ell = number_or_keyword(cfg.ell.as_deref(), "empirical", "ell")?;
    let (modes, buffer) = cfg.truncation(16, 32)?;
    let target = match &cfg.target_file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
            let f: ModalFile = serde_json::from_str(&text)
                .map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
            require(!f.coeffs.is_empty() && f.coeffs.len() <= buffer, || {
                format!("target needs 1..={buffer} coefficients")
            })?;
            let mut c = f.coeffs;
            c.resize(buffer, 0.0);
            Some(ModalState::new(c, modes)?)
        }
        None => None,
    };
    let model = build_analytic_model(DegenerateOperator::new(alpha)?, buffer)?;
    let ctx = HumContext::new(&model, &window, modes, buffer)?;
    let form = if target.is_some() {
        DualForm::Tracking
    } else {
        DualForm::NullTarget
    };
    let ell = match fixed_ell {
        Some(l) => l,
        None => ctx.empirical_ell(&times, epsilon, form)?,
    };
    let mut rng = rng_for(cfg);
    let (y0, sol) = match &target {
        Some(yd) => (
            ModalState::zeros(modes, buffer),
            ctx.solve_target(&times, ell, epsilon, yd)?,
        ),
        None => {
            let ye = random_state(&mut rng, modes, buffer, 0.0);
            let sol = ctx.solve_impulse(&times, ell, epsilon, &ye)?;
            (ye, sol)
        }
    };
    let probe = random_state(&mut rng, modes, buffer, 0.0);
    let duality = ctx.duality_residual(&times, &y0, &sol.plan, &probe)?;
    let trajectory = ctx.simulate(&times, &y0, &sol.plan)?;
    sink.write_csv("trajectory.csv", &trajectory.to_csv(&model)?)?;

    let c = &sol.certificate;
    let scale = c.budget.sqrt().max(f64::MIN_POSITIVE);
    let relation_ok = c.truncated_relation_error <= HUM_RESIDUAL_TOLERANCE * scale;
    let passed = c.holds && relation_ok && duality < HUM_RESIDUAL_TOLERANCE;

    #[derive(Serialize)]
    struct Report<'a> {
        #[serde(with = "sig17")]
        alpha: f64,
        times: ImpulseTimes,
        mode: &'static str,
        ell_mode: &'static str,
        #[serde(with = "sig17")]
        ell: f64,
        #[serde(with = "sig17")]
        epsilon: f64,
        certificate: &'a crate::hum::HumCertificate,
        #[serde(with = "sig17")]
        duality_residual: f64,
        relation_within_tolerance: bool,
        #[serde(with = "sig17::vec")]
        w0: &'a [f64],
        plan: &'a crate::hum::ImpulsePlan,
        passed: bool,
    }
    let report = Report {
        alpha,
        times,
        mode: if target.is_some() {
            "tracking"
        } else {
            "null-target"
        },
        ell_mode: if fixed_ell.is_some() {
            "fixed"
        } else {
            "empirical"
        },
        ell,
        epsilon,
        certificate: c,
        duality_residual: duality,
        relation_within_tolerance: relation_ok,
        w0: &sol.w0,
        plan: &sol.plan,
        passed,
    };
    sink.write_json("certificate.json", &report)?;
    Ok(Outcome {
        passed,
        summary: format!(
            "ell {ell:.4e}; cost + terminal = {:.6e} vs budget {:.6e}; relation error {:.2e}; duality residual {duality:.2e}",
            c.cost_omega + c.terminal,
            c.budget,
            c.truncated_relation_error
        ),
        resolved: json!({"alpha": alpha, "omega": window.to_string(), "t0": times.t0, "t1": times.t1, "t2": times.t2,
            "epsilon": epsilon, "ell": ell, "modes": modes, "buffer": buffer}),
    })
}

// --------------------------------------------------------- null-control

fn null_control(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let window = cfg.window_or("0.2,0.5")?;
    let horizon = cfg.horizon.unwrap_or(1.0);
    let set = TimeSet::parse(
        cfg.time_set.as_deref().unwrap_or("0.1,0.35,0.6,0.85"),
        horizon,
    )?;
    let eps = cfg.epsilons_or(&DEFAULT_EPSILONS)?;
    require(eps.windows(2).all(|p| p[1] < p[0]), || {
        "epsilon list must be strictly decreasing".into()
    })?;
    let fixed_k = number_or_keyword(cfg.k.as_deref(), "auto", "K")?;
    let (modes, buffer) = cfg.truncation(16, 32)?;
    let model = build_analytic_model(DegenerateOperator::new(alpha)?, buffer)?;
    let problem = NullControlProblem::new(&model, &window, &set, modes, buffer)?;
    let k = match fixed_k {
        Some(k) => k,
        None => problem.default_k()?,
    };
    let y0 = random_state(&mut rng_for(cfg), modes, buffer, 0.0);
    let rows = epsilon_sweep(&problem, k, &y0, &eps)?;
    sink.write_csv("sweep.csv", &sweep_table(&rows))?;
    let monotone = sweep_is_monotone(&rows);
    let all_hold = rows.iter().all(|r| r.holds);
    let last = rows.last().expect("nonempty sweep");
    let final_ratio = last.terminal_norm / last.initial_norm;

    #[derive(Serialize)]
    struct Report<'a> {
        #[serde(with = "sig17")]
        alpha: f64,
        window: String,
        time_set: String,
        #[serde(with = "sig17")]
        horizon: f64,
        k_mode: &'static str,
        #[serde(with = "sig17")]
        k: f64,
        /// `1/μ_min` of the time-weighted Gram operator, when representable.
        #[serde(with = "sig17::opt")]
        inverse_mu_min: Option<f64>,
        rows: &'a [crate::null_control::NullControlReport],
        step_inequality_holds: bool,
        monotone: bool,
        #[serde(with = "sig17")]
        final_relative_terminal_norm: f64,
    }
    let report = Report {
        alpha,
        window: window.to_string(),
        time_set: set.set.to_string(),
        horizon,
        k_mode: if fixed_k.is_some() { "fixed" } else { "auto" },
        k,
        inverse_mu_min: problem.inverse_mu_min().ok(),
        rows: &rows,
        step_inequality_holds: all_hold,
        monotone,
        final_relative_terminal_norm: final_ratio,
    };
    sink.write_json("certificate.json", &report)?;
    Ok(Outcome {
        passed: all_hold && monotone,
        summary: format!(
            "K {k:.4e}; step inequality {} at {} epsilons; terminal norm {}; ||y(T)||/||y0|| = {final_ratio:.3e} at epsilon {:e}",
            if all_hold { "holds" } else { "FAILS" },
            rows.len(),
            if monotone { "monotone" } else { "NOT monotone" },
            last.epsilon
        ),
        resolved: json!({"alpha": alpha, "omega": window.to_string(), "E": set.set.to_string(), "T": horizon, "K": k,
            "epsilons": eps, "modes": modes, "buffer": buffer}),
    })
}

// ------------------------------------------------------------ stabilize

/// Stages over which the schedule's length invariant is checked.
pub const SCHEDULE_CHECK_STAGES: usize = 12;

fn stabilize(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let window = cfg.window_or("0.2,0.5")?;
    let (modes, buffer) = cfg.truncation(16, 32)?;
    let mode = cfg.b_mode.unwrap_or(RatioMode::FixedPoint);
    let ratio = match mode {
        RatioMode::FixedPoint => RatioChoice::FixedPoint { fallback: cfg.b },
        RatioMode::Given => RatioChoice::Given(cfg.b.unwrap_or(1.25)),
    };
    let params = ScheduleParams {
        horizon: cfg.horizon.unwrap_or(1.0),
        sigma: cfg.sigma.unwrap_or(0.5),
        c3: cfg.c3.unwrap_or(0.03),
        rho: 2.0,
        card_prefactor: 1.0,
        theta: cfg.theta,
        ratio,
    };
    let requested = cfg.m_max.unwrap_or(6);
    let model = build_analytic_model(DegenerateOperator::new(alpha)?, buffer)?;
    let schedule = build_schedule(&params, model.lambda(0))?;
    let invariant = (0..=SCHEDULE_CHECK_STAGES).all(|m| schedule.stage_length_margin(m).1);
    sink.write_csv("schedule.csv", &schedule.table(SCHEDULE_CHECK_STAGES))?;
    let honest = schedule.honest_m_max(model.lambdas(), modes);
    let resolved = json!({"alpha": alpha, "omega": window.to_string(), "T": params.horizon, "sigma": params.sigma,
        "C3": params.c3, "b": schedule.b, "b_mode": mode, "theta": schedule.theta, "m_max": requested, "modes": modes, "buffer": buffer});

    #[derive(Serialize)]
    struct Envelope<'a> {
        schedule: &'a crate::stabilizer::StabilizationSchedule,
        schedule_invariant_holds: bool,
        honest_m_max: Option<usize>,
        requested_m_max: usize,
        report: Option<&'a crate::stabilizer::StabilizationReport>,
    }
    let Some(honest) = honest else {
        sink.write_json(
            "envelope.json",
            &Envelope {
                schedule: &schedule,
                schedule_invariant_holds: invariant,
                honest_m_max: None,
                requested_m_max: requested,
                report: None,
            },
        )?;
        return Ok(Outcome {
            passed: false,
            summary: format!(
                "b = {:.4e}: stage 0 already needs modes beyond the {modes} active ones (Lambda_0 = {:.3e}); closed loop not run. Try --b-mode given --b 1.25",
                schedule.b,
                schedule.lambda_cap(0)
            ),
            resolved,
        });
    };
    let m_max = requested.min(honest);
    let ctx = HumContext::new(&model, &window, modes, buffer)?;
    let z0 = random_state(&mut rng_for(cfg), modes, buffer, 0.0);
    let (_, report) = run_stabilization(&ctx, &schedule, &z0, m_max)?;
    sink.write_csv("stages.csv", &report.stage_table())?;
    sink.write_json(
        "envelope.json",
        &Envelope {
            schedule: &schedule,
            schedule_invariant_holds: invariant,
            honest_m_max: Some(honest),
            requested_m_max: requested,
            report: Some(&report),
        },
    )?;
    let f = |m: usize| report.stages[m].feedback_omega_norm;
    Ok(Outcome {
        passed: invariant && report.all_bounds_hold,
        summary: format!(
            "b {:.4}, eta {:.4e}; stages 0..={m_max} (honest m_max {honest}); bounds {}; feedback norm {:.3e} -> {:.3e}",
            schedule.b,
            schedule.eta,
            if report.all_bounds_hold { "hold" } else { "FAIL" },
            f(0),
            f(m_max)
        ),
        resolved,
    })
}

// --------------------------------------------------------------- verify

#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: Value,
}

fn verify(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5)?;
    let samples = cfg.samples.unwrap_or(120);
    require(samples >= 1, || "samples must be at least 1".into())?;
    let mut rng = rng_for(cfg);
    let mut lemmas = Vec::new();

    // Weighted Hardy inequality, or its failure at the critical exponent.
    if (alpha - 1.0).abs() < 1e-12 {
        let demo = hardy_failure_at_one(10, 0.999);
        let mut t = CsvTable::new(&["exponent", "ratio"]);
        for (p, r) in demo.exponents.iter().zip(&demo.ratios) {
            t.push_reals(&[*p, *r]);
        }
        sink.write_csv("hardy_failure.csv", &t)?;
        lemmas.push(LemmaCheck {
            name: "hardy_failure_at_critical_exponent",
            passed: demo.exceeds_tenfold && demo.increasing,
            detail: serde_json::to_value(&demo)?,
        });
    } else {
        let pool: Vec<_> = (0..samples)
            .map(|i| random_hardy_sample(&mut rng, alpha, i % 2 == 0))
            .collect();
        let report = check_hardy(alpha, &pool)?;
        let mut t = CsvTable::new(&["sample", "exponent", "lhs", "rhs", "ratio"]);
        for (i, s) in pool.iter().enumerate() {
            if s.admissibility(alpha).is_ok() {
                let (l, r) = s.integrals(alpha);
                t.push_cells(vec![
                    i.to_string(),
                    crate::io::fmt17(s.p),
                    crate::io::fmt17(l),
                    crate::io::fmt17(r),
                    crate::io::fmt17(l / r),
                ]);
            }
        }
        sink.write_csv("hardy_samples.csv", &t)?;
        lemmas.push(LemmaCheck {
            name: "hardy_displayed_constant",
            passed: report.violations_displayed == 0,
            detail: serde_json::to_value(&report)?,
        });
        lemmas.push(LemmaCheck { name: "hardy_sharp_constant", passed: report.violations_sharp == 0, detail: json!({"violations": report.violations_sharp, "constant": report.sharp_constant}) });
    }

    // Boundary behaviour of admissible profiles in the strongly degenerate range.
    if alpha >= 1.0 {
        let op = DegenerateOperator::new(alpha)?;
        let mut all = true;
        for _ in 0..20.min(samples) {
            let s = random_hardy_sample(&mut rng, alpha, true);
            let (_, ok) = boundary_tail(|x| s.eval(x), crate::spectral::mesh_grading(&op), 4096, 8);
            all &= ok;
        }
        lemmas.push(LemmaCheck {
            name: "boundary_tail_vanishes",
            passed: all,
            detail: json!({"profiles": 20.min(samples)}),
        });
    }

    // Integration-by-parts identities.
    let mut ibp = CsvTable::new(&[
        "tau",
        "function",
        "r_xx",
        "r_ss",
        "r_sx",
        "r_xs",
        "resolution",
        "doublings",
    ]);
    let mut ibp_ok = true;
    let mut worst: f64 = 0.0;
    for tau in [10.0, 100.0] {
        let c = CarlemanConfig::new(alpha, 1.0, 0.5, tau, 50.0)?;
        for i in 0..20 {
            let v = random_test_function(&mut rng, alpha, 1.0);
            let r = check_ibp_identities(&c, &v, 4)?;
            ibp_ok &= r.holds;
            worst = r.residuals.iter().copied().fold(worst, f64::max);
            let mut row: Vec<String> = vec![crate::io::fmt17(tau), i.to_string()];
            row.extend(r.residuals.iter().map(|&x| crate::io::fmt17(x)));
            row.extend([r.resolution.to_string(), r.doublings.to_string()]);
            ibp.push_cells(row);
        }
    }
    sink.write_csv("ibp_residuals.csv", &ibp)?;
    lemmas.push(LemmaCheck {
        name: "ibp_identities",
        passed: ibp_ok,
        detail: json!({"worst_residual": worst, "tolerance": IBP_TOLERANCE}),
    });

    // Conjugated operator annihilates e^φ u for u in the kernel of the lifted operator.
    let model = build_analytic_model(DegenerateOperator::new(alpha)?, 8)?;
    let u = kernel_function(&model, &[1.0, -0.5, 0.25, 0.3, -0.2], 1.0);
    let mut worst_q: f64 = 0.0;
    for tau in [1.0, 5.0, 20.0] {
        let c = CarlemanConfig::new(alpha, 1.0, 0.5, tau, 50.0)?;
        let r = check_conjugation(&c, &u, 8)?;
        worst_q = worst_q.max(r.q_phi_relative).max(r.split_relative);
    }
    lemmas.push(LemmaCheck {
        name: "conjugated_kernel",
        passed: worst_q < 1e-8,
        detail: json!({"worst_relative": worst_q}),
    });

    // Carleman ratio along τ.
    let base = CarlemanConfig::new(alpha, 1.0, 0.5, 10.0, 50.0)?;
    let taus: Vec<f64> = (0..=20)
        .map(|k| 10f64.powf(1.0 + 2.0 * k as f64 / 20.0))
        .collect();
    let v = random_test_function(&mut rng, alpha, 1.0);
    let probe = carleman_probe(&base, &v, &taus, 8)?;
    let mut t = CsvTable::new(&["tau", "lhs", "q_phi_sq", "ratio"]);
    for i in 0..taus.len() {
        t.push_reals(&[taus[i], probe.lhs[i], probe.rhs[i], probe.ratio[i]]);
    }
    sink.write_csv("carleman_probe.csv", &t)?;
    lemmas.push(LemmaCheck {
        name: "carleman_ratio_bounded",
        passed: probe.bounded,
        detail: json!({"knee_tau": taus[probe.knee_index], "worst_growth": probe.worst_growth}),
    });
    lemmas.push(LemmaCheck {
        name: "weight_sign_structure",
        passed: weight_sign_structure(&base, 64),
        detail: Value::Null,
    });

    let passed = lemmas.iter().all(|l| l.passed);
    let failed: Vec<&str> = lemmas
        .iter()
        .filter(|l| !l.passed)
        .map(|l| l.name)
        .collect();
    sink.write_json(
        "verify.json",
        &json!({"alpha": alpha, "lemmas": lemmas, "passed": passed}),
    )?;
    Ok(Outcome {
        passed,
        summary: if passed {
            format!("{} checks pass", lemmas.len())
        } else {
            format!(
                "{} of {} checks fail: {}",
                failed.len(),
                lemmas.len(),
                failed.join(", ")
            )
        },
        resolved: json!({"alpha": alpha, "samples": samples}),
    })
}
