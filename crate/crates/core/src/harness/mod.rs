//! Configuration, experiment orchestration and result persistence.
//!
//! An experiment directory always contains `config.resolved` (every key with
//! its effective value, defaults included) and `config.sha256` (the hash of
//! that text). Experiment-specific outputs are documented on the `run_*`
//! functions.

pub mod config;
pub mod presets;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::adjoint::{h1_surrogate_norm, mass, positivity_defect, solve_adjoint, DriftProvider};
use crate::error::{LabError, Result};
use crate::estimates::{self, EstimateReport, Tolerances};
use crate::grid::TorusGrid;
use crate::hamiltonian::{
    check_assumption_h, check_assumption_l1, default_delta, Coefficient, ExponentBook,
    HamiltonianSpec,
};
use crate::hj_solver::{lipschitz_seminorm, solve_hj, SolverConfig, ZeroSource};
use crate::spectral;
use crate::trajectory::Trajectory;

pub use config::KeyValues;
pub use presets::{
    InitialProfile, ManufacturedSource, SmoothSource, SourcePreset, SpikeShape, SpikeSource,
    TerminalPreset,
};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "LAB_OUTPUT_DIR";

/// Every recognized key with its default. `auto` defers to a derived value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("experiment", "single-run"),
    ("output_dir", "lab_output"),
    ("seed", "0"),
    ("solver.dim", "1"),
    ("solver.n", "128"),
    ("solver.eps", "1"),
    ("solver.mu", "1"),
    ("solver.s", "0.5"),
    ("solver.T", "0.5"),
    ("solver.dt", "0.001"),
    ("solver.store_every", "1"),
    ("solver.max_halvings", "10"),
    ("solver.mollify_scale", "0.0001"),
    ("solver.comparison_slack", "0.001"),
    ("hamiltonian.gamma", "2"),
    ("hamiltonian.c0", "0.5"),
    ("hamiltonian.delta", "auto"),
    ("hamiltonian.coefficient", "one"),
    ("hamiltonian.amplitude", "0.5"),
    ("initial.profile", "sin"),
    ("initial.amplitude", "1"),
    ("source.preset", "smooth"),
    ("source.amplitude", "1"),
    ("source.k", "2"),
    ("source.lambda", "1"),
    ("source.q", "4"),
    ("source.norm", "1"),
    ("source.widths", "1, 0.5, 0.25, 0.125"),
    ("source.kappa0", "1"),
    ("source.lambda0", "0.25"),
    ("source.center", "auto"),
    ("source.t0", "auto"),
    ("terminal.preset", "bump"),
    ("terminal.kappa", "20"),
    ("terminal.center", "auto"),
    ("adjoint.drift", "from_hj"),
    ("adjoint.velocity", "1"),
    ("adjoint.tau", "auto"),
    ("estimates.w_time", "auto"),
    ("sweep.workers", "4"),
    ("sweep.dt", "auto"),
    ("sweep.override_threshold", "false"),
    ("sweep.lip_tolerance", "0.2"),
    ("tolerance.bochner", "1e-8"),
    ("tolerance.w_equation", "0.05"),
    ("tolerance.representation", "0.001"),
    ("tolerance.dual_bochner", "0.005"),
    ("tolerance.sup_norm", "1e-8"),
    ("tolerance.mass", "1e-8"),
    ("tolerance.positivity", "0.001"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleRun,
    Identities,
    /// Spike-family sweep of the Lipschitz bound (`sweep` and `lipschitz`).
    Lipschitz,
}

#[derive(Debug, Clone)]
pub enum SourceConfig {
    Zero,
    Smooth(SmoothSource),
    Manufactured,
    Spike { shape: SpikeShape, widths: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriftChoice {
    Zero,
    Constant(Vec<f64>),
    FromHj,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub solver: SolverConfig,
    pub hamiltonian: HamiltonianSpec,
    pub initial: InitialProfile,
    pub source: SourceConfig,
    pub q: f64,
    pub terminal: TerminalPreset,
    pub drift: DriftChoice,
    pub tau: f64,
    pub w_time: f64,
    pub workers: usize,
    pub sweep_dt: Option<f64>,
    pub override_threshold: bool,
    pub lip_tolerance: f64,
    pub tolerances: Tolerances,
    pub mass_tolerance: f64,
    pub positivity_tolerance: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Effective key-value set, defaults included.
    pub resolved: KeyValues,
}

fn auto_or<T: std::str::FromStr>(kv: &KeyValues, key: &str, derived: T) -> Result<T> {
    match kv.raw(key) {
        Some("auto") | None => Ok(derived),
        Some(_) => Ok(kv.get(key)?.expect("present")),
    }
}

fn auto_list(kv: &KeyValues, key: &str, derived: Vec<f64>, len: usize) -> Result<Vec<f64>> {
    let v = match kv.raw(key) {
        Some("auto") | None => derived,
        Some(_) => kv.get_list(key)?.expect("present"),
    };
    if v.len() != len {
        return Err(LabError::Config(format!("`{key}` needs {len} entries, got {}", v.len())));
    }
    Ok(v)
}

fn config_err(e: LabError) -> LabError {
    match e {
        LabError::Config(_) => e,
        other => LabError::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_key_values(KeyValues::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    /// Merges `user` over [`DEFAULTS`] and validates every field; any problem
    /// is reported as [`LabError::Config`].
    pub fn from_key_values(user: KeyValues) -> Result<Self> {
        let known: Vec<&str> = DEFAULTS.iter().map(|(k, _)| *k).collect();
        user.reject_unknown(&known)?;
        let mut kv = KeyValues::default();
        for (k, v) in DEFAULTS {
            kv.set(k, user.raw(k).unwrap_or(v));
        }
        Self::build(kv).map_err(config_err)
    }

    fn build(kv: KeyValues) -> Result<Self> {
        let req = |k: &str| -> Result<f64> { Ok(kv.get(k)?.expect("defaulted")) };
        let kind = match kv.raw("experiment").unwrap_or_default() {
            "single-run" | "run" => ExperimentKind::SingleRun,
            "identities" => ExperimentKind::Identities,
            "sweep" | "lipschitz" => ExperimentKind::Lipschitz,
            other => return Err(LabError::Config(format!("unknown experiment `{other}`"))),
        };
        let dim: usize = kv.get("solver.dim")?.expect("defaulted");
        let n: usize = kv.get("solver.n")?.expect("defaulted");
        let grid = TorusGrid::new(dim, n)?;
        let horizon = req("solver.T")?;
        let mut solver = SolverConfig::new(
            grid.clone(),
            req("solver.eps")?,
            req("solver.mu")?,
            req("solver.s")?,
            horizon,
            req("solver.dt")?,
        )?;
        solver.store_every = kv.get("solver.store_every")?.expect("defaulted");
        solver.max_halvings = kv.get("solver.max_halvings")?.expect("defaulted");
        solver.mollify_scale = req("solver.mollify_scale")?;
        solver.comparison_slack = req("solver.comparison_slack")?;
        solver.validate()?;

        let gamma = req("hamiltonian.gamma")?;
        let c0 = req("hamiltonian.c0")?;
        let delta = auto_or(&kv, "hamiltonian.delta", default_delta(gamma))?;
        let coef = match kv.raw("hamiltonian.coefficient").unwrap_or_default() {
            "one" => Coefficient::One,
            "cos_bump" => Coefficient::CosBump {
                amplitude: req("hamiltonian.amplitude")?,
            },
            other => return Err(LabError::Config(format!("unknown coefficient `{other}`"))),
        };
        let hamiltonian = if c0 == 0.0 {
            HamiltonianSpec { gamma, ..HamiltonianSpec::zero() }
        } else {
            HamiltonianSpec::new(gamma, c0, delta, coef)?
        };

        let initial = InitialProfile::parse(
            kv.raw("initial.profile").unwrap_or_default(),
            req("initial.amplitude")?,
        )?;

        let q = req("source.q")?;
        if !(q > 1.0) {
            return Err(LabError::Config(format!("source.q must exceed 1, got {q}")));
        }
        let source = match kv.raw("source.preset").unwrap_or_default() {
            "zero" => SourceConfig::Zero,
            "smooth" => {
                let k: Vec<f64> = kv.get_list("source.k")?.expect("defaulted");
                if k.is_empty() || k.len() > dim {
                    return Err(LabError::Config(format!("source.k needs 1..={dim} entries")));
                }
                let mut wavevector = [0.0; 2];
                wavevector[..k.len()].copy_from_slice(&k);
                SourceConfig::Smooth(SmoothSource {
                    amplitude: req("source.amplitude")?,
                    wavevector,
                    decay: req("source.lambda")?,
                })
            }
            "manufactured" => SourceConfig::Manufactured,
            "spike_family" | "spike" => {
                let widths: Vec<f64> = kv.get_list("source.widths")?.expect("defaulted");
                if widths.is_empty() {
                    return Err(LabError::Config("source.widths is empty".into()));
                }
                let shape = SpikeShape {
                    dim,
                    q,
                    norm: req("source.norm")?,
                    kappa0: req("source.kappa0")?,
                    lambda0: req("source.lambda0")?,
                    center: auto_list(&kv, "source.center", vec![PI / 2.0; dim], dim)?,
                    t0: auto_or(&kv, "source.t0", horizon / 2.0)?,
                    horizon,
                };
                // validates every member up front
                SpikeSource::family(&shape, &widths)?;
                SourceConfig::Spike { shape, widths }
            }
            other => return Err(LabError::Config(format!("unknown source preset `{other}`"))),
        };

        let terminal = match kv.raw("terminal.preset").unwrap_or_default() {
            "uniform" => TerminalPreset::Uniform,
            "bump" => TerminalPreset::Bump {
                kappa: req("terminal.kappa")?,
                center: auto_list(&kv, "terminal.center", vec![PI; dim], dim)?,
            },
            other => return Err(LabError::Config(format!("unknown terminal preset `{other}`"))),
        };
        terminal.build(&grid)?;

        let drift = match kv.raw("adjoint.drift").unwrap_or_default() {
            "zero" => DriftChoice::Zero,
            "from_hj" => DriftChoice::FromHj,
            "constant" => DriftChoice::Constant(auto_list(
                &kv,
                "adjoint.velocity",
                vec![1.0; dim],
                dim,
            )?),
            other => return Err(LabError::Config(format!("unknown drift preset `{other}`"))),
        };
        let tau = auto_or(&kv, "adjoint.tau", horizon)?;
        if !(tau > 0.0 && tau <= horizon * (1.0 + 1e-12)) {
            return Err(LabError::Config(format!("adjoint.tau must lie in (0, T], got {tau}")));
        }
        let w_time = auto_or(&kv, "estimates.w_time", horizon / 2.0)?;

        let sweep_dt = match kv.raw("sweep.dt") {
            Some("auto") | None => None,
            Some(_) => Some(req("sweep.dt")?),
        };
        let workers: usize = kv.get("sweep.workers")?.expect("defaulted");
        if workers == 0 {
            return Err(LabError::Config("sweep.workers must be at least 1".into()));
        }
        let override_threshold = kv.get_bool("sweep.override_threshold", false)?;
        if kind == ExperimentKind::Lipschitz && !override_threshold {
            let book = ExponentBook::new(gamma, dim, q)?;
            if !book.above_threshold() {
                return Err(LabError::Config(format!(
                    "q = {q} does not exceed q_min = {}; set sweep.override_threshold = true to run anyway",
                    book.q_min
                )));
            }
        }
        if kind == ExperimentKind::Lipschitz && !matches!(source, SourceConfig::Spike { .. }) {
            return Err(LabError::Config("the Lipschitz sweep needs source.preset = spike_family".into()));
        }

        let tolerances = Tolerances {
            bochner: req("tolerance.bochner")?,
            w_equation: req("tolerance.w_equation")?,
            representation: req("tolerance.representation")?,
            dual_bochner: req("tolerance.dual_bochner")?,
            sup_norm: req("tolerance.sup_norm")?,
        };
        let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(p) => PathBuf::from(p),
            None => PathBuf::from(kv.raw("output_dir").unwrap_or_default()),
        };
        Ok(Self {
            kind,
            solver,
            hamiltonian,
            initial,
            source,
            q,
            terminal,
            drift,
            tau,
            w_time,
            workers,
            sweep_dt,
            override_threshold,
            lip_tolerance: req("sweep.lip_tolerance")?,
            tolerances,
            mass_tolerance: req("tolerance.mass")?,
            positivity_tolerance: req("tolerance.positivity")?,
            seed: kv.get("seed")?.expect("defaulted"),
            output_dir,
            resolved: kv,
        })
    }

    pub fn config_hash(&self) -> String {
        self.resolved.content_hash()
    }

    /// The source for single runs and identities; the first family member for
    /// spike configurations.
    pub fn source_preset(&self) -> Result<SourcePreset> {
        Ok(match &self.source {
            SourceConfig::Zero => SourcePreset::Zero,
            SourceConfig::Smooth(s) => SourcePreset::Smooth(s.clone()),
            SourceConfig::Manufactured => SourcePreset::Manufactured(ManufacturedSource {
                eps: self.solver.eps,
                mu: self.solver.mu,
                spec: self.hamiltonian,
            }),
            SourceConfig::Spike { shape, widths } => {
                SourcePreset::Spike(SpikeSource::normalized(shape, widths[0])?)
            }
        })
    }

    fn drift_provider<'a>(&'a self, u: &'a Trajectory) -> DriftProvider<'a> {
        match &self.drift {
            DriftChoice::Zero => DriftProvider::Zero,
            DriftChoice::Constant(v) => DriftProvider::Constant(v.clone()),
            DriftChoice::FromHj => DriftProvider::FromHj {
                traj: u,
                spec: &self.hamiltonian,
            },
        }
    }

    /// Creates the output directory and writes the resolved config and hash.
    pub fn prepare_output(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir)?;
        fs::write(self.output_dir.join("config.resolved"), self.resolved.render())?;
        fs::write(self.output_dir.join("config.sha256"), format!("{}\n", self.config_hash()))?;
        Ok(self.output_dir.clone())
    }
}

/// Result of an experiment; `all_pass` drives the exit status.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub experiment: ExperimentKind,
    pub all_pass: bool,
    pub output_dir: PathBuf,
    pub reports: Vec<EstimateReport>,
}

/// Exit status: 0 all pass, 1 a residual failed, 2 solver or I/O failure,
/// 3 configuration error.
pub fn exit_code(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.all_pass => 0,
        Ok(_) => 1,
        Err(LabError::Config(_) | LabError::InvalidParameter(_) | LabError::InvalidGrid(_)) => 3,
        Err(_) => 2,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    match config.kind {
        ExperimentKind::SingleRun => run_single(config),
        ExperimentKind::Identities => run_identities(config),
        ExperimentKind::Lipschitz => run_lipschitz_sweep(config).map(|(o, _)| o),
    }
}

#[derive(Debug, Clone, Serialize)]
struct SingleSummary {
    final_time: f64,
    snapshots: usize,
    lipschitz_max: f64,
    sup_norm_max: f64,
    mass_defect_max: Option<f64>,
    positivity_defect_max: Option<f64>,
    config_hash: String,
}

/// Solves the HJ problem and the adjoint problem; writes the trajectories to
/// `u/` and `rho/` and a `summary.json`.
pub fn run_single(config: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = config.prepare_output()?;
    let source = config.source_preset()?;
    let u0 = config.initial.sample(&config.solver.grid);
    let u = solve_hj(&config.solver, &config.hamiltonian, &u0, &source)?;
    let echo = serde_json::json!({"config_hash": config.config_hash()});
    u.save(&dir.join("u"), echo.clone())?;
    let drift = config.drift_provider(&u);
    let terminal = config.terminal.build(&config.solver.grid)?;
    let rho = solve_adjoint(&config.solver, &drift, &terminal, config.tau)?;
    rho.save(&dir.join("rho"), echo)?;
    let masses = mass(&rho);
    let summary = SingleSummary {
        final_time: u.final_time(),
        snapshots: u.len(),
        lipschitz_max: lipschitz_seminorm(&u).into_iter().fold(0.0, f64::max),
        sup_norm_max: u.snapshots().iter().map(|s| s.sup_norm()).fold(0.0, f64::max),
        mass_defect_max: Some(masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max)),
        positivity_defect_max: Some(positivity_defect(&rho).into_iter().fold(0.0, f64::max)),
        config_hash: config.config_hash(),
    };
    serde_json::to_writer_pretty(fs::File::create(dir.join("summary.json"))?, &summary)?;
    Ok(RunOutcome {
        experiment: ExperimentKind::SingleRun,
        all_pass: true,
        output_dir: dir,
        reports: vec![],
    })
}

/// Runs both solvers and every residual check. Writes `ledger.csv`, one
/// `report_<name>.json` per report and `assumptions.json`.
pub fn run_identities(config: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = config.prepare_output()?;
    let reports = identity_reports(config)?;
    let hash = config.config_hash();
    estimates::write_ledger(&dir.join("ledger.csv"), &reports, &hash)?;
    estimates::write_details(&dir, &reports)?;
    let dim = config.solver.grid.dim();
    if !config.hamiltonian.is_zero() {
        let checks = vec![
            check_assumption_h(&config.hamiltonian, dim, 1000, config.seed)?,
            check_assumption_l1(&config.hamiltonian, dim, 1000, config.seed)?,
        ];
        serde_json::to_writer_pretty(fs::File::create(dir.join("assumptions.json"))?, &checks)?;
    }
    let all_pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        info!("{:<20} residual {:.3e} (tol {:.1e}) {}", r.name, r.residual, r.tolerance, if r.pass { "pass" } else { "FAIL" });
    }
    Ok(RunOutcome {
        experiment: ExperimentKind::Identities,
        all_pass,
        output_dir: dir,
        reports,
    })
}

/// Computes the identity reports without touching the file system.
pub fn identity_reports(config: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let cfg = &config.solver;
    let spec = &config.hamiltonian;
    let tol = &config.tolerances;
    let source = config.source_preset()?;
    let u0 = config.initial.sample(&cfg.grid);
    let u = solve_hj(cfg, spec, &u0, &source)?;
    let terminal = config.terminal.build(&cfg.grid)?;
    let drift = config.drift_provider(&u);
    let rho = solve_adjoint(cfg, &drift, &terminal, config.tau)?;

    let mut reports = Vec::new();
    reports.push(estimates::bochner_mixed_residual(u.last(), cfg.eps, cfg.mu, cfg.s, tol.bochner)?);
    let w_time = nearest_interior_time(&u, config.w_time)?;
    reports.push(estimates::w_equation_residual(&u, cfg, spec, &source, w_time, tol.w_equation)?);
    reports.push(estimates::representation_residual(&u, &rho, spec, &source, config.tau, tol.representation)?);
    let dual = estimates::dual_bochner_terms(&u, &rho, cfg, spec, &source, config.tau)?;
    reports.push(EstimateReport::new(
        "dual_bochner",
        dual.defect().abs() / dual.scale(),
        dual.scale(),
        tol.dual_bochner,
        serde_json::json!({"tau": config.tau, "terms": dual}),
    ));
    reports.push(EstimateReport::new(
        "nonlocal_term_sign",
        (-dual.nonlocal).max(0.0) / dual.scale(),
        dual.scale(),
        1e-6,
        serde_json::json!({"nonlocal": dual.nonlocal}),
    ));
    reports.push(estimates::sup_norm_bound_check(&u, spec, &source, config.q, tol.sup_norm)?);
    let hess_scale = spectral::hessian_norm_squared(u.last()).sup_norm().max(1e-300);
    let cd = estimates::cd_inequality_defect(u.last());
    reports.push(EstimateReport::new(
        "cd_inequality",
        cd.max(0.0) / hess_scale,
        hess_scale,
        1e-10,
        serde_json::json!({"defect": cd}),
    ));
    let mass_defect = mass(&rho).iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    reports.push(EstimateReport::new(
        "mass_conservation",
        mass_defect,
        1.0,
        config.mass_tolerance,
        serde_json::json!({"tau": config.tau}),
    ));
    let rho_max = rho.snapshots().iter().map(|r| r.max()).fold(0.0, f64::max);
    let pos = positivity_defect(&rho).into_iter().fold(0.0, f64::max);
    reports.push(EstimateReport::new(
        "positivity",
        pos / rho_max,
        rho_max,
        config.positivity_tolerance,
        serde_json::json!({"defect": pos}),
    ));
    Ok(reports)
}

fn nearest_interior_time(traj: &Trajectory, t: f64) -> Result<f64> {
    let times = traj.times();
    if times.len() < 3 {
        return Err(LabError::InvalidParameter("trajectory too short for centered differences".into()));
    }
    let inner = &times[1..times.len() - 1];
    Ok(*inner
        .iter()
        .min_by(|a, b| (*a - t).abs().total_cmp(&(*b - t).abs()))
        .expect("nonempty"))
}

/// One row of the Lipschitz sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub width: f64,
    pub f_lq: f64,
    pub f_sup: f64,
    pub lip_sup: f64,
    pub u_sup: f64,
    pub cross_k1: f64,
    pub cross_kgamma: f64,
    pub rho_h1: f64,
    /// `sup_t ‖∇u_j − ∇u_free‖∞`, the gradient created by the source.
    pub lip_forced: f64,
    pub below_threshold: bool,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub dt: f64,
    /// `(max − min)/min` of the Lipschitz column.
    pub lip_variation: f64,
    /// `max/min` of the `‖f‖∞` column.
    pub f_sup_growth: f64,
    pub cross_k1_ratio: f64,
    pub cross_kgamma_ratio: f64,
    pub u_sup_variation: f64,
    pub below_threshold: bool,
    /// `None` for out-of-hypothesis runs, which carry no claim.
    pub pass: Option<bool>,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    (min, max)
}

/// Step resolving the narrowest member in time: at least 20 steps per time
/// width, never larger than `solver.dt`, and dividing `T` evenly.
fn sweep_step(config: &ExperimentConfig, family: &[SpikeSource]) -> f64 {
    let horizon = config.solver.horizon;
    let dt = config.sweep_dt.unwrap_or_else(|| {
        let narrow = family.iter().map(SpikeSource::time_width).fold(f64::INFINITY, f64::min);
        (narrow / 20.0).min(config.solver.dt)
    });
    horizon / (horizon / dt).ceil()
}

/// Runs the spike family in parallel (up to `sweep.workers` at once). Writes
/// `sweep.csv` and `sweep_summary.json`; a failed member is recorded in its
/// `status` column and the sweep continues.
pub fn run_lipschitz_sweep(config: &ExperimentConfig) -> Result<(RunOutcome, Vec<SweepRow>)> {
    let SourceConfig::Spike { shape, widths } = &config.source else {
        return Err(LabError::Config("the Lipschitz sweep needs a spike family".into()));
    };
    let dir = config.prepare_output()?;
    let family = SpikeSource::family(shape, widths)?;
    let dt = sweep_step(config, &family);
    let mut cfg = config.solver.clone();
    cfg.dt = dt;
    cfg.store_every = 1;
    let book = ExponentBook::new(config.hamiltonian.gamma, cfg.grid.dim(), shape.q)?;
    let below = !book.above_threshold();
    if below {
        warn!("q = {} is below q_min = {}: results carry no claim", shape.q, book.q_min);
    }
    let u0 = config.initial.sample(&cfg.grid);
    let free = solve_hj(&cfg, &config.hamiltonian, &u0, &ZeroSource)?;
    let free_grads: Vec<_> = free.snapshots().iter().map(spectral::gradient).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LabError::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        family
            .par_iter()
            .map(|member| {
                sweep_member(config, &cfg, member, &u0, &free_grads, below).unwrap_or_else(|e| {
                    warn!("width {}: {e}", member.width);
                    SweepRow {
                        width: member.width,
                        f_lq: shape.norm,
                        f_sup: member.sup_norm(),
                        lip_sup: f64::NAN,
                        u_sup: f64::NAN,
                        cross_k1: f64::NAN,
                        cross_kgamma: f64::NAN,
                        rho_h1: f64::NAN,
                        lip_forced: f64::NAN,
                        below_threshold: below,
                        status: format!("failed: {e}"),
                    }
                })
            })
            .collect()
    });

    write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    let ok = rows.iter().all(|r| r.status == "ok");
    let (lmin, lmax) = spread(rows.iter().map(|r| r.lip_sup));
    let (fmin, fmax) = spread(rows.iter().map(|r| r.f_sup));
    let (c1min, c1max) = spread(rows.iter().map(|r| r.cross_k1));
    let (cgmin, cgmax) = spread(rows.iter().map(|r| r.cross_kgamma));
    let (umin, umax) = spread(rows.iter().map(|r| r.u_sup));
    let lip_variation = (lmax - lmin) / lmin;
    let summary = SweepSummary {
        dt,
        lip_variation,
        f_sup_growth: fmax / fmin,
        cross_k1_ratio: c1max / c1min,
        cross_kgamma_ratio: cgmax / cgmin,
        u_sup_variation: (umax - umin) / umin,
        below_threshold: below,
        pass: (!below).then_some(ok && lip_variation <= config.lip_tolerance),
    };
    serde_json::to_writer_pretty(fs::File::create(dir.join("sweep_summary.json"))?, &summary)?;
    let report = EstimateReport::new(
        "lipschitz_variation",
        if ok { lip_variation } else { f64::INFINITY },
        lmin,
        config.lip_tolerance,
        serde_json::to_value(&summary)?,
    );
    let outcome = RunOutcome {
        experiment: ExperimentKind::Lipschitz,
        all_pass: summary.pass.unwrap_or(ok),
        output_dir: dir,
        reports: vec![report],
    };
    Ok((outcome, rows))
}

fn sweep_member(
    config: &ExperimentConfig,
    cfg: &SolverConfig,
    member: &SpikeSource,
    u0: &crate::field::Field,
    free_grads: &[crate::field::VectorField],
    below: bool,
) -> Result<SweepRow> {
    let spec = &config.hamiltonian;
    let u = solve_hj(cfg, spec, u0, member)?;
    let lip_forced = u
        .snapshots()
        .iter()
        .zip(free_grads)
        .map(|(s, g)| spectral::gradient(s).max_abs_diff(g))
        .fold(0.0, f64::max);
    let steps = u.len() - 1;
    let mut adj_cfg = cfg.clone();
    adj_cfg.store_every = (steps / 500).max(1);
    let terminal = config.terminal.build(&cfg.grid)?;
    let drift = DriftProvider::FromHj { traj: &u, spec };
    let rho = solve_adjoint(&adj_cfg, &drift, &terminal, config.tau)?;
    let q_prime = member_q_prime(config);
    Ok(SweepRow {
        width: member.width,
        f_lq: match &config.source {
            SourceConfig::Spike { shape, .. } => shape.norm,
            _ => f64::NAN,
        },
        f_sup: member.sup_norm(),
        lip_sup: lipschitz_seminorm(&u).into_iter().fold(0.0, f64::max),
        u_sup: u.snapshots().iter().map(|s| s.sup_norm()).fold(0.0, f64::max),
        cross_k1: estimates::cross_estimate(&u, &rho, 1.0)?,
        cross_kgamma: estimates::cross_estimate(&u, &rho, spec.gamma)?,
        rho_h1: h1_surrogate_norm(&rho, q_prime)?,
        lip_forced,
        below_threshold: below,
        status: "ok".into(),
    })
}

/// Conjugate exponent `q' = q/(q − 1)` of the source integrability.
fn member_q_prime(config: &ExperimentConfig) -> f64 {
    config.q / (config.q - 1.0)
}

fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "width",
        "f_lq",
        "f_sup",
        "lip_sup",
        "u_sup",
        "cross_k1",
        "cross_kgamma",
        "rho_h1",
        "lip_forced",
        "below_threshold",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            fmt_float(r.width),
            fmt_float(r.f_lq),
            fmt_float(r.f_sup),
            fmt_float(r.lip_sup),
            fmt_float(r.u_sup),
            fmt_float(r.cross_k1),
            fmt_float(r.cross_kgamma),
            fmt_float(r.rho_h1),
            fmt_float(r.lip_forced),
            r.below_threshold.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the threshold table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub gamma: f64,
    pub dim: usize,
    pub q: f64,
    pub q_min: f64,
    pub gamma_conj: f64,
    pub m_prime: f64,
    pub above_threshold: bool,
    pub absorption: bool,
    pub theta_reduction: bool,
}

/// Every combination of the three lists, in nested order `γ`, `N`, `q`.
pub fn run_threshold_table(gammas: &[f64], dims: &[usize], qs: &[f64]) -> Result<Vec<ThresholdRow>> {
    if gammas.is_empty() || dims.is_empty() || qs.is_empty() {
        return Err(LabError::Config("threshold lists must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &gamma in gammas {
        for &dim in dims {
            for &q in qs {
                let b = ExponentBook::new(gamma, dim, q).map_err(config_err)?;
                rows.push(ThresholdRow {
                    gamma,
                    dim,
                    q,
                    q_min: b.q_min,
                    gamma_conj: b.gamma_conj,
                    m_prime: b.m_prime,
                    above_threshold: b.above_threshold(),
                    absorption: b.absorption(),
                    theta_reduction: b.theta_reduction(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_threshold_csv<W: std::io::Write>(out: W, rows: &[ThresholdRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "gamma",
        "N",
        "q",
        "q_min",
        "gamma_conj",
        "m_prime",
        "above_threshold",
        "absorption",
        "theta_reduction",
    ])?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.dim.to_string(),
            r.q.to_string(),
            r.q_min.to_string(),
            r.gamma_conj.to_string(),
            r.m_prime.to_string(),
            r.above_threshold.to_string(),
            r.absorption.to_string(),
            r.theta_reduction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Members of the configured spike family.
pub fn spike_family(config: &ExperimentConfig) -> Result<Vec<SpikeSource>> {
    match &config.source {
        SourceConfig::Spike { shape, widths } => SpikeSource::family(shape, widths),
        _ => Err(LabError::Config("source is not a spike family".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.kind, ExperimentKind::SingleRun);
        assert_eq!(c.solver.grid.n(), 128);
        assert_eq!(c.tau, 0.5);
        assert_eq!(c.resolved.raw("hamiltonian.delta"), Some("auto"));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::parse("source.q = 1"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("solver.n = 100"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("solver.typo = 1"), Err(LabError::Config(_))));
        assert!(matches!(
            ExperimentConfig::parse("experiment = lipschitz\nsource.preset = spike_family\nsource.q = 2"),
            Err(LabError::Config(_))
        ));
        assert!(ExperimentConfig::parse(
            "experiment = lipschitz\nsource.preset = spike_family\nsource.q = 2\nsweep.override_threshold = true"
        )
        .is_ok());
    }

    #[test]
    fn threshold_rows() {
        let rows = run_threshold_table(&[2.0, 4.0], &[1, 2], &[4.0, 7.0]).unwrap();
        assert_eq!(rows.len(), 8);
        let r = rows.iter().find(|r| r.gamma == 2.0 && r.dim == 1 && r.q == 4.0).unwrap();
        assert_eq!((r.q_min, r.gamma_conj, r.m_prime, r.absorption), (3.0, 2.0, 1.75, true));
        let r = rows.iter().find(|r| r.gamma == 4.0 && r.dim == 2 && r.q == 7.0).unwrap();
        assert_eq!(r.q_min, 6.0);
        assert!(!r.absorption && r.theta_reduction);
        assert!(run_threshold_table(&[], &[1], &[4.0]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Err(LabError::Config("x".into()))), 3);
        assert_eq!(
            exit_code(&Err(LabError::SolverFailure {
                time: 0.0,
                reason: "x".into()
            })),
            2
        );
    }
}
