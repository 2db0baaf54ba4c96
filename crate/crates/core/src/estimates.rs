//! Residuals of the differential and integral identities behind the gradient
//! bound, and the integral quantities that enter its estimates.
//!
//! All `*_residual` functions return an [`EstimateReport`] whose residual is
//! normalized by the declared `scale`. Space integrals are grid sums (exact for
//! band-limited integrands) and time integrals use the trapezoid rule over the
//! stored snapshots, so estimate runs should store every step.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjoint::trapezoid;
use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::hamiltonian::HamiltonianSpec;
use crate::hj_solver::{dealiased_gradient, SolverConfig, Source};
use crate::spectral::{self, PRODUCT_OVERSAMPLING};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub inputs: serde_json::Value,
}

impl EstimateReport {
    pub fn new(name: &str, residual: f64, scale: f64, tolerance: f64, inputs: serde_json::Value) -> Self {
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        Self {
            name: name.to_string(),
            residual,
            scale,
            tolerance,
            pass: residual <= tolerance,
            inputs,
        }
    }
}

/// Default acceptance tolerances for the reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub bochner: f64,
    pub w_equation: f64,
    pub representation: f64,
    pub dual_bochner: f64,
    pub sup_norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bochner: 1e-8,
            w_equation: 5e-2,
            representation: 1e-3,
            dual_bochner: 5e-3,
            sup_norm: 1e-8,
        }
    }
}

fn relative_scale(terms: &[f64]) -> f64 {
    let m = terms.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `½|∇u|²`.
fn half_grad_sq(grad: &VectorField) -> Field {
    grad.norm_squared().scale(0.5)
}

/// Terms of the mixed Bochner identity for one snapshot.
struct BochnerTerms {
    /// `−𝓛w`
    lhs: Field,
    /// `∇u·∇(−𝓛u)`
    transport: Field,
    /// `ε|D²u|²`
    hessian: Field,
    /// `μ I[∇u]`
    nonlocal: Field,
}

fn bochner_terms(u: &Field, eps: f64, mu: f64, s: f64) -> Result<BochnerTerms> {
    let grad = spectral::gradient(u);
    let w = half_grad_sq(&grad);
    let lhs = spectral::mixed_operator(&w, eps, mu, s)?.scale(-1.0);
    let lu = spectral::mixed_operator(u, eps, mu, s)?.scale(-1.0);
    let transport = grad.dot(&spectral::gradient(&lu));
    let hessian = spectral::hessian_norm_squared(u).scale(eps);
    let nonlocal = spectral::nonlocal_carre_du_champ(&grad, s)?.scale(mu);
    Ok(BochnerTerms {
        lhs,
        transport,
        hessian,
        nonlocal,
    })
}

/// Pointwise residual of `Δw − (−Δ)ˢw = ∇u·∇Δu − ∇u·∇(−Δ)ˢu + |D²u|² + I[∇u]`.
pub fn bochner_pointwise_residual(u: &Field, s: f64) -> Result<EstimateReport> {
    bochner_mixed_residual(u, 1.0, 1.0, s, Tolerances::default().bochner)
}

/// Weighted form `−𝓛w = ∇u·∇(−𝓛u) + ε|D²u|² + μ I[∇u]`.
///
/// Products are formed on a grid refined by [`PRODUCT_OVERSAMPLING`], so the
/// identity is exact up to roundoff for fields resolved on the input grid.
pub fn bochner_mixed_residual(u: &Field, eps: f64, mu: f64, s: f64, tol: f64) -> Result<EstimateReport> {
    let fine = u.upsample(PRODUCT_OVERSAMPLING)?;
    let t = bochner_terms(&fine, eps, mu, s)?;
    let rhs = t.transport.add(&t.hessian).add(&t.nonlocal);
    let defect = t.lhs.sub(&rhs).sup_norm();
    let scale = relative_scale(&[
        t.lhs.sup_norm(),
        t.transport.sup_norm(),
        t.hessian.sup_norm(),
        t.nonlocal.sup_norm(),
        1.0,
    ]);
    Ok(EstimateReport::new(
        "bochner_pointwise",
        defect / scale,
        scale,
        tol,
        serde_json::json!({"dim": u.grid().dim(), "n": u.grid().n(), "eps": eps, "mu": mu, "s": s}),
    ))
}

/// Pointwise `(Δu)²/N − |D²u|²`.
pub fn cd_defect_field(u: &Field) -> Field {
    let n = u.grid().dim() as f64;
    let lap = spectral::laplacian(u);
    let hess = spectral::hessian_norm_squared(u);
    lap.zip_with(&hess, |l, h| l * l / n - h)
}

/// `max_x (Δu)²/N − |D²u|²`; nonpositive up to roundoff.
pub fn cd_inequality_defect(u: &Field) -> f64 {
    cd_defect_field(u).max()
}

/// Residual of the evolution equation of `w = ½|∇u|²` at a stored interior
/// time `t`, with `∂ₜw` from centered differences of neighbouring snapshots:
///
/// `∂ₜw + 𝓛w + ε|D²u|² + μI[∇u] + H_p·∇w + H_x·∇u − ∇f·∇u`.
///
/// The residual is the L² norm of this expression relative to the largest
/// L² norm among its terms.
pub fn w_equation_residual(
    u_traj: &Trajectory,
    cfg: &SolverConfig,
    spec: &HamiltonianSpec,
    source: &dyn Source,
    t: f64,
    tol: f64,
) -> Result<EstimateReport> {
    let i = u_traj
        .index_of(t)
        .ok_or_else(|| LabError::InvalidParameter(format!("t = {t} is not a stored time")))?;
    if i == 0 || i + 1 >= u_traj.len() {
        return Err(LabError::InvalidParameter(format!(
            "t = {t} is an endpoint of the trajectory"
        )));
    }
    let times = u_traj.times();
    let snaps = u_traj.snapshots();
    let f = PRODUCT_OVERSAMPLING;
    let w_at = |k: usize| -> Result<Field> {
        Ok(half_grad_sq(&spectral::gradient(&snaps[k].upsample(f)?)))
    };
    let dwdt = w_at(i + 1)?.sub(&w_at(i - 1)?).scale(1.0 / (times[i + 1] - times[i - 1]));
    let u = snaps[i].upsample(f)?;
    let fine = u.grid().clone();
    let grad = spectral::gradient(&u);
    let w = half_grad_sq(&grad);
    let lw = spectral::mixed_operator(&w, cfg.eps, cfg.mu, cfg.s)?;
    let hess = spectral::hessian_norm_squared(&u).scale(cfg.eps);
    let nonlocal = spectral::nonlocal_carre_du_champ(&grad, cfg.s)?.scale(cfg.mu);
    let drift = spec.hp_field(&grad)?.dot(&spectral::gradient(&w));
    let hx = spec.hx_field(&grad).dot(&grad);
    let forcing = source.gradient(&fine, t).dot(&grad);

    let terms = [&dwdt, &lw, &hess, &nonlocal, &drift, &hx, &forcing];
    let total = dwdt
        .add(&lw)
        .add(&hess)
        .add(&nonlocal)
        .add(&drift)
        .add(&hx)
        .sub(&forcing);
    let scale = relative_scale(&terms.map(Field::l2_norm));
    Ok(EstimateReport::new(
        "w_equation",
        total.l2_norm() / scale,
        scale,
        tol,
        serde_json::json!({"t": t, "dt": times[i + 1] - times[i]}),
    ))
}

fn check_pair(u_traj: &Trajectory, rho_traj: &Trajectory, tau: f64) -> Result<()> {
    if u_traj.grid() != rho_traj.grid() {
        return Err(LabError::GridMismatch("u and rho trajectories on different grids".into()));
    }
    let tol = 1e-12 * tau.max(1.0);
    if (rho_traj.final_time() - tau).abs() > tol || u_traj.final_time() < tau - tol {
        return Err(LabError::InvalidParameter(format!(
            "horizons do not match: rho ends at {}, u at {}, tau = {tau}",
            rho_traj.final_time(),
            u_traj.final_time()
        )));
    }
    Ok(())
}

/// `t ↦ ∫ g(t) ρ(t)` at the stored times of `rho_traj`, trapezoid in time.
fn space_time_pairing(
    rho_traj: &Trajectory,
    mut g: impl FnMut(f64) -> Result<Field>,
) -> Result<f64> {
    let values = rho_traj
        .times()
        .iter()
        .zip(rho_traj.snapshots())
        .map(|(&t, rho)| Ok(g(t)?.inner(rho)))
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(rho_traj.times(), &values))
}

/// Residual of
/// `∫u(τ)ρ_τ = ∫u₀ρ(0) + ∬ L(x, H_p(x, ∇u)) ρ + ∬ fρ`, relative to
/// `max(1, |∫u(τ)ρ_τ|)`.
pub fn representation_residual(
    u_traj: &Trajectory,
    rho_traj: &Trajectory,
    spec: &HamiltonianSpec,
    source: &dyn Source,
    tau: f64,
    tol: f64,
) -> Result<EstimateReport> {
    check_pair(u_traj, rho_traj, tau)?;
    let grid = rho_traj.grid().clone();
    let lhs = u_traj.at(tau)?.inner(rho_traj.last());
    let initial = u_traj.first().inner(rho_traj.first());
    let lagrangian = space_time_pairing(rho_traj, |t| {
        spec.lagrangian_along_drift(&dealiased_gradient(&u_traj.at(t)?))
    })?;
    let forcing = if source.is_zero() {
        0.0
    } else {
        space_time_pairing(rho_traj, |t| Ok(source.sample(&grid, t)))?
    };
    let rhs = initial + lagrangian + forcing;
    let scale = lhs.abs().max(1.0);
    Ok(EstimateReport::new(
        "representation",
        (lhs - rhs).abs() / scale,
        scale,
        tol,
        serde_json::json!({
            "tau": tau,
            "lhs": lhs,
            "initial": initial,
            "lagrangian": lagrangian,
            "forcing": forcing,
        }),
    ))
}

/// Individual terms of the dual Bochner identity
/// `∫w(τ)ρ_τ + ∬ε|D²u|²ρ + ∬μI[∇u]ρ + ∬H_x·∇u ρ + ∬f div(∇u ρ) = ∫w(0)ρ(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBochnerTerms {
    pub terminal: f64,
    pub hessian: f64,
    pub nonlocal: f64,
    pub hx: f64,
    pub forcing: f64,
    pub initial: f64,
}

impl DualBochnerTerms {
    pub fn defect(&self) -> f64 {
        self.terminal + self.hessian + self.nonlocal + self.hx + self.forcing - self.initial
    }

    pub fn scale(&self) -> f64 {
        relative_scale(&[
            self.terminal,
            self.hessian,
            self.nonlocal,
            self.hx,
            self.forcing,
            self.initial,
        ])
    }
}

pub fn dual_bochner_terms(
    u_traj: &Trajectory,
    rho_traj: &Trajectory,
    cfg: &SolverConfig,
    spec: &HamiltonianSpec,
    source: &dyn Source,
    tau: f64,
) -> Result<DualBochnerTerms> {
    check_pair(u_traj, rho_traj, tau)?;
    let grid = rho_traj.grid().clone();
    let w_at = |t: f64| -> Result<Field> { Ok(half_grad_sq(&spectral::gradient(&u_traj.at(t)?))) };
    let terminal = w_at(tau)?.inner(rho_traj.last());
    let initial = w_at(0.0)?.inner(rho_traj.first());
    let hessian = space_time_pairing(rho_traj, |t| {
        Ok(spectral::hessian_norm_squared(&u_traj.at(t)?).scale(cfg.eps))
    })?;
    let nonlocal = space_time_pairing(rho_traj, |t| {
        Ok(spectral::nonlocal_carre_du_champ(&spectral::gradient(&u_traj.at(t)?), cfg.s)?
            .scale(cfg.mu))
    })?;
    let hx = space_time_pairing(rho_traj, |t| {
        let grad = spectral::gradient(&u_traj.at(t)?);
        Ok(spec.hx_field(&grad).dot(&grad))
    })?;
    let forcing = if source.is_zero() {
        0.0
    } else {
        let values = rho_traj
            .times()
            .iter()
            .zip(rho_traj.snapshots())
            .map(|(&t, rho)| {
                let grad = spectral::gradient(&u_traj.at(t)?);
                let flux = grad.scale_by(rho);
                Ok(source.sample(&grid, t).inner(&spectral::divergence(&flux)))
            })
            .collect::<Result<Vec<_>>>()?;
        trapezoid(rho_traj.times(), &values)
    };
    Ok(DualBochnerTerms {
        terminal,
        hessian,
        nonlocal,
        hx,
        forcing,
        initial,
    })
}

/// Relative residual of the dual Bochner identity; the individual terms are
/// echoed in `inputs`.
pub fn dual_bochner_residual(
    u_traj: &Trajectory,
    rho_traj: &Trajectory,
    cfg: &SolverConfig,
    spec: &HamiltonianSpec,
    source: &dyn Source,
    tau: f64,
    tol: f64,
) -> Result<EstimateReport> {
    let terms = dual_bochner_terms(u_traj, rho_traj, cfg, spec, source, tau)?;
    let scale = terms.scale();
    Ok(EstimateReport::new(
        "dual_bochner",
        terms.defect().abs() / scale,
        scale,
        tol,
        serde_json::json!({"tau": tau, "terms": terms}),
    ))
}

/// `∬ |∇u|ᵏ ρ dx dt` over the stored times of `rho_traj`.
pub fn cross_estimate(u_traj: &Trajectory, rho_traj: &Trajectory, k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(LabError::InvalidParameter(format!("cross exponent must be >= 1, got {k}")));
    }
    check_pair(u_traj, rho_traj, rho_traj.final_time())?;
    space_time_pairing(rho_traj, |t| {
        Ok(spectral::gradient(&u_traj.at(t)?).magnitude().map(|g| g.powf(k)))
    })
}

/// Compares `sup_t ‖u(·, t)‖∞` with the comparison envelope
/// `‖u₀‖∞ + ∫₀ᵀ ‖f(·, t)‖∞ dt + T sup_x |H(x, 0)|`, and echoes `‖f‖_{L^q}`.
pub fn sup_norm_bound_check(
    u_traj: &Trajectory,
    spec: &HamiltonianSpec,
    source: &dyn Source,
    q: f64,
    tol: f64,
) -> Result<EstimateReport> {
    let grid = u_traj.grid().clone();
    let dim = grid.dim();
    let sup = u_traj.snapshots().iter().map(Field::sup_norm).fold(0.0, f64::max);
    let u0 = u_traj.first().sup_norm();
    let (f_sup_integral, f_lq) = if source.is_zero() {
        (0.0, 0.0)
    } else {
        let samples: Vec<Field> = u_traj.times().iter().map(|&t| source.sample(&grid, t)).collect();
        let sups: Vec<f64> = samples.iter().map(Field::sup_norm).collect();
        let fq = Trajectory::new(u_traj.times().to_vec(), samples)?;
        (trapezoid(u_traj.times(), &sups), space_time_lebesgue_norm(&fq, q)?)
    };
    let c_h = (0..grid.len())
        .map(|i| spec.eval_h(&grid.point(i)[..dim], &[0.0; 2][..dim]).abs())
        .fold(0.0, f64::max);
    let envelope = u0 + f_sup_integral + u_traj.final_time() * c_h;
    let scale = envelope.max(1.0);
    let residual = if sup.is_finite() {
        (sup - envelope).max(0.0) / scale
    } else {
        f64::INFINITY
    };
    Ok(EstimateReport::new(
        "sup_norm_bound",
        residual,
        scale,
        tol,
        serde_json::json!({"sup_u": sup, "sup_u0": u0, "f_lq": f_lq, "q": q, "envelope": envelope}),
    ))
}

/// `(∫ |g|^q dx)^{1/q}` by the grid sum.
pub fn lebesgue_norm(g: &Field, q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(g.map(|v| v.abs().powf(q)).integral().powf(1.0 / q))
}

/// `(∫₀ᵀ ∫ |g|^q dx dt)^{1/q}`, trapezoid in time.
pub fn space_time_lebesgue_norm(traj: &Trajectory, q: f64) -> Result<f64> {
    check_exponent(q)?;
    let values: Vec<f64> = traj
        .snapshots()
        .iter()
        .map(|g| g.map(|v| v.abs().powf(q)).integral())
        .collect();
    Ok(trapezoid(traj.times(), &values).powf(1.0 / q))
}

fn check_exponent(q: f64) -> Result<()> {
    if !(q >= 1.0) {
        return Err(LabError::InvalidParameter(format!("Lebesgue exponent must be >= 1, got {q}")));
    }
    Ok(())
}

/// Observed order `log₂(r_coarse / r_fine)` of a residual under step halving.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Writes the CSV ledger `name,residual,scale,tolerance,pass,config_hash`.
pub fn write_ledger(path: &Path, reports: &[EstimateReport], config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "residual", "scale", "tolerance", "pass", "config_hash"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:e}", r.residual),
            format!("{:e}", r.scale),
            format!("{:e}", r.tolerance),
            r.pass.to_string(),
            config_hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one `report_<name>.json` per report into `dir`.
pub fn write_details(dir: &Path, reports: &[EstimateReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in reports {
        let file = File::create(dir.join(format!("report_{}.json", r.name)))?;
        serde_json::to_writer_pretty(file, r)?;
    }
    Ok(())
}
