//! Backward solver for the adjoint transport-diffusion equation
//!
//! ```text
//! −∂ₜρ − εΔρ + μ(−Δ)ˢρ − div(b ρ) = 0  on (0, τ),   ρ(·, τ) = ρ_τ,
//! ```
//!
//! the formal adjoint of the linearization `∂ₜv + 𝓛v + b·∇v` of the
//! Hamilton-Jacobi equation with `b = H_p(x, ∇u)`.
//!
//! Writing `σ = τ − t` gives the forward problem `∂_σρ = −𝓛ρ + div(bρ)`. The
//! spatial mean `b̄` of the drift is transported exactly in Fourier space
//! together with the diffusion, and the fluctuation `b̃ = b − b̄` is explicit:
//!
//! ```text
//! ρⁿ = (I + dt Bᵀ) Fᵀ ρⁿ⁺¹,   Bᵀρ = div P(b̃ Pρ),   Fᵀ = exp(dt(−σ(k) + i k·b̄))
//! ```
//!
//! with `b` frozen at time `tⁿ`. This is the exact transpose of the forward
//! step `u ↦ F(u + dt B u)`, `B u = −P(b̃·P∇u)`, and it conserves mass to
//! roundoff because the zero mode of a spectral divergence vanishes.

use log::{debug, warn};
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::TorusGrid;
use crate::hamiltonian::HamiltonianSpec;
use crate::hj_solver::{dealiased_gradient, SolverConfig};
use crate::spectral;
use crate::trajectory::Trajectory;

/// Nonnegative terminal density with unit mass.
#[derive(Debug, Clone)]
pub struct TerminalDensity {
    rho: Field,
}

impl TerminalDensity {
    /// Normalizes `rho` to unit mass; rejects negative or massless input.
    pub fn new(rho: Field) -> Result<Self> {
        if rho.min() < 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "terminal density has negative values (min {:e})",
                rho.min()
            )));
        }
        let mass = rho.integral();
        if !(mass > 0.0) {
            return Err(LabError::InvalidParameter("terminal density has zero mass".into()));
        }
        Ok(Self { rho: rho.scale(1.0 / mass) })
    }

    pub fn uniform(grid: &TorusGrid) -> Self {
        Self {
            rho: Field::constant(grid, 1.0 / grid.volume()),
        }
    }

    /// Periodized bump `exp(κ Σⱼ (cos(xⱼ − cⱼ) − 1))`, normalized.
    pub fn bump(grid: &TorusGrid, kappa: f64, center: &[f64]) -> Result<Self> {
        if !(kappa >= 0.0) || center.len() != grid.dim() {
            return Err(LabError::InvalidParameter(format!(
                "bump needs kappa >= 0 and a {}-dimensional center",
                grid.dim()
            )));
        }
        let rho = Field::from_fn(grid, |x| {
            let e: f64 = x.iter().zip(center).map(|(xj, cj)| (xj - cj).cos() - 1.0).sum();
            (kappa * e).exp()
        });
        Self::new(rho)
    }

    pub fn field(&self) -> &Field {
        &self.rho
    }
}

type AnalyticDrift<'a> = Box<dyn Fn(&[f64], f64) -> [f64; 2] + Sync + 'a>;

/// Source of the drift `b(x, t)`.
pub enum DriftProvider<'a> {
    Zero,
    Constant(Vec<f64>),
    Analytic(AnalyticDrift<'a>),
    /// `b = H_p(x, P∇u(x, t))` with `u` interpolated linearly in time.
    FromHj {
        traj: &'a Trajectory,
        spec: &'a HamiltonianSpec,
    },
}

impl DriftProvider<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            DriftProvider::Zero => "zero",
            DriftProvider::Constant(_) => "constant",
            DriftProvider::Analytic(_) => "analytic",
            DriftProvider::FromHj { .. } => "from_hj",
        }
    }

    pub fn at(&self, grid: &TorusGrid, t: f64) -> Result<VectorField> {
        let b = match self {
            DriftProvider::Zero => VectorField::zeros(grid),
            DriftProvider::Constant(v) => VectorField::constant(grid, v)?,
            DriftProvider::Analytic(f) => {
                let comps = (0..grid.dim())
                    .map(|j| Field::new(grid, (0..grid.len()).map(|i| f(&grid.point(i)[..grid.dim()], t)[j]).collect()))
                    .collect::<Result<Vec<_>>>()?;
                VectorField::new(comps)?
            }
            DriftProvider::FromHj { traj, spec } => {
                let u = traj.at(t)?;
                spec.hp_field(&dealiased_gradient(&u))?
            }
        };
        Ok(b)
    }

    fn check(&self, grid: &TorusGrid, tau: f64) -> Result<()> {
        match self {
            DriftProvider::Constant(v) if v.len() != grid.dim() => Err(LabError::InvalidParameter(
                format!("constant drift has {} components on a {}-d grid", v.len(), grid.dim()),
            )),
            DriftProvider::FromHj { traj, .. } => {
                if traj.grid() != grid {
                    return Err(LabError::GridMismatch("drift trajectory grid differs".into()));
                }
                if tau > traj.final_time() * (1.0 + 1e-12) {
                    return Err(LabError::InvalidParameter(format!(
                        "tau = {tau} beyond the drift horizon {}",
                        traj.final_time()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Splits `b` into its spatial mean and the zero-mean remainder.
fn split_mean(b: &VectorField) -> ([f64; 2], VectorField) {
    let mut mean = [0.0; 2];
    let comps = b
        .components()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            mean[j] = c.mean();
            c.map(|v| v - mean[j])
        })
        .collect();
    (mean, VectorField::new(comps).expect("same grid"))
}

/// Wavenumber used for the exact transport phase; Nyquist entries are dropped
/// so the multiplier keeps real fields real.
fn phase_wavevector(grid: &TorusGrid, i: usize) -> [f64; 2] {
    let n = grid.n() as i64;
    let k = grid.wavevector(i);
    let mut out = [0.0; 2];
    for j in 0..grid.dim() {
        out[j] = if k[j] == -n / 2 { 0.0 } else { k[j] as f64 };
    }
    out
}

/// Multiplier `exp(−dt σ(k) + sign · i dt k·b̄)`.
fn transport_propagate(u: &Field, symbol: &[f64], mean: [f64; 2], dt: f64, sign: f64) -> Field {
    let grid = u.grid();
    let coeffs = u
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = phase_wavevector(grid, i);
            let phase = sign * dt * (k[0] * mean[0] + k[1] * mean[1]);
            c * Complex64::from_polar((-dt * symbol[i]).exp(), phase)
        })
        .collect();
    Field::from_spectral(grid, coeffs)
}

/// `div P(b̃ Pρ)`.
fn transpose_advection(fluct: &VectorField, rho: &Field) -> Field {
    let flux = VectorField::new(
        fluct
            .components()
            .iter()
            .map(|bj| spectral::dealiased_product(bj, rho))
            .collect(),
    )
    .expect("same grid");
    spectral::divergence(&flux)
}

/// Frozen-coefficient linear generator `−𝓛 − b·∇` and its discrete transpose.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    symbol: Vec<f64>,
    mean: [f64; 2],
    fluct: VectorField,
    dt: f64,
}

impl LinearGenerator {
    pub fn new(cfg: &SolverConfig, drift: &VectorField, dt: f64) -> Result<Self> {
        cfg.validate()?;
        if drift.grid() != &cfg.grid {
            return Err(LabError::GridMismatch("drift is not on the solver grid".into()));
        }
        let (mean, fluct) = split_mean(drift);
        Ok(Self {
            symbol: cfg.symbol(),
            mean,
            fluct,
            dt,
        })
    }

    /// `u ↦ F(u − dt P(b̃·P∇u))`.
    pub fn forward_step(&self, u: &Field) -> Field {
        let grad = dealiased_gradient(u);
        let adv = spectral::dealias(&self.fluct.dot(&grad));
        transport_propagate(&u.axpby(1.0, &adv, -self.dt), &self.symbol, self.mean, self.dt, -1.0)
    }

    /// `ρ ↦ (I + dt Bᵀ) Fᵀ ρ`.
    pub fn adjoint_step(&self, rho: &Field) -> Field {
        let r = transport_propagate(rho, &self.symbol, self.mean, self.dt, 1.0);
        let div = transpose_advection(&self.fluct, &r);
        r.axpby(1.0, &div, self.dt)
    }
}

/// Integrates the adjoint equation backward from `τ` and returns `ρ(·, t)`
/// at increasing stored times `0, …, τ`.
pub fn solve_adjoint(
    cfg: &SolverConfig,
    drift: &DriftProvider<'_>,
    terminal: &TerminalDensity,
    tau: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = &cfg.grid;
    if terminal.field().grid() != grid {
        return Err(LabError::GridMismatch("terminal density is not on the solver grid".into()));
    }
    if !(tau > 0.0) {
        return Err(LabError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    drift.check(grid, tau)?;
    let steps = ((tau / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = tau / steps as f64;
    let symbol = cfg.symbol();
    let mass0 = terminal.field().integral();

    let mut rho = terminal.field().clone();
    let mut stored = vec![(tau, rho.clone())];
    for n in (0..steps).rev() {
        let t = n as f64 * dt;
        rho = backward_step(cfg, drift, &symbol, &rho, t, dt)?;
        let drift_rate = (rho.integral() - mass0).abs() / (tau - t);
        if drift_rate > 1e-6 {
            return Err(LabError::SolverFailure {
                time: t,
                reason: format!("mass drift {drift_rate:e} per unit time"),
            });
        }
        if n % cfg.store_every == 0 {
            stored.push((t, rho.clone()));
        }
    }
    stored.reverse();
    let (times, snaps) = stored.into_iter().unzip();
    Trajectory::new(times, snaps)
}

/// One stored backward step `t + dt → t`, split into substeps on rejection.
fn backward_step(
    cfg: &SolverConfig,
    drift: &DriftProvider<'_>,
    symbol: &[f64],
    rho: &Field,
    t: f64,
    dt: f64,
) -> Result<Field> {
    let h = cfg.grid.h();
    let mut reason = String::new();
    'halving: for k in 0..=cfg.max_halvings {
        let pieces = 1usize << k;
        let sub = dt / pieces as f64;
        let mut r = rho.clone();
        for j in (0..pieces).rev() {
            let tj = t + j as f64 * sub;
            let (mean, fluct) = split_mean(&drift.at(&cfg.grid, tj)?);
            let speed = fluct.magnitude().max();
            if speed > 0.0 && sub > h / (2.0 * speed) {
                reason = format!("advective bound violated: dt = {sub:e}, max|b̃| = {speed:e}");
                debug!("t = {t}: {reason}");
                continue 'halving;
            }
            let prop = transport_propagate(&r, symbol, mean, sub, 1.0);
            r = prop.axpby(1.0, &transpose_advection(&fluct, &prop), sub);
        }
        if r.values().iter().all(|v| v.is_finite()) {
            return Ok(r);
        }
        reason = "non-finite values".into();
    }
    Err(LabError::SolverFailure {
        time: t,
        reason: format!("adjoint step rejected after {} halvings; {reason}", cfg.max_halvings),
    })
}

/// `∫ρ(·, t) dx` at every stored time.
pub fn mass(traj: &Trajectory) -> Vec<f64> {
    traj.snapshots().iter().map(Field::integral).collect()
}

/// `−min(0, min ρ(·, t))` at every stored time.
pub fn positivity_defect(traj: &Trajectory) -> Vec<f64> {
    traj.snapshots().iter().map(|r| (-r.min()).max(0.0)).collect()
}

/// Points per axis at which the nonsmooth powers are integrated.
const H1_POINTS_1D: usize = 1 << 14;
const H1_POINTS_2D: usize = 256;

/// `(∬ |ρ|^{q'} + |∇ρ|^{q'})^{1/q'}`, trapezoid in time.
///
/// `|ρ|^{q'}` is not smooth where `ρ` or `∇ρ` vanish, so each snapshot is first
/// interpolated spectrally to a fine grid before summing.
pub fn h1_surrogate_norm(traj: &Trajectory, q_prime: f64) -> Result<f64> {
    let grid = traj.grid();
    let dim = grid.dim() as f64;
    if !(q_prime >= 1.0) {
        return Err(LabError::InvalidParameter(format!("q' must be at least 1, got {q_prime}")));
    }
    let upper = (dim + 2.0) / (dim + 1.0);
    if !(q_prime > 1.0 && q_prime < upper) {
        warn!("q' = {q_prime} outside (1, {upper}); surrogate carries no estimate");
    }
    let target = if grid.dim() == 1 { H1_POINTS_1D } else { H1_POINTS_2D };
    let factor = (target / grid.n()).max(1).next_power_of_two();
    let density = |rho: &Field| -> Result<f64> {
        let fine = rho.upsample(factor)?;
        let grad = spectral::gradient(&fine).magnitude();
        Ok(fine
            .values()
            .iter()
            .zip(grad.values())
            .map(|(r, g)| r.abs().powf(q_prime) + g.powf(q_prime))
            .sum::<f64>()
            * fine.grid().cell_volume())
    };
    let values = traj.snapshots().iter().map(density).collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(traj.times(), &values).powf(1.0 / q_prime))
}

/// Trapezoid rule over possibly nonuniform nodes.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
