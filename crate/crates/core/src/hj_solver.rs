//! Forward IMEX pseudospectral solver for
//! `∂ₜu − εΔu + μ(−Δ)ˢu + H(x, ∇u) = f`, `u(·, 0) = u₀`.
//!
//! One step of size `dt` is the exponential (Lawson) Euler update
//!
//! ```text
//! uⁿ⁺¹ = E ( uⁿ + dt · P[ fⁿ − H(x, P∇uⁿ) ] ),   E = exp(−dt(ε|k|² + μ|k|^{2s}))
//! ```
//!
//! where `P` is the 2/3-rule projection. Diffusion is integrated exactly and
//! the Hamiltonian and source are explicit. A stored step is split into `2ᵏ`
//! equal substeps when the advective bound `dt ≤ h / (2 max|H_p|)` fails or
//! when the new iterate is not finite or breaks the comparison bound; `k` is
//! capped by [`SolverConfig::max_halvings`].

use log::debug;
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::TorusGrid;
use crate::hamiltonian::HamiltonianSpec;
use crate::spectral::{self, check_diffusion, check_order};
use crate::trajectory::Trajectory;

/// Source term `f(x, t)` sampled at collocation nodes.
pub trait Source: Sync {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field;

    /// `∇f(·, t)`; defaults to the spectral gradient of the samples.
    fn gradient(&self, grid: &TorusGrid, t: f64) -> VectorField {
        spectral::gradient(&self.sample(grid, t))
    }

    /// Sources that vanish identically can skip sampling.
    fn is_zero(&self) -> bool {
        false
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl Source for ZeroSource {
    fn sample(&self, grid: &TorusGrid, _t: f64) -> Field {
        Field::zeros(grid)
    }

    fn gradient(&self, grid: &TorusGrid, _t: f64) -> VectorField {
        VectorField::zeros(grid)
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Source given by a closure `f(x, t)`.
pub struct FnSource<F> {
    f: F,
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> FnSource<F> {
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> Source for FnSource<F> {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field {
        Field::from_fn(grid, |x| (self.f)(x, t))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub eps: f64,
    pub mu: f64,
    pub s: f64,
    /// Final time `T`.
    pub horizon: f64,
    pub dt: f64,
    pub grid: TorusGrid,
    /// Store every `store_every`-th step (the final time is always stored).
    pub store_every: usize,
    /// Propagator time used to mollify initial data that is not band limited.
    pub mollify_scale: f64,
    pub max_halvings: u32,
    /// Absolute slack allowed in the discrete comparison bound.
    pub comparison_slack: f64,
}

impl SolverConfig {
    pub fn new(grid: TorusGrid, eps: f64, mu: f64, s: f64, horizon: f64, dt: f64) -> Result<Self> {
        let cfg = Self {
            eps,
            mu,
            s,
            horizon,
            dt,
            grid,
            store_every: 1,
            mollify_scale: 1e-4,
            max_halvings: 10,
            comparison_slack: 1e-3,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_diffusion(self.eps, self.mu)?;
        check_order(self.s)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon * (1.0 + 1e-12)) {
            return Err(LabError::InvalidParameter(format!(
                "time step must satisfy 0 < dt <= T, got dt = {} with T = {}",
                self.dt, self.horizon
            )));
        }
        if self.store_every == 0 {
            return Err(LabError::InvalidParameter("store_every must be at least 1".into()));
        }
        if !(self.mollify_scale >= 0.0) || !(self.comparison_slack >= 0.0) {
            return Err(LabError::InvalidParameter(
                "mollify_scale and comparison_slack must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Number of stored-grid steps and the uniform step that hits `T` exactly.
    pub fn step_count(&self) -> (usize, f64) {
        let steps = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.horizon / steps as f64)
    }

    pub(crate) fn symbol(&self) -> Vec<f64> {
        spectral::mixed_symbol(&self.grid, self.eps, self.mu, self.s)
    }
}

/// Exact diffusion propagator `exp(−dt σ(k))` applied in Fourier space.
pub(crate) fn propagate(u: &Field, symbol: &[f64], dt: f64) -> Field {
    let coeffs = u
        .spectrum()
        .iter()
        .zip(symbol)
        .map(|(c, sig)| c * (-dt * sig).exp())
        .collect();
    Field::from_spectral(u.grid(), coeffs)
}

/// `P∇u`, the dealiased gradient used at collocation nodes.
pub fn dealiased_gradient(u: &Field) -> VectorField {
    let grid = u.grid();
    let comps = (0..grid.dim())
        .map(|j| {
            let coeffs = u
                .spectrum()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if grid.is_nyquist(i) || !grid.passes_two_thirds(i) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c * Complex64::new(0.0, grid.wavevector(i)[j] as f64)
                    }
                })
                .collect();
            Field::from_spectral(grid, coeffs)
        })
        .collect();
    VectorField::new(comps).expect("components share a grid")
}

fn max_speed(spec: &HamiltonianSpec, grad: &VectorField) -> Result<f64> {
    if spec.is_zero() {
        return Ok(0.0);
    }
    Ok(spec.hp_field(grad)?.magnitude().max())
}

/// Explicit part `P[f − H(x, P∇u)]` and the largest drift speed.
fn explicit_part(
    spec: &HamiltonianSpec,
    u: &Field,
    f: Option<&Field>,
) -> Result<(Field, f64)> {
    let grad = dealiased_gradient(u);
    let speed = max_speed(spec, &grad)?;
    let mut rhs = spec.h_field(&grad).scale(-1.0);
    if let Some(f) = f {
        rhs = rhs.add(f);
    }
    Ok((spectral::dealias(&rhs), speed))
}

struct Stepper<'a> {
    cfg: &'a SolverConfig,
    spec: &'a HamiltonianSpec,
    source: &'a dyn Source,
    symbol: Vec<f64>,
    floor: f64,
    c_h: f64,
    forcing_budget: f64,
}

impl Stepper<'_> {
    fn substeps(&self, u: &Field, t: f64, dt: f64, pieces: usize) -> Result<(Field, f64)> {
        let h = self.cfg.grid.h();
        let sub = dt / pieces as f64;
        let mut u = u.clone();
        let mut budget = 0.0;
        for j in 0..pieces {
            let tj = t + j as f64 * sub;
            let f = (!self.source.is_zero()).then(|| self.source.sample(&self.cfg.grid, tj));
            let (rhs, speed) = explicit_part(self.spec, &u, f.as_ref())?;
            if speed > 0.0 && sub > h / (2.0 * speed) {
                return Err(LabError::SolverFailure {
                    time: tj,
                    reason: format!("advective bound violated: dt = {sub:e}, max|H_p| = {speed:e}"),
                });
            }
            budget += sub * f.as_ref().map_or(0.0, |f| f.sup_norm());
            u = propagate(&u.axpby(1.0, &rhs, sub), &self.symbol, sub);
        }
        Ok((u, budget))
    }

    fn step(&mut self, u: &Field, t: f64, dt: f64) -> Result<Field> {
        let mut last_reason = String::new();
        for k in 0..=self.cfg.max_halvings {
            let pieces = 1usize << k;
            match self.substeps(u, t, dt, pieces) {
                Ok((next, budget)) => {
                    if next.values().iter().any(|v| !v.is_finite()) {
                        last_reason = "non-finite values".into();
                    } else {
                        let t_next = t + dt;
                        let bound = self.floor
                            - (self.forcing_budget + budget)
                            - t_next * self.c_h
                            - self.cfg.comparison_slack;
                        if next.min() < bound {
                            last_reason = format!(
                                "comparison bound violated: min u = {:e} < {:e}",
                                next.min(),
                                bound
                            );
                        } else {
                            if k > 0 {
                                debug!("t = {t}: accepted with {pieces} substeps");
                            }
                            self.forcing_budget += budget;
                            return Ok(next);
                        }
                    }
                }
                Err(LabError::SolverFailure { reason, .. }) => last_reason = reason,
                Err(e) => return Err(e),
            }
            debug!("t = {t}: step rejected with {pieces} substeps ({last_reason})");
        }
        Err(LabError::SolverFailure {
            time: t,
            reason: format!(
                "step rejected after {} halvings; last reason: {last_reason}",
                self.cfg.max_halvings
            ),
        })
    }
}

/// Mollifies `u0` by the diffusion propagator unless it is band limited.
pub fn prepare_initial(cfg: &SolverConfig, u0: &Field) -> Field {
    if u0.is_band_limited(1e-12) || cfg.mollify_scale == 0.0 {
        u0.clone()
    } else {
        propagate(u0, &cfg.symbol(), cfg.mollify_scale)
    }
}

/// Integrates the Cauchy problem and returns the stored trajectory.
pub fn solve_hj(
    cfg: &SolverConfig,
    spec: &HamiltonianSpec,
    u0: &Field,
    source: &dyn Source,
) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.grid() != &cfg.grid {
        return Err(LabError::GridMismatch(
            "initial datum is not on the solver grid".into(),
        ));
    }
    let dim = cfg.grid.dim();
    let c_h = (0..cfg.grid.len())
        .map(|i| spec.eval_h(&cfg.grid.point(i)[..dim], &[0.0; 2][..dim]).abs())
        .fold(0.0, f64::max);
    let u = prepare_initial(cfg, u0);
    let mut stepper = Stepper {
        cfg,
        spec,
        source,
        symbol: cfg.symbol(),
        floor: u.min(),
        c_h,
        forcing_budget: 0.0,
    };
    let (steps, dt) = cfg.step_count();
    let mut times = vec![0.0];
    let mut snaps = vec![u.clone()];
    let mut current = u;
    for n in 0..steps {
        let t = n as f64 * dt;
        current = stepper.step(&current, t, dt)?;
        if (n + 1) % cfg.store_every == 0 || n + 1 == steps {
            times.push((n + 1) as f64 * dt);
            snaps.push(current.clone());
        }
    }
    Trajectory::new(times, snaps)
}

/// `sup_x |∇u(·, t)|` at every stored time.
pub fn lipschitz_seminorm(traj: &Trajectory) -> Vec<f64> {
    traj.snapshots()
        .iter()
        .map(|u| spectral::gradient(u).magnitude().max())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn heat_config(n: usize, dt: f64, horizon: f64) -> SolverConfig {
        SolverConfig::new(make_grid(1, n).unwrap(), 1.0, 1.0, 0.5, horizon, dt).unwrap()
    }

    #[test]
    fn mode_one_decay() {
        let cfg = heat_config(64, 1e-3, 0.5);
        let g = cfg.grid.clone();
        let u0 = Field::from_fn(&g, |x| x[0].cos());
        let tr = solve_hj(&cfg, &HamiltonianSpec::zero(), &u0, &ZeroSource).unwrap();
        for (t, u) in tr.times().iter().zip(tr.snapshots()) {
            let exact = u0.scale((-2.0 * t).exp());
            assert!(u.max_abs_diff(&exact) <= 1e-6);
        }
        assert!((tr.final_time() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constants_are_stationary() {
        let cfg = heat_config(32, 1e-2, 0.3);
        let u0 = Field::constant(&cfg.grid, 1.7);
        let spec = HamiltonianSpec::power(2.0, 0.5).unwrap();
        let tr = solve_hj(&cfg, &spec, &u0, &ZeroSource).unwrap();
        assert!(tr.last().max_abs_diff(&u0) < 1e-13);
    }

    fn manufactured_error(dt: f64) -> f64 {
        let spec = HamiltonianSpec::power(2.0, 0.5).unwrap();
        let cfg = heat_config(64, dt, 0.5);
        // u* = e^{−t} cos x: ∂ₜu* + 𝓛u* = e^{−t} cos x, H = ½ e^{−2t} sin²x
        let f = FnSource::new(|x: &[f64], t: f64| {
            (-t).exp() * x[0].cos() + 0.5 * (-2.0 * t).exp() * x[0].sin().powi(2)
        });
        let u0 = Field::from_fn(&cfg.grid, |x| x[0].cos());
        let tr = solve_hj(&cfg, &spec, &u0, &f).unwrap();
        let exact = u0.scale((-0.5f64).exp());
        tr.last().max_abs_diff(&exact)
    }

    #[test]
    fn manufactured_first_order() {
        let e1 = manufactured_error(2e-3);
        let e2 = manufactured_error(1e-3);
        let ratio = e1 / e2;
        assert!(ratio > 1.8 && ratio < 2.2, "ratio {ratio}");
    }

    #[test]
    fn comparison_without_forcing() {
        let spec = HamiltonianSpec::power(2.0, 0.5).unwrap();
        let cfg = heat_config(64, 1e-3, 0.5);
        let u0 = Field::from_fn(&cfg.grid, |x| x[0].sin() + 0.4 * (3.0 * x[0]).cos());
        let tr = solve_hj(&cfg, &spec, &u0, &ZeroSource).unwrap();
        for w in tr.snapshots().windows(2) {
            assert!(w[1].max() <= w[0].max() + 1e-8 * 1e-3);
            assert!(w[1].min() >= w[0].min() - 1e-8 * 1e-3);
        }
        // d/dt ∫u = −∫H
        let dt = tr.uniform_step().unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in tr.snapshots().iter().zip(&tr.snapshots()[1..]) {
            let h = spec.h_field(&dealiased_gradient(a)).integral();
            worst = worst.max(((b.integral() - a.integral()) / dt + h).abs());
        }
        assert!(worst < 1e-2, "mean drift defect {worst}");
    }

    #[test]
    fn lipschitz_examples() {
        let g = make_grid(1, 32).unwrap();
        let snaps = vec![
            Field::from_fn(&g, |x| x[0].sin()),
            Field::constant(&g, 2.0),
            Field::from_fn(&g, |x| (2.0 * x[0]).sin()),
        ];
        let tr = Trajectory::new(vec![0.0, 1.0, 2.0], snaps).unwrap();
        let l = lipschitz_seminorm(&tr);
        assert!((l[0] - 1.0).abs() < 1e-12);
        assert!(l[1] < 1e-13);
        assert!((l[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rough_data_is_mollified() {
        let cfg = heat_config(64, 1e-3, 1e-3);
        let u0 = Field::from_fn(&cfg.grid, |x| (x[0] - std::f64::consts::PI).abs());
        let m = prepare_initial(&cfg, &u0);
        assert!(m.max_abs_diff(&u0) < 5e-2);
        assert!(m.max_abs_diff(&u0) > 0.0);
        let smooth = Field::from_fn(&cfg.grid, |x| x[0].cos());
        assert_eq!(prepare_initial(&cfg, &smooth).values(), smooth.values());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let g = make_grid(1, 16).unwrap();
        assert!(SolverConfig::new(g.clone(), 0.0, 0.0, 0.5, 1.0, 0.1).is_err());
        assert!(SolverConfig::new(g.clone(), 1.0, 0.0, 0.5, 1.0, 2.0).is_err());
        assert!(SolverConfig::new(g, 1.0, 0.0, 1.5, 1.0, 0.1).is_err());
    }
}
