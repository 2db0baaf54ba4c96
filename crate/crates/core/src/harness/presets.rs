//! Named sources, initial profiles and terminal densities.

use std::f64::consts::PI;

use crate::adjoint::TerminalDensity;
use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::TorusGrid;
use crate::hamiltonian::HamiltonianSpec;
use crate::hj_solver::Source;

/// `A cos(k·x) e^{−λt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSource {
    pub amplitude: f64,
    pub wavevector: [f64; 2],
    pub decay: f64,
}

impl Source for SmoothSource {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field {
        let k = self.wavevector;
        let a = self.amplitude * (-self.decay * t).exp();
        Field::from_fn(grid, |x| a * (k[0] * x[0] + k[1] * x.get(1).unwrap_or(&0.0)).cos())
    }

    fn gradient(&self, grid: &TorusGrid, t: f64) -> VectorField {
        let k = self.wavevector;
        let a = self.amplitude * (-self.decay * t).exp();
        let phase = Field::from_fn(grid, |x| {
            -a * (k[0] * x[0] + k[1] * x.get(1).unwrap_or(&0.0)).sin()
        });
        let comps = (0..grid.dim()).map(|j| phase.scale(k[j])).collect();
        VectorField::new(comps).expect("same grid")
    }
}

/// Space-time bump
/// `A exp(κ Σⱼ(cos(xⱼ − cⱼ) − 1)) exp(λ(cos(2π(t − t₀)/T) − 1))`.
///
/// The time factor is periodic with period `T`, so both factors of the
/// `L^q(𝕋ᴺ × (0, T))` norm are integrals of smooth periodic functions and
/// the trapezoid rule converges geometrically.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSource {
    pub width: f64,
    pub amplitude: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub center: Vec<f64>,
    pub t0: f64,
    pub horizon: f64,
}

/// Shape parameters shared by the members of a spike family.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeShape {
    pub dim: usize,
    pub q: f64,
    pub norm: f64,
    /// Spatial concentration at unit width; `κ = κ₀ / w²`.
    pub kappa0: f64,
    /// Temporal concentration at unit width; `λ = λ₀ / w⁶`, so the time
    /// width shrinks like `w³`.
    pub lambda0: f64,
    pub center: Vec<f64>,
    pub t0: f64,
    pub horizon: f64,
}

/// `∫₀^P g` for a smooth `P`-periodic `g`, doubling the trapezoid nodes until
/// two successive values agree to `1e−14` relative.
fn periodic_integral(period: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut m = 64usize;
    let mut prev = f64::NAN;
    loop {
        let h = period / m as f64;
        let v = (0..m).map(|i| g(i as f64 * h)).sum::<f64>() * h;
        if (v - prev).abs() <= 1e-14 * v.abs() || m >= 1 << 22 {
            return v;
        }
        prev = v;
        m *= 2;
    }
}

impl SpikeSource {
    fn unit_profile_lq(shape: &SpikeShape, kappa: f64, lambda: f64) -> f64 {
        let q = shape.q;
        let space = periodic_integral(2.0 * PI, |y| (q * kappa * (y.cos() - 1.0)).exp())
            .powi(shape.dim as i32);
        let time = periodic_integral(shape.horizon, |t| {
            (q * lambda * ((2.0 * PI * t / shape.horizon).cos() - 1.0)).exp()
        });
        (space * time).powf(1.0 / q)
    }

    /// Member of width `w` scaled so that `‖f‖_{L^q(Q_T)} = shape.norm`.
    pub fn normalized(shape: &SpikeShape, width: f64) -> Result<Self> {
        if !(width > 0.0) || !(shape.q >= 1.0) || !(shape.norm >= 0.0) || !(shape.horizon > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "spike needs width > 0, q >= 1, norm >= 0, T > 0 (got w = {width}, q = {}, norm = {})",
                shape.q, shape.norm
            )));
        }
        if shape.center.len() != shape.dim {
            return Err(LabError::InvalidParameter("spike center has the wrong dimension".into()));
        }
        let kappa = shape.kappa0 / (width * width);
        let lambda = shape.lambda0 / width.powi(6);
        let amplitude = shape.norm / Self::unit_profile_lq(shape, kappa, lambda);
        Ok(Self {
            width,
            amplitude,
            kappa,
            lambda,
            center: shape.center.clone(),
            t0: shape.t0,
            horizon: shape.horizon,
        })
    }

    pub fn family(shape: &SpikeShape, widths: &[f64]) -> Result<Vec<Self>> {
        widths.iter().map(|&w| Self::normalized(shape, w)).collect()
    }

    /// `‖f‖_∞ = A`, attained at `(center, t₀)`.
    pub fn sup_norm(&self) -> f64 {
        self.amplitude
    }

    fn time_factor(&self, t: f64) -> f64 {
        (self.lambda * ((2.0 * PI * (t - self.t0) / self.horizon).cos() - 1.0)).exp()
    }

    fn space_factor(&self, x: &[f64]) -> f64 {
        let e: f64 = x.iter().zip(&self.center).map(|(xj, cj)| (xj - cj).cos() - 1.0).sum();
        (self.kappa * e).exp()
    }

    /// Smallest time scale of the member, used to pick a resolving step.
    pub fn time_width(&self) -> f64 {
        self.horizon / (2.0 * PI * self.lambda.max(1.0).sqrt())
    }
}

impl Source for SpikeSource {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field {
        let a = self.amplitude * self.time_factor(t);
        Field::from_fn(grid, |x| a * self.space_factor(x))
    }

    fn gradient(&self, grid: &TorusGrid, t: f64) -> VectorField {
        let f = self.sample(grid, t);
        let comps = (0..grid.dim())
            .map(|j| {
                let c = self.center[j];
                Field::from_fn_indexed(grid, |i, x| -self.kappa * (x[j] - c).sin() * f.values()[i])
            })
            .collect();
        VectorField::new(comps).expect("same grid")
    }
}

/// Source making `u*(x, t) = e^{−t} cos x₁` an exact solution:
/// `f = (ε + μ − 1) u* + H(x, ∇u*)`.
#[derive(Debug, Clone)]
pub struct ManufacturedSource {
    pub eps: f64,
    pub mu: f64,
    pub spec: HamiltonianSpec,
}

impl ManufacturedSource {
    pub fn exact(&self, grid: &TorusGrid, t: f64) -> Field {
        Field::from_fn(grid, |x| (-t).exp() * x[0].cos())
    }
}

impl Source for ManufacturedSource {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field {
        let dim = grid.dim();
        let e = (-t).exp();
        Field::from_fn(grid, |x| {
            let p = [-e * x[0].sin(), 0.0];
            (self.eps + self.mu - 1.0) * e * x[0].cos() + self.spec.eval_h(x, &p[..dim])
        })
    }
}

/// Any of the configurable sources.
#[derive(Debug, Clone)]
pub enum SourcePreset {
    Zero,
    Smooth(SmoothSource),
    Spike(SpikeSource),
    Manufactured(ManufacturedSource),
}

impl SourcePreset {
    pub fn name(&self) -> &'static str {
        match self {
            SourcePreset::Zero => "zero",
            SourcePreset::Smooth(_) => "smooth",
            SourcePreset::Spike(_) => "spike_family",
            SourcePreset::Manufactured(_) => "manufactured",
        }
    }
}

impl Source for SourcePreset {
    fn sample(&self, grid: &TorusGrid, t: f64) -> Field {
        match self {
            SourcePreset::Zero => Field::zeros(grid),
            SourcePreset::Smooth(s) => s.sample(grid, t),
            SourcePreset::Spike(s) => s.sample(grid, t),
            SourcePreset::Manufactured(s) => s.sample(grid, t),
        }
    }

    fn gradient(&self, grid: &TorusGrid, t: f64) -> VectorField {
        match self {
            SourcePreset::Zero => VectorField::zeros(grid),
            SourcePreset::Smooth(s) => s.gradient(grid, t),
            SourcePreset::Spike(s) => s.gradient(grid, t),
            SourcePreset::Manufactured(s) => s.gradient(grid, t),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, SourcePreset::Zero)
    }
}

/// Initial data presets.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Zero,
    Constant(f64),
    /// `A sin x₁`
    Sin(f64),
    /// `A cos x₁`
    Cos(f64),
    /// `A (sin x₁ + 0.3 cos 2x_N)`
    Mixed(f64),
}

impl InitialProfile {
    pub fn parse(name: &str, amplitude: f64) -> Result<Self> {
        Ok(match name {
            "zero" => InitialProfile::Zero,
            "constant" => InitialProfile::Constant(amplitude),
            "sin" => InitialProfile::Sin(amplitude),
            "cos" => InitialProfile::Cos(amplitude),
            "mixed" => InitialProfile::Mixed(amplitude),
            other => return Err(LabError::Config(format!("unknown initial profile `{other}`"))),
        })
    }

    pub fn sample(&self, grid: &TorusGrid) -> Field {
        let last = grid.dim() - 1;
        match *self {
            InitialProfile::Zero => Field::zeros(grid),
            InitialProfile::Constant(c) => Field::constant(grid, c),
            InitialProfile::Sin(a) => Field::from_fn(grid, |x| a * x[0].sin()),
            InitialProfile::Cos(a) => Field::from_fn(grid, |x| a * x[0].cos()),
            InitialProfile::Mixed(a) => {
                Field::from_fn(grid, |x| a * (x[0].sin() + 0.3 * (2.0 * x[last]).cos()))
            }
        }
    }
}

/// Terminal density presets.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalPreset {
    Uniform,
    Bump { kappa: f64, center: Vec<f64> },
}

impl TerminalPreset {
    pub fn build(&self, grid: &TorusGrid) -> Result<TerminalDensity> {
        match self {
            TerminalPreset::Uniform => Ok(TerminalDensity::uniform(grid)),
            TerminalPreset::Bump { kappa, center } => TerminalDensity::bump(grid, *kappa, center),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::space_time_lebesgue_norm;
    use crate::grid::make_grid;
    use crate::trajectory::Trajectory;

    fn shape(dim: usize) -> SpikeShape {
        SpikeShape {
            dim,
            q: 4.0,
            norm: 1.0,
            kappa0: 1.0,
            lambda0: 0.25,
            center: vec![PI / 2.0; dim],
            t0: 0.25,
            horizon: 0.5,
        }
    }

    #[test]
    fn spike_amplitudes_fix_the_norm() {
        let sh = shape(1);
        for member in SpikeSource::family(&sh, &[1.0, 0.5, 0.25]).unwrap() {
            // independent check: grid quadrature in space, trapezoid in time
            let g = make_grid(1, 256).unwrap();
            let steps = 4096;
            let times: Vec<f64> = (0..=steps).map(|k| 0.5 * k as f64 / steps as f64).collect();
            let snaps = times.iter().map(|&t| member.sample(&g, t)).collect();
            let tr = Trajectory::new(times, snaps).unwrap();
            let norm = space_time_lebesgue_norm(&tr, 4.0).unwrap();
            assert!((norm - 1.0).abs() < 1e-10, "width {}: {norm}", member.width);
        }
    }

    #[test]
    fn spike_sup_grows_with_concentration() {
        let fam = SpikeSource::family(&shape(1), &[1.0, 0.125]).unwrap();
        assert!(fam[1].sup_norm() / fam[0].sup_norm() >= 8.0);
        let g = make_grid(1, 64).unwrap();
        let peak = fam[0].sample(&g, 0.25).max();
        assert!((peak - fam[0].sup_norm()).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_spectral() {
        let g = make_grid(2, 64).unwrap();
        let sm = SmoothSource {
            amplitude: 0.7,
            wavevector: [2.0, 1.0],
            decay: 1.0,
        };
        let spec_grad = crate::spectral::gradient(&sm.sample(&g, 0.3));
        assert!(sm.gradient(&g, 0.3).max_abs_diff(&spec_grad) < 1e-12);
        let sp = SpikeSource::normalized(&shape(2), 1.0).unwrap();
        let spec_grad = crate::spectral::gradient(&sp.sample(&g, 0.2));
        assert!(sp.gradient(&g, 0.2).max_abs_diff(&spec_grad) < 1e-10);
    }

    #[test]
    fn initial_profiles() {
        let g = make_grid(1, 16).unwrap();
        assert_eq!(InitialProfile::parse("sin", 2.0).unwrap(), InitialProfile::Sin(2.0));
        assert!(InitialProfile::parse("square", 1.0).is_err());
        assert!((InitialProfile::Cos(1.0).sample(&g).max() - 1.0).abs() < 1e-15);
    }
}
