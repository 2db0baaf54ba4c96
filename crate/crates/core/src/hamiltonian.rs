//! Model Hamiltonians `H(x,p) = a(x)·c₀·((δ² + |p|²)^{γ/2} − δ^γ)`, their
//! derivatives, Legendre transforms, sampled structural checks and the
//! exponent arithmetic of the gradient-bound thresholds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::MAX_DIM;

/// Smooth periodic coefficient `a(x)` multiplying the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Coefficient {
    One,
    /// `a(x) = 1 + A·Πⱼ cos xⱼ`.
    CosBump { amplitude: f64 },
}

impl Coefficient {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Coefficient::One => 1.0,
            Coefficient::CosBump { amplitude } => {
                1.0 + amplitude * x.iter().map(|v| v.cos()).product::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        if let Coefficient::CosBump { amplitude } = *self {
            for (j, o) in out.iter_mut().enumerate().take(x.len()) {
                let mut prod = -amplitude * x[j].sin();
                for (i, xi) in x.iter().enumerate() {
                    if i != j {
                        prod *= xi.cos();
                    }
                }
                *o = prod;
            }
        }
        out
    }

    /// `(a_min, a_max)` over the torus.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Coefficient::One => (1.0, 1.0),
            Coefficient::CosBump { amplitude } => (1.0 - amplitude.abs(), 1.0 + amplitude.abs()),
        }
    }

    /// A point where `a` attains its minimum.
    pub fn argmin(&self, dim: usize) -> Vec<f64> {
        match *self {
            Coefficient::One => vec![0.0; dim],
            Coefficient::CosBump { amplitude } => {
                let mut x = vec![0.0; dim];
                if amplitude > 0.0 {
                    x[0] = PI;
                }
                x
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Coefficient::One => "one",
            Coefficient::CosBump { .. } => "cos_bump",
        }
    }
}

/// Parameters of the model Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub gamma: f64,
    pub c0: f64,
    pub delta: f64,
    pub coef: Coefficient,
}

/// Default smoothing: `0` for `γ ≥ 2`, `0.05` below (keeps `H_p` C¹ at `p = 0`).
pub fn default_delta(gamma: f64) -> f64 {
    if gamma >= 2.0 {
        0.0
    } else {
        0.05
    }
}

impl HamiltonianSpec {
    pub fn new(gamma: f64, c0: f64, delta: f64, coef: Coefficient) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(LabError::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(LabError::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        if coef.bounds().0 < 0.0 {
            return Err(LabError::InvalidParameter(
                "coefficient field must be nonnegative".into(),
            ));
        }
        Ok(Self {
            gamma,
            c0,
            delta,
            coef,
        })
    }

    /// `c₀|p|^γ` with `a ≡ 1` and the default smoothing for `γ`.
    pub fn power(gamma: f64, c0: f64) -> Result<Self> {
        Self::new(gamma, c0, default_delta(gamma), Coefficient::One)
    }

    /// The degenerate `H ≡ 0` used for linear checks. It does not satisfy the
    /// coercivity bounds.
    pub fn zero() -> Self {
        Self {
            gamma: 2.0,
            c0: 0.0,
            delta: 0.0,
            coef: Coefficient::One,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0
    }

    fn weight(&self, x: &[f64]) -> f64 {
        self.coef.value(x) * self.c0
    }

    /// Radial profile `(δ² + r²)^{γ/2} − δ^γ`.
    fn profile(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        (self.delta * self.delta + r * r).powf(self.gamma / 2.0) - self.delta.powf(self.gamma)
    }

    /// `d/dr` of the profile divided by `r`: `γ (δ² + r²)^{(γ−2)/2}`.
    fn profile_slope_over_r(&self, r: f64) -> f64 {
        self.gamma * (self.delta * self.delta + r * r).powf((self.gamma - 2.0) / 2.0)
    }

    pub fn eval_h(&self, x: &[f64], p: &[f64]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.weight(x) * self.profile(norm(p))
    }

    /// `H_p(x, p)`; undefined at `p = 0` when `γ < 2` and `δ = 0`.
    pub fn eval_hp(&self, x: &[f64], p: &[f64]) -> Result<[f64; MAX_DIM]> {
        let mut out = [0.0; MAX_DIM];
        if self.is_zero() {
            return Ok(out);
        }
        let r = norm(p);
        if r == 0.0 {
            if self.gamma < 2.0 && self.delta == 0.0 {
                return Err(LabError::Domain(
                    "H_p is singular at p = 0 for gamma < 2 without smoothing".into(),
                ));
            }
            return Ok(out);
        }
        let factor = self.weight(x) * self.profile_slope_over_r(r);
        for (o, pj) in out.iter_mut().zip(p) {
            *o = factor * pj;
        }
        Ok(out)
    }

    pub fn eval_hx(&self, x: &[f64], p: &[f64]) -> [f64; MAX_DIM] {
        if self.is_zero() {
            return [0.0; MAX_DIM];
        }
        let prof = self.c0 * self.profile(norm(p));
        let g = self.coef.gradient(x);
        [g[0] * prof, g[1] * prof]
    }

    /// `L(x, ν) = sup_p { p·ν − H(x, p) }`.
    pub fn legendre(&self, x: &[f64], nu: &[f64]) -> Result<f64> {
        self.legendre_with_argmax(x, nu).map(|(l, _)| l)
    }

    /// Legendre transform together with the maximizer `p*` (`ν = H_p(x, p*)`).
    ///
    /// The model is radial in `p`, so the supremum reduces to the scalar
    /// problem `sup_r { r|ν| − a c₀ φ(r) }`, solved in closed form when `δ = 0`
    /// and by damped Newton on `a c₀ φ'(r) = |ν|` otherwise.
    pub fn legendre_with_argmax(&self, x: &[f64], nu: &[f64]) -> Result<(f64, [f64; MAX_DIM])> {
        let m = norm(nu);
        let weight = self.weight(x);
        if m == 0.0 {
            return Ok((0.0, [0.0; MAX_DIM]));
        }
        if weight == 0.0 {
            return Ok((f64::INFINITY, [0.0; MAX_DIM]));
        }
        let gamma = self.gamma;
        let guess = (m / (weight * gamma)).powf(1.0 / (gamma - 1.0));
        let r = if self.delta == 0.0 {
            guess
        } else {
            self.radial_newton(weight, m, guess)?
        };
        let value = r * m - weight * self.profile(r);
        let mut p = [0.0; MAX_DIM];
        for (pj, nj) in p.iter_mut().zip(nu) {
            *pj = r * nj / m;
        }
        Ok((value, p))
    }

    fn radial_newton(&self, weight: f64, m: f64, guess: f64) -> Result<f64> {
        const MAX_ITER: usize = 100;
        let d2 = self.delta * self.delta;
        let gamma = self.gamma;
        let slope = |r: f64| weight * gamma * (d2 + r * r).powf((gamma - 2.0) / 2.0) * r;
        let curvature = |r: f64| {
            weight * gamma * (d2 + r * r).powf((gamma - 4.0) / 2.0) * (d2 + (gamma - 1.0) * r * r)
        };
        let mut r = guess.max(f64::MIN_POSITIVE);
        for _ in 0..MAX_ITER {
            let g = slope(r) - m;
            let step = g / curvature(r);
            let mut next = r - step;
            if next <= 0.0 {
                next = 0.5 * r;
            }
            let done = (next - r).abs() <= 1e-14 * (1.0 + r) || g.abs() <= 1e-13 * m.max(1.0);
            r = next;
            if done && (slope(r) - m).abs() <= 1e-10 * m.max(1.0) {
                return Ok(r);
            }
        }
        Err(LabError::LegendreNonConvergence {
            iterations: MAX_ITER,
            nu_norm: m,
        })
    }

    /// `H(x, ∇u)` at every node.
    pub fn h_field(&self, grad: &VectorField) -> Field {
        let grid = grad.grid();
        let dim = grid.dim();
        Field::from_fn_indexed(grid, |i, x| {
            let p = grad.at(i);
            self.eval_h(x, &p[..dim])
        })
    }

    /// `H_p(x, ∇u)` at every node.
    pub fn hp_field(&self, grad: &VectorField) -> Result<VectorField> {
        let grid = grad.grid();
        let dim = grid.dim();
        let mut comps = vec![Vec::with_capacity(grid.len()); dim];
        for i in 0..grid.len() {
            let x = grid.point(i);
            let p = grad.at(i);
            let hp = self.eval_hp(&x[..dim], &p[..dim])?;
            for (c, v) in comps.iter_mut().zip(hp) {
                c.push(v);
            }
        }
        VectorField::new(comps.into_iter().map(|c| Field::new(grid, c)).collect::<Result<_>>()?)
    }

    /// `H_x(x, ∇u)` at every node.
    pub fn hx_field(&self, grad: &VectorField) -> VectorField {
        let grid = grad.grid();
        let dim = grid.dim();
        let comps = (0..dim)
            .map(|j| {
                Field::from_fn_indexed(grid, |i, x| {
                    let p = grad.at(i);
                    self.eval_hx(x, &p[..dim])[j]
                })
            })
            .collect();
        VectorField::from_components(comps)
    }

    /// `L(x, H_p(x, ∇u)) = H_p·∇u − H` at every node (exact by convex duality).
    pub fn lagrangian_along_drift(&self, grad: &VectorField) -> Result<Field> {
        let hp = self.hp_field(grad)?;
        Ok(hp.dot(grad).sub(&self.h_field(grad)))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Conjugate exponent `γ' = γ / (γ − 1)`.
pub fn gamma_conj(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(LabError::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(gamma / (gamma - 1.0))
}

fn check_dim(dim: usize) -> Result<f64> {
    if dim == 0 || dim > MAX_DIM {
        return Err(LabError::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
    }
    Ok(dim as f64)
}

/// Integrability threshold on the source: `N + 2` for `1 < γ ≤ 3`, else
/// `(N + 2)(γ − 1)/2`.
pub fn q_min(gamma: f64, dim: usize) -> Result<f64> {
    let n = check_dim(dim)?;
    if !(gamma > 1.0) {
        return Err(LabError::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(if gamma <= 3.0 {
        n + 2.0
    } else {
        (n + 2.0) * (gamma - 1.0) / 2.0
    })
}

/// `m' = 1 + (N + 2)/q`.
pub fn m_prime(q: f64, dim: usize) -> Result<f64> {
    let n = check_dim(dim)?;
    if !(q > 1.0) {
        return Err(LabError::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    Ok(1.0 + (n + 2.0) / q)
}

/// Exponent bookkeeping for one `(γ, N, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentBook {
    pub gamma: f64,
    pub gamma_conj: f64,
    pub dim: usize,
    pub q: f64,
    pub m_prime: f64,
    pub q_min: f64,
}

impl ExponentBook {
    pub fn new(gamma: f64, dim: usize, q: f64) -> Result<Self> {
        Ok(Self {
            gamma,
            gamma_conj: gamma_conj(gamma)?,
            dim,
            q,
            m_prime: m_prime(q, dim)?,
            q_min: q_min(gamma, dim)?,
        })
    }

    pub fn above_threshold(&self) -> bool {
        self.q > self.q_min
    }

    /// `m' < γ'`.
    pub fn absorption(&self) -> bool {
        self.m_prime < self.gamma_conj
    }

    /// Whether some `θ ∈ (0,1)` gives `k = (γ−1)m' − 1 + θ ≤ γ`, i.e.
    /// `(γ − 1)m' < γ + 1`.
    pub fn theta_reduction(&self) -> bool {
        (self.gamma - 1.0) * self.m_prime < self.gamma + 1.0
    }

    /// Midpoint of the window `((N+2)(γ−1)/γ, N+2)` for the auxiliary exponent
    /// `r` of the cross estimate.
    pub fn cross_window_midpoint(&self) -> f64 {
        let n = self.dim as f64;
        0.5 * ((n + 2.0) * (self.gamma - 1.0) / self.gamma + n + 2.0)
    }
}

/// Outcome of a sampled structural check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub name: String,
    pub passed: bool,
    /// Smallest constant making every bound hold on the sample.
    pub constant: f64,
    /// Sample demanding the largest constant, with the bound it stressed.
    pub witness: Option<Witness>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub bound: String,
    pub required: f64,
}

/// Constants above this are treated as a failed bound on the sampled range.
pub const CONSTANT_CAP: f64 = 1e3;
/// Range of sampled momentum magnitudes.
pub const SAMPLE_RANGE: (f64, f64) = (1e-3, 1e4);

/// Smallest `C ≥ 0` with `A/C − C ≤ B`, i.e. `C² + B C − A ≥ 0`.
fn lower_bound_constant(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    0.5 * (-b + (b * b + 4.0 * a).sqrt())
}

fn sample_points(dim: usize, count: usize, seed: u64, coef: &Coefficient) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (SAMPLE_RANGE.0.ln(), SAMPLE_RANGE.1.ln());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let x: Vec<f64> = if i % 4 == 0 {
            coef.argmin(dim)
        } else {
            (0..dim).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
        };
        let r = rng.gen_range(lo..hi).exp();
        let dir: Vec<f64> = match dim {
            1 => vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }],
            _ => {
                let t: f64 = rng.gen_range(0.0..2.0 * PI);
                vec![t.cos(), t.sin()]
            }
        };
        out.push((x, dir.iter().map(|d| d * r).collect()));
    }
    out
}

struct Tracker {
    constant: f64,
    witness: Option<Witness>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            constant: 1.0,
            witness: None,
        }
    }

    fn update(&mut self, required: f64, x: &[f64], p: &[f64], bound: &str) {
        if required > self.constant {
            self.constant = required;
            self.witness = Some(Witness {
                x: x.to_vec(),
                p: p.to_vec(),
                bound: bound.into(),
                required,
            });
        }
    }
}

/// Sampled verification of the four growth bounds on `H`, `H_p·p − H`, `H_x`
/// and `H_p`.
pub fn check_assumption_h(
    spec: &HamiltonianSpec,
    dim: usize,
    sample_count: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    check_dim(dim)?;
    if sample_count < 1000 {
        return Err(LabError::InvalidParameter("at least 1000 samples required".into()));
    }
    let g = spec.gamma;
    let mut t = Tracker::new();
    for (x, p) in sample_points(dim, sample_count, seed, &spec.coef) {
        let r = norm(&p);
        let h = spec.eval_h(&x, &p);
        let hp = spec.eval_hp(&x, &p)?;
        let hx = spec.eval_hx(&x, &p);
        let rg = r.powf(g);
        let hp_norm = norm(&hp[..dim]);
        let hp_dot_p: f64 = hp.iter().zip(&p).map(|(a, b)| a * b).sum();
        t.update(lower_bound_constant(rg, h), &x, &p, "coercivity: |p|^γ/C − C ≤ H");
        t.update(h / (rg + 1.0), &x, &p, "growth: H ≤ C(|p|^γ + 1)");
        t.update(
            lower_bound_constant(rg, hp_dot_p - h),
            &x,
            &p,
            "H_p·p − H ≥ |p|^γ/C − C",
        );
        t.update(norm(&hx[..dim]) / (rg + 1.0), &x, &p, "|H_x| ≤ C(|p|^γ + 1)");
        let rg1 = r.powf(g - 1.0);
        t.update(lower_bound_constant(rg1, hp_norm), &x, &p, "|H_p| ≥ |p|^{γ−1}/C − C");
        t.update(hp_norm / (rg1 + 1.0), &x, &p, "|H_p| ≤ C|p|^{γ−1} + C");
    }
    Ok(AssumptionReport {
        name: "assumption_H".into(),
        passed: t.constant <= CONSTANT_CAP,
        constant: t.constant,
        witness: t.witness,
        samples: sample_count,
    })
}

/// Sampled verification of `|ν|^{γ'}/C − C ≤ |L(x,ν)| ≤ C|ν|^{γ'}`.
pub fn check_assumption_l1(
    spec: &HamiltonianSpec,
    dim: usize,
    sample_count: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    check_dim(dim)?;
    if sample_count < 1000 {
        return Err(LabError::InvalidParameter("at least 1000 samples required".into()));
    }
    let gc = gamma_conj(spec.gamma)?;
    let mut t = Tracker::new();
    for (x, nu) in sample_points(dim, sample_count, seed ^ 0x5eed, &spec.coef) {
        let l = spec.legendre(&x, &nu)?.abs();
        let rg = norm(&nu).powf(gc);
        let lower = if l.is_finite() {
            lower_bound_constant(rg, l)
        } else {
            0.0
        };
        t.update(lower, &x, &nu, "|ν|^{γ'}/C − C ≤ |L|");
        let upper = if l.is_finite() { l / rg } else { f64::INFINITY };
        t.update(upper, &x, &nu, "|L| ≤ C|ν|^{γ'}");
    }
    Ok(AssumptionReport {
        name: "assumption_L1".into(),
        passed: t.constant <= CONSTANT_CAP,
        constant: t.constant,
        witness: t.witness,
        samples: sample_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> HamiltonianSpec {
        HamiltonianSpec::new(2.0, 0.5, 0.0, Coefficient::One).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert!((quad().eval_h(&[0.3], &[2.0]) - 2.0).abs() < 1e-15);
        for spec in [quad(), HamiltonianSpec::new(1.5, 2.0, 0.3, Coefficient::CosBump { amplitude: 0.5 }).unwrap()] {
            assert_eq!(spec.eval_h(&[1.0, 2.0], &[0.0, 0.0]), 0.0);
        }
        let cubic = HamiltonianSpec::new(3.0, 1.0, 0.1, Coefficient::One).unwrap();
        let expected = 1.01f64.powf(1.5) - 0.001;
        assert!((cubic.eval_h(&[0.0], &[1.0]) - expected).abs() < 1e-15);
        assert!((expected - 1.014_037).abs() < 1e-6);
    }

    #[test]
    fn derivative_examples() {
        let hp = quad().eval_hp(&[0.0], &[3.0]).unwrap();
        assert!((hp[0] - 3.0).abs() < 1e-15);
        let smooth = HamiltonianSpec::new(1.5, 1.0, 0.2, Coefficient::One).unwrap();
        assert_eq!(smooth.eval_hp(&[0.0], &[0.0]).unwrap(), [0.0, 0.0]);
        let singular = HamiltonianSpec::new(1.5, 1.0, 0.0, Coefficient::One).unwrap();
        assert!(singular.eval_hp(&[0.0], &[0.0]).is_err());
        assert!(singular.eval_hp(&[0.0], &[1e-3]).is_ok());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = [
            HamiltonianSpec::new(2.0, 0.5, 0.0, Coefficient::CosBump { amplitude: 0.4 }).unwrap(),
            HamiltonianSpec::new(1.5, 1.0, 0.3, Coefficient::CosBump { amplitude: 0.7 }).unwrap(),
            HamiltonianSpec::new(3.5, 0.2, 0.1, Coefficient::One).unwrap(),
        ];
        let step = 1e-5;
        for spec in specs {
            for _ in 0..200 {
                let x = [rng.gen_range(0.0..6.2), rng.gen_range(0.0..6.2)];
                let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let hp = spec.eval_hp(&x, &p).unwrap();
                let hx = spec.eval_hx(&x, &p);
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += step;
                    pm[j] -= step;
                    let fd = (spec.eval_h(&x, &pp) - spec.eval_h(&x, &pm)) / (2.0 * step);
                    assert!((fd - hp[j]).abs() <= 1e-6, "H_p mismatch {fd} vs {}", hp[j]);
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += step;
                    xm[j] -= step;
                    let fd = (spec.eval_h(&xp, &p) - spec.eval_h(&xm, &p)) / (2.0 * step);
                    assert!((fd - hx[j]).abs() <= 1e-6, "H_x mismatch {fd} vs {}", hx[j]);
                }
            }
        }
    }

    #[test]
    fn legendre_closed_forms() {
        for nu in [0.0, 0.3, 1.0, 4.0] {
            assert!((quad().legendre(&[0.0], &[nu]).unwrap() - 0.5 * nu * nu).abs() < 1e-13);
        }
        let cubic = HamiltonianSpec::new(3.0, 1.0 / 3.0, 0.0, Coefficient::One).unwrap();
        for nu in [0.1f64, 1.0, 2.5] {
            let expected = 2.0 / 3.0 * nu.powf(1.5);
            assert!((cubic.legendre(&[0.0], &[nu]).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_duality_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = HamiltonianSpec::new(1.5, 1.0, 0.3, Coefficient::CosBump { amplitude: 0.5 }).unwrap();
        for _ in 0..500 {
            let x = [rng.gen_range(0.0..6.2), rng.gen_range(0.0..6.2)];
            let nu = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let (l, p) = spec.legendre_with_argmax(&x, &nu).unwrap();
            let gap = spec.eval_h(&x, &p) - (p[0] * nu[0] + p[1] * nu[1] - l);
            assert!(gap.abs() <= 1e-8);
            let hp = spec.eval_hp(&x, &p).unwrap();
            assert!((hp[0] - nu[0]).abs() <= 1e-8 && (hp[1] - nu[1]).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_hamiltonian_legendre() {
        let z = HamiltonianSpec::zero();
        assert_eq!(z.legendre(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(z.legendre(&[0.0], &[1.0]).unwrap().is_infinite());
    }

    #[test]
    fn assumption_h_examples() {
        let rep = check_assumption_h(&quad(), 1, 2000, 1).unwrap();
        assert!(rep.passed);
        assert!(rep.constant <= 2.0 + 1e-12, "C_H = {}", rep.constant);

        let degenerate =
            HamiltonianSpec::new(2.0, 0.5, 0.0, Coefficient::CosBump { amplitude: 1.0 }).unwrap();
        let rep = check_assumption_h(&degenerate, 1, 2000, 1).unwrap();
        assert!(!rep.passed);
        let w = rep.witness.unwrap();
        assert!(w.bound.starts_with("coercivity"), "{}", w.bound);

        let smooth = HamiltonianSpec::new(1.5, 1.0, 0.5, Coefficient::One).unwrap();
        let rep = check_assumption_h(&smooth, 2, 2000, 3).unwrap();
        assert!(rep.passed && rep.constant.is_finite());

        assert!(check_assumption_h(&quad(), 1, 10, 1).is_err());
    }

    #[test]
    fn assumption_l1_examples() {
        let rep = check_assumption_l1(&quad(), 1, 2000, 1).unwrap();
        assert!(rep.passed);
        assert!(rep.constant <= 2.0 + 1e-12);
        let degenerate =
            HamiltonianSpec::new(2.0, 0.5, 0.0, Coefficient::CosBump { amplitude: 1.0 }).unwrap();
        assert!(!check_assumption_l1(&degenerate, 1, 2000, 1).unwrap().passed);
        let smooth = HamiltonianSpec::new(3.0, 1.0, 0.5, Coefficient::One).unwrap();
        let rep = check_assumption_l1(&smooth, 2, 2000, 3).unwrap();
        assert!(rep.passed && rep.constant.is_finite());
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(q_min(2.0, 1).unwrap(), 3.0);
        assert_eq!(q_min(4.0, 2).unwrap(), 6.0);
        assert_eq!(q_min(1.5, 1).unwrap(), 3.0);
        assert_eq!(m_prime(6.0, 1).unwrap(), 1.5);
        let g = gamma_conj(2.7).unwrap();
        assert!((1.0 / 2.7 + 1.0 / g - 1.0).abs() < 1e-14);
        assert!(q_min(1.0, 1).is_err());
        assert!(m_prime(1.0, 1).is_err());
        assert!(q_min(2.0, 3).is_err());
    }
}
