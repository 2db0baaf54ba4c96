//! Periodized Riesz kernel and principal-value quadrature of the fractional
//! Laplacian.
//!
//! This is the independent route to `(−Δ)ˢ`: it never touches the Fourier
//! multiplier and is used only for cross-validation.
//!
//! The kernel on the torus is
//! `K(y) = c_{N,s} Σ_{k ∈ ℤᴺ} |y − 2πk|^{−N−2s}` with the Riesz normalization
//! `c_{N,s} = 4ˢ Γ(N/2 + s) / (π^{N/2} |Γ(−s)|)`. Images with `|k|∞ ≤ R` are
//! summed directly; the remaining images are replaced by the integral of the
//! kernel over the exterior of the summed block (midpoint rule on the
//! lattice). What is left after that replacement is bounded by
//! [`FracKernelSpec::tail_estimate`], and a table is refused when that bound
//! exceeds the requested tolerance.
//!
//! The node `y = 0` is excluded from the trapezoid sum. The leading term of the
//! integrand near the origin is `φ |y|^{2−N−2s}`, for which the punctured
//! lattice sum misses exactly `Z_N(N + 2s − 2) φ h^{2−2s}` (generalized
//! Euler-Maclaurin), where `Z_N(σ) = Σ'_{j ∈ ℤᴺ} |j|^{−σ}` is the analytically
//! continued lattice zeta function. `φ` is estimated with centered
//! differences of fourth order. In one dimension the quartic term of the Taylor expansion is
//! corrected the same way.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::{TorusGrid, MAX_DIM};
use crate::spectral::check_order;

/// Parameters of the periodized kernel quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct FracKernelSpec {
    pub dim: usize,
    pub s: f64,
    /// Images with `|k|∞ ≤ lattice_cutoff` are summed explicitly.
    pub lattice_cutoff: usize,
    pub normalization: f64,
    /// Largest tolerated lattice remainder, in units of the integrand scale.
    pub tail_tolerance: f64,
}

impl FracKernelSpec {
    pub fn new(dim: usize, s: f64, lattice_cutoff: usize) -> Result<Self> {
        check_order(s)?;
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::InvalidParameter(format!("unsupported dimension {dim}")));
        }
        if lattice_cutoff < 1 {
            return Err(LabError::InvalidParameter("lattice cutoff must be at least 1".into()));
        }
        Ok(Self {
            dim,
            s,
            lattice_cutoff,
            normalization: riesz_constant(dim, s),
            tail_tolerance: 1e-6,
        })
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    /// Bound on the lattice images not captured by the explicit sum plus the
    /// exterior-integral replacement, per unit of `sup|u(x) − u(x+y)|`.
    ///
    /// The midpoint replacement of `Σ_{|k|∞>R} g(k)` by `∫ g` errs by about
    /// `(1/24) Σ |D²g|`, and `|D²g| ≲ (N+2s)(N+2s+1) |2πk|^{−N−2s−2} (2π)²`.
    /// Summing over the shell structure gives the estimate below; it is an
    /// implementation bound, not a sharp one.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.dim as f64;
        let p = n + 2.0 * self.s;
        let r = self.lattice_cutoff as f64 + 0.5;
        let shells = if self.dim == 1 { 2.0 } else { 8.0 };
        let per_image = p * (p + 1.0) / 24.0 * (2.0 * PI).powf(-p);
        // Σ_{|k|∞ > R} |k|^{−p−2} over the lattice ~ shells · R^{N−p−2}/(p+2−N)
        let lattice_sum = shells * r.powf(n - p - 2.0) / (p + 2.0 - n);
        self.normalization * per_image * lattice_sum * (2.0 * PI).powf(n)
    }
}

/// Riesz normalization `c_{N,s} = 4ˢ Γ(N/2 + s) / (π^{N/2} |Γ(−s)|)`.
pub fn riesz_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    let gamma_neg_s = libm::tgamma(1.0 - s) / (-s);
    4f64.powf(s) * libm::tgamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma_neg_s.abs())
}

const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `ζ(σ, a) = Σ_{k≥0} (k + a)^{−σ}`, analytically continued to all
/// real `σ ≠ 1`, by Euler-Maclaurin summation.
pub fn hurwitz_zeta(sigma: f64, a: f64) -> f64 {
    assert!(sigma != 1.0, "Hurwitz zeta has a pole at sigma = 1");
    assert!(a > 0.0);
    const M: usize = 40;
    let head: f64 = (0..M).map(|k| (k as f64 + a).powf(-sigma)).sum();
    let x = M as f64 + a;
    let mut tail = x.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * x.powf(-sigma);
    // rising product σ(σ+1)…(σ+2j−2) / (2j)!
    let mut rising = sigma;
    let mut factorial = 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let order = 2 * (j + 1);
        tail += b / factorial * rising * x.powf(-sigma - order as f64 + 1.0);
        rising *= (sigma + order as f64 - 1.0) * (sigma + order as f64);
        factorial *= ((order + 1) * (order + 2)) as f64;
    }
    head + tail
}

pub fn riemann_zeta(sigma: f64) -> f64 {
    hurwitz_zeta(sigma, 1.0)
}

/// Dirichlet beta `β(σ) = Σ_{k≥0} (−1)ᵏ (2k+1)^{−σ}`.
pub fn dirichlet_beta(sigma: f64) -> f64 {
    4f64.powf(-sigma) * (hurwitz_zeta(sigma, 0.25) - hurwitz_zeta(sigma, 0.75))
}

/// Punctured lattice zeta `Z_N(σ) = Σ'_{j ∈ ℤᴺ} |j|^{−σ}` (continued).
pub fn lattice_zeta(dim: usize, sigma: f64) -> f64 {
    match dim {
        1 => 2.0 * riemann_zeta(sigma),
        2 => 4.0 * riemann_zeta(sigma / 2.0) * dirichlet_beta(sigma / 2.0),
        _ => panic!("lattice zeta implemented for dimensions 1 and 2"),
    }
}

/// Tabulated kernel values on the nodes of a grid (node 0 excluded).
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: TorusGrid,
    spec: FracKernelSpec,
    values: Vec<f64>,
    /// `Z_N(N + 2s − 2) h^{2−2s}`, the weight of the missing origin cell.
    origin_weight: f64,
    /// `Z_1(2s − 3) h^{4−2s}`, next-order origin weight (1-D only).
    origin_weight_quartic: f64,
}

impl KernelTable {
    /// Tabulates the kernel; `integrand_scale` bounds `|u(x) − u(x+y)|` and is
    /// used to decide whether the lattice cutoff is large enough.
    pub fn build(grid: &TorusGrid, spec: &FracKernelSpec, integrand_scale: f64) -> Result<Self> {
        if grid.dim() != spec.dim {
            return Err(LabError::GridMismatch(format!(
                "kernel for dimension {} on a {}-dimensional grid",
                spec.dim,
                grid.dim()
            )));
        }
        let estimate = spec.tail_estimate() * integrand_scale;
        if estimate > spec.tail_tolerance {
            return Err(LabError::LatticeCutoff {
                cutoff: spec.lattice_cutoff,
                estimate,
                tolerance: spec.tail_tolerance,
            });
        }
        let values = (0..grid.len())
            .map(|i| if i == 0 { 0.0 } else { kernel_at(grid, spec, i) })
            .collect();
        let dim = grid.dim() as f64;
        let origin_weight =
            lattice_zeta(grid.dim(), dim + 2.0 * spec.s - 2.0) * grid.h().powf(2.0 - 2.0 * spec.s);
        let origin_weight_quartic = if grid.dim() == 1 {
            lattice_zeta(1, 2.0 * spec.s - 3.0) * grid.h().powf(4.0 - 2.0 * spec.s)
        } else {
            0.0
        };
        Ok(Self {
            grid: grid.clone(),
            spec: spec.clone(),
            values,
            origin_weight,
            origin_weight_quartic,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset_index(&self, idx: usize, m: usize) -> usize {
        let a = self.grid.multi_index(idx);
        let b = self.grid.multi_index(m);
        self.grid
            .flat_index([(a[0] + b[0]) as i64, (a[1] + b[1]) as i64])
    }

    fn neighbour(&self, idx: usize, axis: usize, step: i64) -> usize {
        let a = self.grid.multi_index(idx);
        let mut m = [a[0] as i64, a[1] as i64];
        m[axis] += step;
        self.grid.flat_index(m)
    }

    /// `P.V. ∫ (u(x) − u(x+y)) K(y) dy` at node `idx`.
    pub fn frac_laplacian_at(&self, u: &Field, idx: usize) -> Result<f64> {
        self.check_grid(u.grid())?;
        let v = u.values();
        let ux = v[idx];
        let sum: f64 = (1..self.grid.len())
            .map(|m| (ux - v[self.offset_index(idx, m)]) * self.values[m])
            .sum::<f64>()
            * self.grid.cell_volume();
        // fourth-order centered differences for the local Laplacian
        let h2 = self.grid.h().powi(2);
        let lap: f64 = (0..self.grid.dim())
            .map(|a| {
                let at = |step| v[self.neighbour(idx, a, step)];
                (-at(2) + 16.0 * at(1) - 30.0 * ux + 16.0 * at(-1) - at(-2)) / (12.0 * h2)
            })
            .sum();
        // even part of u(x) − u(x+y) near 0 is −½ yᵀD²u y, whose lattice-isotropic
        // share is −(1/2N) Δu |y|²
        let phi = -self.spec.normalization * lap / (2.0 * self.grid.dim() as f64);
        let mut value = sum - self.origin_weight * phi;
        if self.grid.dim() == 1 {
            // quartic term −u⁗ y⁴/24 of the even part
            let d4 = (v[self.neighbour(idx, 0, 2)] - 4.0 * v[self.neighbour(idx, 0, 1)] + 6.0 * ux
                - 4.0 * v[self.neighbour(idx, 0, -1)]
                + v[self.neighbour(idx, 0, -2)])
                / h2.powi(2);
            value += self.origin_weight_quartic * self.spec.normalization * d4 / 24.0;
        }
        Ok(value)
    }

    /// `½ Σⱼ ∫ |vⱼ(x) − vⱼ(x+y)|² K(y) dy` at node `idx`.
    pub fn carre_du_champ_at(&self, g: &VectorField, idx: usize) -> Result<f64> {
        self.check_grid(g.grid())?;
        let h = self.grid.h();
        let mut total = 0.0;
        for comp in g.components() {
            let v = comp.values();
            let vx = v[idx];
            let sum: f64 = (1..self.grid.len())
                .map(|m| (vx - v[self.offset_index(idx, m)]).powi(2) * self.values[m])
                .sum::<f64>()
                * 0.5
                * self.grid.cell_volume();
            let grad_sq: f64 = (0..self.grid.dim())
                .map(|a| {
                    let at = |step| v[self.neighbour(idx, a, step)];
                    ((-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)).powi(2)
                })
                .sum();
            // ½ (∇v·y)² ~ (1/2N) |∇v|² |y|² after lattice averaging
            let phi = self.spec.normalization * grad_sq / (2.0 * self.grid.dim() as f64);
            total += sum - self.origin_weight * phi;
        }
        Ok(total)
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if *grid != self.grid {
            return Err(LabError::GridMismatch(format!(
                "kernel tabulated on {:?}, field on {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }
}

fn kernel_at(grid: &TorusGrid, spec: &FracKernelSpec, idx: usize) -> f64 {
    let h = grid.h();
    let m = grid.multi_index(idx);
    let p = spec.dim as f64 + 2.0 * spec.s;
    let r = spec.lattice_cutoff as i64;
    let two_pi = 2.0 * PI;
    // representative of y in [−π, π)ᴺ
    let y: Vec<f64> = (0..spec.dim)
        .map(|a| grid.wavenumber(m[a]) as f64 * h)
        .collect();
    let mut sum = 0.0;
    match spec.dim {
        1 => {
            for k in -r..=r {
                sum += (y[0] - two_pi * k as f64).abs().powf(-p);
            }
        }
        _ => {
            for k0 in -r..=r {
                let d0 = (y[0] - two_pi * k0 as f64).powi(2);
                for k1 in -r..=r {
                    let d1 = (y[1] - two_pi * k1 as f64).powi(2);
                    sum += (d0 + d1).powf(-p / 2.0);
                }
            }
        }
    }
    spec.normalization * (sum + exterior_integral(spec, &y))
}

/// `(2π)^{−N} ∫_{|z|∞ > 2π(R+½)} |z − y|^{−N−2s} dz`, the midpoint replacement of
/// the lattice images beyond the cutoff.
fn exterior_integral(spec: &FracKernelSpec, y: &[f64]) -> f64 {
    let s2 = 2.0 * spec.s;
    let a = 2.0 * PI * (spec.lattice_cutoff as f64 + 0.5);
    match spec.dim {
        1 => ((a - y[0]).powf(-s2) + (a + y[0]).powf(-s2)) / (2.0 * PI * s2),
        _ => {
            // the square is much larger than |y|; evaluated at y = 0 in polar form:
            // ∫_0^{2π} ∫_{a/max(|cos|,|sin|)}^∞ r^{−1−2s} dr dθ
            //   = a^{−2s}/(2s) · 8 ∫_0^{π/4} cos^{2s}θ dθ
            let steps = 256;
            let width = PI / 4.0 / steps as f64;
            let f = |t: f64| t.cos().powf(s2);
            let mut simpson = f(0.0) + f(PI / 4.0);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                simpson += w * f(i as f64 * width);
            }
            let angular = 8.0 * simpson * width / 3.0;
            a.powf(-s2) / s2 * angular / (2.0 * PI).powi(2)
        }
    }
}

/// Quadrature value of `(−Δ)ˢu` at node `idx`.
///
/// Builds a [`KernelTable`] on every call; reuse a table when evaluating many
/// nodes.
pub fn frac_laplacian_quadrature(u: &Field, kern: &FracKernelSpec, idx: usize) -> Result<f64> {
    let scale = 2.0 * (u.max() - u.min()).abs();
    let table = KernelTable::build(u.grid(), kern, scale.max(f64::MIN_POSITIVE))?;
    table.frac_laplacian_at(u, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn zeta_reference_values() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((riemann_zeta(0.0) + 0.5).abs() < 1e-13);
        assert!((riemann_zeta(-1.0) + 1.0 / 12.0).abs() < 1e-13);
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-12);
        assert!((dirichlet_beta(2.0) - 0.915_965_594_177_219).abs() < 1e-13);
        assert!((dirichlet_beta(0.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn riesz_constant_reference_values() {
        // c_{1,1/2} = 1/π, c_{2,1/2} = 1/(2π)
        assert!((riesz_constant(1, 0.5) - 1.0 / PI).abs() < 1e-14);
        assert!((riesz_constant(2, 0.5) - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn constant_field_gives_zero() {
        let g = make_grid(1, 64).unwrap();
        let u = Field::constant(&g, 2.5);
        let spec = FracKernelSpec::new(1, 0.4, 10).unwrap();
        let v = frac_laplacian_quadrature(&u, &spec, 5).unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn small_cutoff_is_flagged() {
        let g = make_grid(1, 64).unwrap();
        let u = Field::from_fn(&g, |x| x[0].cos());
        let spec = FracKernelSpec::new(1, 0.25, 1)
            .unwrap()
            .with_tail_tolerance(1e-9);
        let err = frac_laplacian_quadrature(&u, &spec, 0).unwrap_err();
        assert!(matches!(err, LabError::LatticeCutoff { .. }));
    }

    #[test]
    fn rejects_bad_order() {
        assert!(FracKernelSpec::new(1, 1.0, 5).is_err());
        assert!(FracKernelSpec::new(1, 0.5, 0).is_err());
    }
}
