//! Fourier-multiplier operators on the torus: derivatives, the Laplacian, the
//! fractional Laplacian, the mixed operator `−εΔ + μ(−Δ)ˢ`, dealiasing and the
//! nonlocal carré du champ.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid::TorusGrid;

/// Oversampling factor used for pointwise products that must be alias free.
pub const PRODUCT_OVERSAMPLING: usize = 2;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "fractional order must lie in (0, 1), got {s}"
        )));
    }
    Ok(())
}

/// Applies a real radial-or-not multiplier `m(idx)` in Fourier space.
pub fn apply_multiplier(u: &Field, m: impl Fn(usize) -> f64) -> Field {
    let coeffs = u
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| c * m(i))
        .collect();
    Field::from_spectral(u.grid(), coeffs)
}

/// `|k|^{2s}` for every spectral index, zero on the zero mode.
pub fn fractional_symbol(grid: &TorusGrid, s: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let k2 = grid.k_squared(i);
            if k2 == 0.0 {
                0.0
            } else {
                k2.powf(s)
            }
        })
        .collect()
}

/// Symbol `ε|k|² + μ|k|^{2s}` of the mixed operator.
pub fn mixed_symbol(grid: &TorusGrid, eps: f64, mu: f64, s: f64) -> Vec<f64> {
    fractional_symbol(grid, s)
        .into_iter()
        .enumerate()
        .map(|(i, frac)| eps * grid.k_squared(i) + mu * frac)
        .collect()
}

/// Spectral partial derivative `∂ⱼu`; the Nyquist mode is dropped.
pub fn partial(u: &Field, j: usize) -> Field {
    let grid = u.grid();
    let coeffs = u
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if grid.is_nyquist(i) {
                Complex64::new(0.0, 0.0)
            } else {
                c * Complex64::new(0.0, grid.wavevector(i)[j] as f64)
            }
        })
        .collect();
    Field::from_spectral(grid, coeffs)
}

/// Spectral gradient.
pub fn gradient(u: &Field) -> VectorField {
    VectorField::from_components((0..u.grid().dim()).map(|j| partial(u, j)).collect())
}

/// Spectral divergence `Σⱼ ∂ⱼvⱼ`; its zero mode vanishes identically.
pub fn divergence(v: &VectorField) -> Field {
    let grid = v.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, comp) in v.components().iter().enumerate() {
        for (i, c) in comp.spectrum().iter().enumerate() {
            if !grid.is_nyquist(i) {
                acc[i] += c * Complex64::new(0.0, grid.wavevector(i)[j] as f64);
            }
        }
    }
    Field::from_spectral(grid, acc)
}

/// Laplacian, multiplier `−|k|²`.
pub fn laplacian(u: &Field) -> Field {
    let grid = u.grid();
    apply_multiplier(u, |i| -grid.k_squared(i))
}

/// Hessian `∂ᵢⱼu` as a row-major `dim × dim` array.
///
/// Diagonal entries use `−kᵢ²` (so their trace equals [`laplacian`]); mixed
/// entries drop Nyquist modes like [`partial`].
pub fn hessian(u: &Field) -> Vec<Field> {
    let grid = u.grid();
    let dim = grid.dim();
    let mut out = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            if a == b {
                out.push(apply_multiplier(u, |i| {
                    let k = grid.wavevector(i)[a] as f64;
                    -k * k
                }));
            } else {
                out.push(apply_multiplier(u, |i| {
                    if grid.is_nyquist(i) {
                        0.0
                    } else {
                        let k = grid.wavevector(i);
                        -(k[a] * k[b]) as f64
                    }
                }));
            }
        }
    }
    out
}

/// Pointwise `|D²u|² = Σᵢⱼ (∂ᵢⱼu)²`.
pub fn hessian_norm_squared(u: &Field) -> Field {
    let h = hessian(u);
    let grid = u.grid();
    let values = (0..grid.len())
        .map(|i| h.iter().map(|e| e.values()[i].powi(2)).sum())
        .collect();
    Field::from_raw(grid, values)
}

/// Fractional Laplacian `(−Δ)ˢ`, multiplier `|k|^{2s}`.
pub fn frac_laplacian(u: &Field, s: f64) -> Result<Field> {
    check_order(s)?;
    let symbol = fractional_symbol(u.grid(), s);
    Ok(apply_multiplier(u, |i| symbol[i]))
}

/// Mixed operator `−εΔu + μ(−Δ)ˢu`.
pub fn mixed_operator(u: &Field, eps: f64, mu: f64, s: f64) -> Result<Field> {
    check_diffusion(eps, mu)?;
    check_order(s)?;
    let symbol = mixed_symbol(u.grid(), eps, mu, s);
    Ok(apply_multiplier(u, |i| symbol[i]))
}

pub(crate) fn check_diffusion(eps: f64, mu: f64) -> Result<()> {
    if !(eps >= 0.0 && mu >= 0.0) || !eps.is_finite() || !mu.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "diffusion weights must be finite and nonnegative, got eps = {eps}, mu = {mu}"
        )));
    }
    if eps == 0.0 && mu == 0.0 {
        return Err(LabError::InvalidParameter(
            "eps and mu are both zero: no diffusion".into(),
        ));
    }
    Ok(())
}

/// 2/3-rule projection: zeroes every mode with some `|kⱼ| > n/3`.
pub fn dealias(u: &Field) -> Field {
    let grid = u.grid();
    apply_multiplier(u, |i| if grid.passes_two_thirds(i) { 1.0 } else { 0.0 })
}

/// Dealiased product `P(a · P b)` used by the solvers.
///
/// With `P` the 2/3 projection this form is symmetric in the sense
/// `⟨P(a·Pb), c⟩ = ⟨b, P(a·Pc)⟩`, which the discrete adjointness relies on.
pub fn dealiased_product(a: &Field, b: &Field) -> Field {
    dealias(&a.mul(&dealias(b)))
}

/// Nonlocal carré du champ `½ Σⱼ ∫ |vⱼ(x) − vⱼ(x+y)|² K(y) dy`.
///
/// Evaluated through `I_v = v(−Δ)ˢv − ½(−Δ)ˢ(v²)` on an oversampled grid so the
/// square is alias free, then sampled back at the original nodes.
pub fn nonlocal_carre_du_champ(g: &VectorField, s: f64) -> Result<Field> {
    check_order(s)?;
    let grid = g.grid();
    let mut acc: Option<Field> = None;
    for v in g.components() {
        let fine = v.upsample(PRODUCT_OVERSAMPLING)?;
        let frac_v = frac_laplacian(&fine, s)?;
        let frac_sq = frac_laplacian(&fine.mul(&fine), s)?;
        let term = fine.mul(&frac_v).axpby(1.0, &frac_sq, -0.5);
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }
    acc.expect("at least one component").restrict_to(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn close(a: &Field, b: &Field, tol: f64) {
        let d = a.max_abs_diff(b);
        assert!(d <= tol, "max difference {d:e} exceeds {tol:e}");
    }

    #[test]
    fn gradient_examples() {
        let g = make_grid(1, 32).unwrap();
        let u = Field::from_fn(&g, |x| x[0].sin());
        close(gradient(&u).component(0), &Field::from_fn(&g, |x| x[0].cos()), 1e-13);
        let c = Field::constant(&g, 3.0);
        assert!(gradient(&c).sup_norm() < 1e-14);

        let g2 = make_grid(2, 16).unwrap();
        let u = Field::from_fn(&g2, |x| x[0].sin() * x[1].cos());
        let grad = gradient(&u);
        close(grad.component(0), &Field::from_fn(&g2, |x| x[0].cos() * x[1].cos()), 1e-13);
        close(grad.component(1), &Field::from_fn(&g2, |x| -x[0].sin() * x[1].sin()), 1e-13);
    }

    #[test]
    fn laplacian_examples() {
        let g = make_grid(1, 16).unwrap();
        let u = Field::from_fn(&g, |x| x[0].cos());
        close(&laplacian(&u), &u.scale(-1.0), 1e-13);
        let u2 = Field::from_fn(&g, |x| (2.0 * x[0]).cos());
        close(&laplacian(&u2), &u2.scale(-4.0), 1e-13);
        assert!(laplacian(&Field::constant(&g, 2.0)).sup_norm() < 1e-14);
    }

    #[test]
    fn fractional_examples() {
        let g = make_grid(1, 32).unwrap();
        let c1 = Field::from_fn(&g, |x| x[0].cos());
        for s in [0.1, 0.5, 0.9] {
            close(&frac_laplacian(&c1, s).unwrap(), &c1, 1e-13);
        }
        let c2 = Field::from_fn(&g, |x| (2.0 * x[0]).cos());
        close(&frac_laplacian(&c2, 0.5).unwrap(), &c2.scale(2.0), 1e-13);
        assert!(frac_laplacian(&Field::constant(&g, 1.0), 0.3).unwrap().sup_norm() < 1e-14);
        assert!(frac_laplacian(&c1, 0.0).is_err());
        assert!(frac_laplacian(&c1, 1.0).is_err());
    }

    #[test]
    fn mixed_operator_examples() {
        let g = make_grid(1, 32).unwrap();
        let c1 = Field::from_fn(&g, |x| x[0].cos());
        let c2 = Field::from_fn(&g, |x| (2.0 * x[0]).cos());
        close(&mixed_operator(&c1, 1.0, 1.0, 0.5).unwrap(), &c1.scale(2.0), 1e-13);
        close(&mixed_operator(&c2, 1.0, 0.0, 0.5).unwrap(), &c2.scale(4.0), 1e-13);
        close(&mixed_operator(&c2, 0.0, 1.0, 0.5).unwrap(), &c2.scale(2.0), 1e-13);
        assert!(mixed_operator(&c1, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn carre_du_champ_trivial_cases() {
        let g = make_grid(2, 16).unwrap();
        let zero = VectorField::zeros(&g);
        assert!(nonlocal_carre_du_champ(&zero, 0.5).unwrap().sup_norm() < 1e-14);
        let c = VectorField::constant(&g, &[1.5, -2.0]).unwrap();
        assert!(nonlocal_carre_du_champ(&c, 0.3).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn divergence_has_zero_mean() {
        let g = make_grid(2, 16).unwrap();
        let v = VectorField::new(vec![
            Field::from_fn(&g, |x| (x[0] + x[1]).exp().sin()),
            Field::from_fn(&g, |x| x[0].cos() * 3.0 + x[1]),
        ])
        .unwrap();
        assert!(divergence(&v).mean().abs() < 1e-14);
    }

    #[test]
    fn dealiased_product_is_symmetric() {
        let g = make_grid(1, 32).unwrap();
        let a = Field::from_fn(&g, |x| (x[0].sin()).exp());
        let b = Field::from_fn(&g, |x| (2.0 * x[0]).cos().powi(3) + x[0].sin());
        let c = Field::from_fn(&g, |x| (x[0].cos() * 3.0).tanh());
        let lhs = dealiased_product(&a, &b).inner(&c);
        let rhs = b.inner(&dealiased_product(&a, &c));
        assert!((lhs - rhs).abs() < 1e-13);
    }
}
