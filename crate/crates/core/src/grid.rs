//! Uniform periodic grids on `[0, 2π)ᴺ` and their discrete Fourier transforms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans_for(n: usize) -> Plans {
    static REGISTRY: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let registry = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = registry.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Uniform periodic grid with `n` points per dimension on the flat torus.
///
/// Values on the grid are stored row-major: the first coordinate varies
/// slowest. Cloning is cheap; FFT plans are shared between all grids with the
/// same `n`.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    plans: Plans,
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

/// Builds a grid, rejecting unsupported dimensions and sizes.
pub fn make_grid(dim: usize, n: usize) -> Result<TorusGrid> {
    TorusGrid::new(dim, n)
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !n.is_power_of_two() {
            return Err(LabError::InvalidGrid(format!(
                "n must be a power of two, got {n}"
            )));
        }
        if n < 8 {
            return Err(LabError::InvalidGrid(format!("n must be at least 8, got {n}")));
        }
        Ok(Self {
            dim,
            n,
            plans: plans_for(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `2π / n`.
    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Total number of grid points, `nᴺ`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `hᴺ` of a single node.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Measure of the torus, `(2π)ᴺ`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Signed wavenumber of 1-D FFT index `j`, in `[−n/2, n/2)`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Multi-index of flat index `idx`; unused trailing entries are zero.
    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    /// Integer wavevector of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; MAX_DIM] {
        let m = self.multi_index(idx);
        match self.dim {
            1 => [self.wavenumber(m[0]), 0],
            _ => [self.wavenumber(m[0]), self.wavenumber(m[1])],
        }
    }

    /// Squared modulus `|k|²` of the wavevector at spectral index `idx`.
    pub fn k_squared(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1]) as f64
    }

    /// Whether index `idx` carries a Nyquist component (`k_j = −n/2`) in any
    /// direction.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -(self.n as i64) / 2;
        let k = self.wavevector(idx);
        k[..self.dim].contains(&half)
    }

    /// Whether the mode survives the 2/3 dealiasing rule (`|k_j| ≤ n/3` for
    /// every direction).
    pub fn passes_two_thirds(&self, idx: usize) -> bool {
        let cutoff = self.n as i64 / 3;
        let k = self.wavevector(idx);
        k[..self.dim].iter().all(|&kj| kj.abs() <= cutoff)
    }

    /// Physical coordinates of node `idx`; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let h = self.h();
        let m = self.multi_index(idx);
        match self.dim {
            1 => [m[0] as f64 * h, 0.0],
            _ => [m[0] as f64 * h, m[1] as f64 * h],
        }
    }

    /// Flat index of the multi-index (taken modulo `n`).
    pub fn flat_index(&self, m: [i64; MAX_DIM]) -> usize {
        let n = self.n as i64;
        match self.dim {
            1 => m[0].rem_euclid(n) as usize,
            _ => (m[0].rem_euclid(n) * n + m[1].rem_euclid(n)) as usize,
        }
    }

    /// Forward transform normalized so that `u(x) = Σ ĉₖ e^{ik·x}`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse of [`TorusGrid::forward`]; the imaginary part is discarded.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let plan = if forward {
            &self.plans.forward
        } else {
            &self.plans.inverse
        };
        let n = self.n;
        // rows are contiguous
        plan.process(buf);
        if self.dim == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    column[i] = buf[i * n + j];
                }
                plan.process(&mut column);
                for i in 0..n {
                    buf[i * n + j] = column[i];
                }
            }
        }
    }

    /// Grid with `factor` times as many points per dimension.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.n * factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_grid_points() {
        let g = make_grid(1, 8).unwrap();
        let pts: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0]).collect();
        for (i, p) in pts.iter().enumerate() {
            assert!((p - i as f64 * PI / 4.0).abs() < 1e-15);
        }
        assert_eq!(g.len(), 8);
    }

    #[test]
    fn two_dimensional_grid_size() {
        let g = make_grid(2, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert!((g.h() - PI / 8.0).abs() < 1e-15);
        assert!((g.h() * g.n() as f64 - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        let err = make_grid(1, 6).unwrap_err();
        assert!(err.to_string().contains("n must be a power of two"));
        assert!(make_grid(3, 8).is_err());
        assert!(make_grid(0, 8).is_err());
        assert!(make_grid(1, 4).is_err());
    }

    #[test]
    fn wavenumbers_are_symmetric_lattice() {
        let g = make_grid(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|j| g.wavenumber(j)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(g.is_nyquist(4));
        assert!(!g.is_nyquist(3));
    }

    #[test]
    fn forward_inverse_round_trip_2d() {
        let g = make_grid(2, 16).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                (p[0]).sin() * (2.0 * p[1]).cos() + 0.3
            })
            .collect();
        let c = g.forward(&vals);
        let back = g.inverse(&c);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        // mean lives in the zero mode
        assert!((c[0].re - 0.3).abs() < 1e-14);
    }
}
