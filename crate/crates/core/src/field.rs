//! Grid functions and their snapshot file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{TorusGrid, MAX_DIM};

/// Real samples of a function on a [`TorusGrid`].
///
/// Fields are immutable; the Fourier coefficients are computed on first use
/// and cached.
#[derive(Clone)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("min", &self.min())
            .field("max", &self.max())
            .finish()
    }
}

impl Field {
    /// Wraps grid samples, rejecting wrong lengths and non-finite values.
    pub fn new(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Domain(format!("non-finite sample at node {i}")));
        }
        Ok(Self::from_raw(grid, values))
    }

    pub(crate) fn from_raw(grid: &TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
            spectral: OnceLock::new(),
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..dim])
            })
            .collect();
        Self::from_raw(grid, values)
    }

    /// Samples `f(index, x)` at every node.
    pub fn from_fn_indexed(grid: &TorusGrid, f: impl Fn(usize, &[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(i, &p[..dim])
            })
            .collect();
        Self::from_raw(grid, values)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds a field from Fourier coefficients in the normalization of
    /// [`TorusGrid::forward`].
    pub fn from_spectral(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Self {
        let values = grid.inverse(&coeffs);
        let field = Self::from_raw(grid, values);
        let _ = field.spectral.set(coeffs);
        field
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectral.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// `∫ u dx` by the periodic trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ u v dx`.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Grid L² norm `(∫ u² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// L² norm computed from the Fourier coefficients (Parseval).
    pub fn spectral_l2_norm(&self) -> f64 {
        let s: f64 = self.spectrum().iter().map(|c| c.norm_sqr()).sum();
        (s * self.grid.volume()).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Field {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Largest absolute nodal difference to `other`.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// Whether the spectrum has no content beyond the 2/3 cutoff, relative to
    /// the largest coefficient.
    pub fn is_band_limited(&self, rel_tol: f64) -> bool {
        let spec = self.spectrum();
        let peak = spec.iter().fold(0.0, |m: f64, c| m.max(c.norm()));
        if peak == 0.0 {
            return true;
        }
        spec.iter()
            .enumerate()
            .filter(|(i, _)| !self.grid.passes_two_thirds(*i))
            .all(|(_, c)| c.norm() <= rel_tol * peak)
    }

    /// Trigonometric interpolant on a grid `factor` times finer.
    ///
    /// Values at the original nodes are reproduced exactly up to roundoff;
    /// Nyquist content is split symmetrically so the result stays real.
    pub fn upsample(&self, factor: usize) -> Result<Field> {
        if factor == 1 {
            return Ok(self.clone());
        }
        let fine = self.grid.refined(factor)?;
        let dim = self.grid.dim();
        let half = self.grid.n() as i64 / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (idx, c) in self.spectrum().iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k = self.grid.wavevector(idx);
            let mut targets: Vec<([i64; MAX_DIM], f64)> = vec![([0; MAX_DIM], 1.0)];
            for j in 0..dim {
                let mut next = Vec::with_capacity(targets.len() * 2);
                for (t, w) in &targets {
                    if k[j] == -half {
                        let mut a = *t;
                        a[j] = -half;
                        let mut b = *t;
                        b[j] = half;
                        next.push((a, w * 0.5));
                        next.push((b, w * 0.5));
                    } else {
                        let mut a = *t;
                        a[j] = k[j];
                        next.push((a, *w));
                    }
                }
                targets = next;
            }
            for (t, w) in targets {
                out[fine.flat_index(t)] += c * w;
            }
        }
        Ok(Field::from_spectral(&fine, out))
    }

    /// Samples every `factor`-th node of a fine field onto `coarse`.
    pub fn restrict_to(&self, coarse: &TorusGrid) -> Result<Field> {
        if coarse.dim() != self.grid.dim() || !self.grid.n().is_multiple_of(coarse.n()) {
            return Err(LabError::GridMismatch(format!(
                "cannot restrict {:?} to {:?}",
                self.grid, coarse
            )));
        }
        let factor = (self.grid.n() / coarse.n()) as i64;
        let values = (0..coarse.len())
            .map(|i| {
                let m = coarse.multi_index(i);
                let fi = self
                    .grid
                    .flat_index([m[0] as i64 * factor, m[1] as i64 * factor]);
                self.values[fi]
            })
            .collect();
        Ok(Field::from_raw(coarse, values))
    }

    /// Writes the snapshot file and its JSON sidecar (same stem, `.json`).
    pub fn write_snapshot(&self, path: &Path, time: f64, provenance: &str) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{} {} {}", self.grid.dim(), self.grid.n(), time)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let meta = SnapshotMeta {
            dim: self.grid.dim(),
            n: self.grid.n(),
            time,
            h: self.grid.h(),
            layout: "row-major f64 little-endian".into(),
            provenance: provenance.into(),
        };
        let sidecar = File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(sidecar, &meta)?;
        Ok(())
    }

    /// Reads a snapshot file written by [`Field::write_snapshot`].
    pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(LabError::Format(format!("bad snapshot header {header:?}")));
        }
        let parse_err = |what: &str| LabError::Format(format!("bad {what} in header {header:?}"));
        let dim: usize = parts[0].parse().map_err(|_| parse_err("dim"))?;
        let n: usize = parts[1].parse().map_err(|_| parse_err("n"))?;
        let time: f64 = parts[2].parse().map_err(|_| parse_err("time"))?;
        let grid = TorusGrid::new(dim, n)?;
        let mut bytes = Vec::with_capacity(grid.len() * 8);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * 8 {
            return Err(LabError::Format(format!(
                "expected {} payload bytes, found {}",
                grid.len() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok((Field::new(&grid, values)?, time))
    }
}

/// Sidecar metadata stored next to every snapshot file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotMeta {
    pub dim: usize,
    pub n: usize,
    pub time: f64,
    pub h: f64,
    pub layout: String,
    pub provenance: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// A gradient-like field: `dim` components on one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<Field>,
}

impl VectorField {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| LabError::InvalidParameter("vector field needs components".into()))?;
        if components.len() != first.grid().dim() {
            return Err(LabError::GridMismatch(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                first.grid().dim()
            )));
        }
        if components.iter().any(|c| c.grid() != first.grid()) {
            return Err(LabError::GridMismatch("components on different grids".into()));
        }
        Ok(Self { components })
    }

    pub(crate) fn from_components(components: Vec<Field>) -> Self {
        debug_assert!(!components.is_empty());
        Self { components }
    }

    /// Constant vector field.
    pub fn constant(grid: &TorusGrid, v: &[f64]) -> Result<Self> {
        if v.len() != grid.dim() {
            return Err(LabError::InvalidParameter(format!(
                "constant vector of length {} on a {}-dimensional grid",
                v.len(),
                grid.dim()
            )));
        }
        Ok(Self::from_components(
            v.iter().map(|&c| Field::constant(grid, c)).collect(),
        ))
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::from_components((0..grid.dim()).map(|_| Field::zeros(grid)).collect())
    }

    pub fn grid(&self) -> &TorusGrid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &Field {
        &self.components[j]
    }

    /// Components at node `idx`; unused trailing entries are zero.
    pub fn at(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.values()[idx];
        }
        out
    }

    /// Pointwise `|v|²`.
    pub fn norm_squared(&self) -> Field {
        let grid = self.grid();
        let values = (0..grid.len())
            .map(|i| self.components.iter().map(|c| c.values()[i].powi(2)).sum())
            .collect();
        Field::from_raw(grid, values)
    }

    /// Pointwise `|v|`.
    pub fn magnitude(&self) -> Field {
        self.norm_squared().map(f64::sqrt)
    }

    /// Pointwise `v · w`.
    pub fn dot(&self, other: &VectorField) -> Field {
        let grid = self.grid();
        let values = (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| a.values()[i] * b.values()[i])
                    .sum()
            })
            .collect();
        Field::from_raw(grid, values)
    }

    /// Multiplies every component by the scalar field `s`.
    pub fn scale_by(&self, s: &Field) -> VectorField {
        Self::from_components(self.components.iter().map(|c| c.mul(s)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.magnitude().max()
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |m, (a, b)| f64::max(m, a.max_abs_diff(b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn rejects_non_finite() {
        let g = make_grid(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(&g, v).is_err());
        assert!(Field::new(&g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn parseval_matches_grid_norm() {
        let g = make_grid(2, 32).unwrap();
        let u = Field::from_fn(&g, |x| x[0].sin() + 0.25 * (3.0 * x[1]).cos() + 0.1);
        let a = u.l2_norm();
        let b = u.spectral_l2_norm();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn upsample_keeps_nodal_values() {
        let g = make_grid(2, 16).unwrap();
        let u = Field::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + (8.0 * x[0]).cos());
        let fine = u.upsample(2).unwrap();
        let back = fine.restrict_to(&g).unwrap();
        assert!(u.max_abs_diff(&back) < 1e-13);
        // Nyquist mode cos(8x) interpolates as cos(8x) on the fine grid
        let expected = Field::from_fn(fine.grid(), |x| (x[0] + 2.0 * x[1]).sin() + (8.0 * x[0]).cos());
        assert!(fine.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(2, 8).unwrap();
        let u = Field::from_fn(&g, |x| x[0].cos() * x[1].sin());
        let path = dir.path().join("u_0000.bin");
        u.write_snapshot(&path, 0.125, "test").unwrap();
        let (v, t) = Field::read_snapshot(&path).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(v.values(), u.values());
        let header = std::fs::read(&path).unwrap();
        assert!(header.starts_with(b"2 8 0.125\n"));
        let meta: SnapshotMeta =
            serde_json::from_reader(File::open(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(meta.n, 8);
        assert_eq!(meta.time, 0.125);
    }

    #[test]
    fn vector_field_requires_shared_grid() {
        let g1 = make_grid(2, 8).unwrap();
        let g2 = make_grid(2, 16).unwrap();
        assert!(VectorField::new(vec![Field::zeros(&g1), Field::zeros(&g2)]).is_err());
        assert!(VectorField::new(vec![Field::zeros(&g1)]).is_err());
        assert!(VectorField::new(vec![Field::zeros(&g1), Field::zeros(&g1)]).is_ok());
    }
}
