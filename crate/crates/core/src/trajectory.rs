//! Time-indexed snapshot sequences and their on-disk layout.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::grid::TorusGrid;

/// Stored solution `t ↦ u(·, t)` with piecewise-linear interpolation in time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    snapshots: Vec<Field>,
}

/// Index record written next to the snapshot files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub config: serde_json::Value,
}

const TIME_TOL: f64 = 1e-12;

impl Trajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(LabError::InvalidParameter(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "trajectory must start at t = 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidParameter("times must be strictly increasing".into()));
        }
        let grid = snapshots[0].grid();
        if snapshots.iter().any(|s| s.grid() != grid) {
            return Err(LabError::GridMismatch("snapshots on different grids".into()));
        }
        Ok(Self { times, snapshots })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.snapshots[0].grid()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn first(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("nonempty")
    }

    /// Index of the stored time equal to `t` (to a relative `1e−12`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = TIME_TOL * self.final_time().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Linear interpolation between the bracketing snapshots.
    pub fn at(&self, t: f64) -> Result<Field> {
        let tol = TIME_TOL * self.final_time().max(1.0);
        if t < -tol || t > self.final_time() + tol {
            return Err(LabError::InvalidParameter(format!(
                "t = {t} outside [0, {}]",
                self.final_time()
            )));
        }
        if let Some(i) = self.index_of(t) {
            return Ok(self.snapshots[i].clone());
        }
        let hi = self.times.partition_point(|&s| s < t);
        let lo = hi - 1;
        let theta = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        Ok(self.snapshots[lo].axpby(1.0 - theta, &self.snapshots[hi], theta))
    }

    /// Step between stored times when they are uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let dt = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
        uniform.then_some(dt)
    }

    /// Prefix of the trajectory up to the stored time `t_end`.
    pub fn truncate(&self, t_end: f64) -> Result<Trajectory> {
        let i = self.index_of(t_end).ok_or_else(|| {
            LabError::InvalidParameter(format!("t = {t_end} is not a stored time"))
        })?;
        Trajectory::new(self.times[..=i].to_vec(), self.snapshots[..=i].to_vec())
    }

    /// Writes `snap_NNNNNN.bin` files, their sidecars and `index.json`.
    pub fn save(&self, dir: &Path, config: serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.len());
        for (k, (t, snap)) in self.times.iter().zip(&self.snapshots).enumerate() {
            let name = format!("snap_{k:06}.bin");
            snap.write_snapshot(&dir.join(&name), *t, "hjlab trajectory")?;
            files.push(name);
        }
        let index = TrajectoryIndex {
            times: self.times.clone(),
            files,
            config,
        };
        serde_json::to_writer_pretty(File::create(dir.join("index.json"))?, &index)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Trajectory, serde_json::Value)> {
        let index: TrajectoryIndex = serde_json::from_reader(File::open(dir.join("index.json"))?)?;
        let mut snapshots = Vec::with_capacity(index.files.len());
        for (name, t) in index.files.iter().zip(&index.times) {
            let (field, stored) = Field::read_snapshot(&dir.join(name))?;
            if stored != *t {
                return Err(LabError::Format(format!(
                    "{name}: header time {stored} differs from index time {t}"
                )));
            }
            snapshots.push(field);
        }
        Ok((Trajectory::new(index.times, snapshots)?, index.config))
    }
}
