use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Trap;
use crate::error::{Error, Result};

/// Rotating-frame positions and velocities of every ion, scaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalState {
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub time: f64,
}

impl CrystalState {
    pub fn at_rest(positions: Vec<Vector3<f64>>) -> Self {
        let n = positions.len();
        Self {
            positions,
            velocities: vec![Vector3::zeros(); n],
            time: 0.0,
        }
    }

    /// Lifts a planar configuration `(x, y)` into the `z = 0` plane.
    pub fn from_planar(xy: &[[f64; 2]]) -> Self {
        Self::at_rest(xy.iter().map(|p| Vector3::new(p[0], p[1], 0.0)).collect())
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self, trap: &Trap) -> Result<()> {
        if self.positions.len() != trap.n_ions() {
            return Err(Error::ShapeMismatch {
                expected: trap.n_ions(),
                actual: self.positions.len(),
            });
        }
        if self.velocities.len() != self.positions.len() {
            return Err(Error::ShapeMismatch {
                expected: self.positions.len(),
                actual: self.velocities.len(),
            });
        }
        let finite = self
            .positions
            .iter()
            .chain(&self.velocities)
            .all(|v| v.iter().all(|c| c.is_finite()))
            && self.time.is_finite();
        if !finite {
            return Err(Error::NumericalBlowup { time: trap.seconds(self.time) });
        }
        Ok(())
    }

    pub fn planar(&self) -> Vec<[f64; 2]> {
        self.positions.iter().map(|p| [p.x, p.y]).collect()
    }

    pub fn positions_si(&self, trap: &Trap) -> Vec<[f64; 3]> {
        let l = trap.units.length;
        self.positions.iter().map(|p| [p.x * l, p.y * l, p.z * l]).collect()
    }

    pub fn velocities_si(&self, trap: &Trap) -> Vec<[f64; 3]> {
        let v = trap.units.velocity;
        self.velocities.iter().map(|p| [p.x * v, p.y * v, p.z * v]).collect()
    }
}
