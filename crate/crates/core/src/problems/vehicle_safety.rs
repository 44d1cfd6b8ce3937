//! Vehicle crashworthiness design: minimize frame mass, collision
//! acceleration, and toe-board intrusion as polynomial response surfaces of
//! five panel thicknesses.

use super::{check_bounds, Problem, ProblemSpec};
use crate::Result;

pub struct VehicleSafety {
    spec: ProblemSpec,
}

impl VehicleSafety {
    pub fn new() -> Self {
        Self {
            spec: ProblemSpec {
                name: "vehicle-safety".into(),
                dim: 5,
                num_objectives: 3,
                num_constraints: 0,
                bounds: vec![(1.0, 3.0); 5],
                ref_point: vec![-1698.55, -11.21, -0.29],
            },
        }
    }
}

impl Default for VehicleSafety {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for VehicleSafety {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_bounds(&self.spec, x)?;
        let (x1, x2, x3, x4, x5) = (x[0], x[1], x[2], x[3], x[4]);
        let mass = 1640.2823
            + 2.3573285 * x1
            + 2.3220035 * x2
            + 4.5688768 * x3
            + 7.7213633 * x4
            + 4.4559504 * x5;
        let acceleration = 6.5856 + 1.15 * x1 - 1.0427 * x2 + 0.9738 * x3 + 0.8364 * x4
            - 0.3695 * x1 * x4
            + 0.0861 * x1 * x5
            + 0.3628 * x2 * x4
            + 0.1106 * x1 * x1
            - 0.3437 * x3 * x3
            + 0.1764 * x4 * x4;
        let intrusion = -0.0551 + 0.0181 * x1 + 0.1024 * x2 + 0.0421 * x3
            - 0.0073 * x1 * x2
            + 0.024 * x2 * x3
            - 0.0118 * x2 * x4
            - 0.0204 * x3 * x4
            - 0.008 * x3 * x5
            - 0.0241 * x3 * x3
            + 0.0109 * x4 * x4;
        Ok((vec![-mass, -acceleration, -intrusion], Vec::new()))
    }
}
