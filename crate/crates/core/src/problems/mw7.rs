//! MW7: two objectives on (scaled copies of) the unit quarter-circle with
//! two sinusoidal constraints that carve the frontier into disconnected
//! pieces.

use super::{check_bounds, Problem, ProblemSpec};
use crate::Result;

pub struct Mw7 {
    spec: ProblemSpec,
}

impl Mw7 {
    pub fn new() -> Self {
        Self {
            spec: ProblemSpec {
                name: "mw7".into(),
                dim: 10,
                num_objectives: 2,
                num_constraints: 2,
                bounds: vec![(0.0, 1.0); 10],
                ref_point: vec![-1.2, -1.2],
            },
        }
    }
}

impl Default for Mw7 {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for Mw7 {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_bounds(&self.spec, x)?;
        // distance function g3: each tail coordinate chases
        // 1 - (previous - 0.5)^2
        let g = 1.0
            + x.windows(2)
                .map(|w| {
                    let z = w[1] + (w[0] - 0.5) * (w[0] - 0.5) - 1.0;
                    2.0 * z * z
                })
                .sum::<f64>();
        let f1 = g * x[0];
        let f2 = g * (1.0 - x[0] * x[0]).max(0.0).sqrt();
        let angle = f2.atan2(f1);
        let s16 = 0.4 * (4.0 * angle).sin().powi(16);
        let s8 = 0.2 * (4.0 * angle).sin().powi(8);
        let sq = f1 * f1 + f2 * f2;
        let c1 = sq - (1.2 + s16.abs()) * (1.2 + s16.abs());
        let c2 = (1.15 - s8) * (1.15 - s8) - sq;
        Ok((vec![-f1, -f2], vec![c1, c2]))
    }
}
