//! Two-objective DTLZ2 at a configurable input dimension.

use super::{check_bounds, Problem, ProblemSpec};
use crate::Result;
use std::f64::consts::FRAC_PI_2;

/// DTLZ2 with two objectives: on the optimal set the raw objective vector
/// traces the unit quarter-circle, and every trailing coordinate away from
/// 0.5 inflates both objectives.
pub struct Dtlz2 {
    spec: ProblemSpec,
}

impl Dtlz2 {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "dtlz2 needs at least two input dimensions");
        Self {
            spec: ProblemSpec {
                name: format!("dtlz2-{dim}"),
                dim,
                num_objectives: 2,
                num_constraints: 0,
                bounds: vec![(0.0, 1.0); dim],
                ref_point: vec![-6.0, -6.0],
            },
        }
    }
}

impl Problem for Dtlz2 {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_bounds(&self.spec, x)?;
        let g: f64 = x[1..].iter().map(|&v| (v - 0.5) * (v - 0.5)).sum();
        let f1 = (1.0 + g) * (x[0] * FRAC_PI_2).cos();
        let f2 = (1.0 + g) * (x[0] * FRAC_PI_2).sin();
        Ok((vec![-f1, -f2], Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn known_points() {
        let p = Dtlz2::new(10);
        let mut x = vec![0.5; 10];
        x[0] = 0.0;
        let (f, c) = p.evaluate(&x).unwrap();
        assert!(c.is_empty());
        assert!((f[0] - -1.0).abs() < 1e-12 && f[1].abs() < 1e-12);

        let mut x = vec![1.0; 10];
        x[0] = 0.0;
        let (f, _) = p.evaluate(&x).unwrap();
        assert!((f[0] - -3.25).abs() < 1e-12);
    }

    #[test]
    fn matches_independent_oracle_values() {
        // frozen from an independently coded implementation of the published
        // formulas
        let p = Dtlz2::new(10);
        let x = vec![
            0.27817565866654936,
            0.2924609200011006,
            0.7967001476654111,
            0.3602347204676374,
            0.5038476720368273,
            0.5761262261462149,
            0.7412504745675472,
            0.6457721924974055,
            0.04205438486214008,
            0.9907852451829486,
        ];
        let (f, _) = p.evaluate(&x).unwrap();
        assert!((f[0] - -1.5280273345813171).abs() < 1e-12);
        assert!((f[1] - -0.7136938468788158).abs() < 1e-12);

        let p = Dtlz2::new(30);
        let x = vec![
            0.019151504274004694,
            0.662154352823269,
            0.8147170240728429,
            0.027481838268359704,
            0.816356900754989,
            0.6471367359145621,
            0.1790844371009861,
            0.1381346004714359,
            0.05766908162636053,
            0.12928764686515504,
            0.3457113129371384,
            0.7750784847449852,
            0.5072285018451611,
            0.9422460204170772,
            0.3401802364159128,
            0.673417401668412,
            0.19144627701088246,
            0.1091057406784165,
            0.21778200722153085,
            0.5306021556969261,
            0.7389851446203198,
            0.7299949877179376,
            0.3725872646695191,
            0.34786579301451104,
            0.10843526187094621,
            0.5968678213573996,
            0.0928861411476879,
            0.16947926010580416,
            0.7071751617971149,
            0.5122190609695464,
        ];
        let (f, _) = p.evaluate(&x).unwrap();
        assert!((f[0] - -3.345311870553444).abs() < 1e-12);
        assert!((f[1] - -0.10066776329916377).abs() < 1e-12);
    }

    #[test]
    fn optimal_manifold_is_the_unit_circle() {
        let p = Dtlz2::new(10);
        let mut r = crate::rng::derive_rng(1, &[33]);
        for _ in 0..20 {
            let mut x = vec![0.5; 10];
            x[0] = r.random_range(0.0..1.0);
            let (f, _) = p.evaluate(&x).unwrap();
            assert!((f[0] * f[0] + f[1] * f[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let p = Dtlz2::new(4);
        assert!(p.evaluate(&[0.5, 0.5, 1.5, 0.5]).is_err());
        assert!(p.evaluate(&[0.5, 0.5]).is_err());
    }
}
