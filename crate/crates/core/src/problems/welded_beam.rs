//! Welded beam design: minimize fabrication cost and end deflection of a
//! cantilever beam, subject to shear-stress, bending-stress, geometry, and
//! buckling constraints.

use super::{check_bounds, Problem, ProblemSpec};
use crate::Result;

const P: f64 = 6000.0;
const L: f64 = 14.0;
const E: f64 = 30.0e6;
const G: f64 = 12.0e6;
const TAU_MAX: f64 = 13_600.0;
const SIGMA_MAX: f64 = 30_000.0;

pub struct WeldedBeam {
    spec: ProblemSpec,
}

impl WeldedBeam {
    pub fn new() -> Self {
        Self {
            spec: ProblemSpec {
                name: "welded-beam".into(),
                dim: 4,
                num_objectives: 2,
                num_constraints: 4,
                bounds: vec![(0.125, 5.0), (0.1, 10.0), (0.1, 10.0), (0.125, 5.0)],
                ref_point: vec![-40.0, -0.015],
            },
        }
    }
}

impl Default for WeldedBeam {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for WeldedBeam {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_bounds(&self.spec, x)?;
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);

        let moment = P * (L + x2 / 2.0);
        let half_span = (x1 + x3) / 2.0;
        let radius = (x2 * x2 / 4.0 + half_span * half_span).sqrt();
        let polar = 2.0 * 2.0f64.sqrt() * x1 * x2 * (x2 * x2 / 12.0 + half_span * half_span);
        let tau_primary = P / (2.0f64.sqrt() * x1 * x2);
        let tau_secondary = moment * radius / polar;
        let tau = (tau_primary * tau_primary
            + tau_primary * tau_secondary * x2 / radius
            + tau_secondary * tau_secondary)
            .sqrt();
        let sigma = 6.0 * P * L / (x4 * x3 * x3);
        let buckling = 4.013 * E * (x3 * x3 * x4.powi(6) / 36.0).sqrt() / (L * L)
            * (1.0 - x3 / (2.0 * L) * (E / (4.0 * G)).sqrt());

        let cost = 1.10471 * x1 * x1 * x2 + 0.04811 * x3 * x4 * (14.0 + x2);
        let deflection = 4.0 * P * L.powi(3) / (E * x4 * x3.powi(3));

        let constraints = vec![
            tau - TAU_MAX,
            sigma - SIGMA_MAX,
            x1 - x4,
            P - buckling,
        ];
        Ok((vec![-cost, -deflection], constraints))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn matches_independent_oracle_values() {
        let p = WeldedBeam::new();
        let x = vec![2.713690314344379, 6.445019641063885, 2.884752382972212, 0.6822074235432568];
        let (f, c) = p.evaluate(&x).unwrap();
        assert!((f[0] - -54.36734242557297).abs() < 1e-10);
        assert!((f[1] - -0.1340392628486788).abs() < 1e-12);
        assert!((c[0] - -12614.66994310297).abs() < 1e-8);
        assert!((c[1] - 58776.2945467113).abs() < 1e-7);
        assert!((c[2] - 2.031482890801122).abs() < 1e-12);
        assert!((c[3] - -80127.89011831449).abs() < 1e-7);

        let x = vec![2.9959654150179955, 9.281157722000899, 6.402296942625909, 3.008019902871898];
        let (f, c) = p.evaluate(&x).unwrap();
        assert!((f[0] - -113.59917039297198).abs() < 1e-10);
        assert!((f[1] - -0.0027809036950248722).abs() < 1e-14);
        assert!((c[0] - -13158.26045468067).abs() < 1e-8);
        assert!((c[1] - -25912.307627052207).abs() < 1e-8);
        assert!((c[2] - -0.012054487853902618).abs() < 1e-12);
        assert!((c[3] - -14607988.473060822).abs() < 1e-5);
    }

    #[test]
    fn outputs_finite_over_the_domain() {
        let p = WeldedBeam::new();
        let mut r = crate::rng::derive_rng(2, &[44]);
        for _ in 0..20_000 {
            let x: Vec<f64> = p
                .spec()
                .bounds
                .iter()
                .map(|&(lo, hi)| r.random_range(lo..hi))
                .collect();
            let (f, c) = p.evaluate(&x).unwrap();
            assert!(f.iter().chain(&c).all(|v| v.is_finite()), "{x:?}");
        }
    }
}
