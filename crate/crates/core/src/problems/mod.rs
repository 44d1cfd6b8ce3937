//! Benchmark problems and the pluggable problem interface.
//!
//! All problems expose objectives in the maximization convention (raw
//! minimization objectives and their reference points are negated) and
//! constraints with `c <= 0` meaning feasible.

mod dtlz2;
mod mw7;
mod subprocess;
mod vehicle_safety;
mod welded_beam;

pub use dtlz2::Dtlz2;
pub use mw7::Mw7;
pub use subprocess::SubprocessProblem;
pub use vehicle_safety::VehicleSafety;
pub use welded_beam::WeldedBeam;

use crate::rng::{derive_key, ns};
use crate::{candidates, Error, Result};

/// Static description of a problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub num_objectives: usize,
    pub num_constraints: usize,
    /// Raw domain, one `(lower, upper)` pair per dimension.
    pub bounds: Vec<(f64, f64)>,
    /// Reference point in the maximization convention.
    pub ref_point: Vec<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.dim {
            return Err(Error::InvalidConfig("one bounds pair per dimension required".into()));
        }
        if self.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidConfig("each lower bound must be below its upper bound".into()));
        }
        if self.ref_point.len() != self.num_objectives {
            return Err(Error::InvalidConfig("reference point length must equal the number of objectives".into()));
        }
        Ok(())
    }

    /// Maps a point from the unit hypercube into the raw domain.
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter().zip(&self.bounds).map(|(&u, &(lo, hi))| lo + u * (hi - lo)).collect()
    }

    /// Maps a raw point into the unit hypercube.
    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.bounds).map(|(&x, &(lo, hi))| (x - lo) / (hi - lo)).collect()
    }

    pub fn in_bounds(&self, raw: &[f64]) -> bool {
        raw.len() == self.dim
            && raw
                .iter()
                .zip(&self.bounds)
                .all(|(&x, &(lo, hi))| x >= lo - 1e-12 && x <= hi + 1e-12)
    }
}

/// A black-box optimization problem.
pub trait Problem: Send + Sync {
    fn spec(&self) -> &ProblemSpec;

    /// Evaluates a raw in-bounds point, returning (objectives, constraints).
    fn evaluate(&self, x_raw: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

pub(crate) fn check_bounds(spec: &ProblemSpec, x: &[f64]) -> Result<()> {
    if !spec.in_bounds(x) {
        return Err(Error::InvalidArgument(format!(
            "point outside the domain of {}: {x:?}",
            spec.name
        )));
    }
    Ok(())
}

/// Total constraint violation under the `c <= 0` feasible convention.
pub fn total_violation(constraints: &[f64]) -> f64 {
    constraints.iter().map(|&c| c.max(0.0)).sum()
}

/// Scrambled-Sobol initial design mapped to the raw domain, deterministic
/// per seed.
pub fn initial_design(problem: &dyn Problem, n0: usize, seed: u64) -> Vec<Vec<f64>> {
    let spec = problem.spec();
    let unit = candidates::sobol(n0, spec.dim, derive_key(seed, &[ns::INITIAL_DESIGN]));
    unit.iter().map(|u| spec.denormalize(u)).collect()
}

/// Instantiates a built-in problem by name. `dtlz2-<d>` accepts any input
/// dimension.
pub fn by_name(name: &str) -> Option<Box<dyn Problem>> {
    match name {
        "mw7" => Some(Box::new(Mw7::new())),
        "welded-beam" => Some(Box::new(WeldedBeam::new())),
        "vehicle-safety" => Some(Box::new(VehicleSafety::new())),
        _ => {
            let d = name.strip_prefix("dtlz2-")?.parse::<usize>().ok()?;
            (d >= 2).then(|| Box::new(Dtlz2::new(d)) as Box<dyn Problem>)
        }
    }
}

/// Names accepted by [`by_name`] (the DTLZ2 presets are the paper's).
pub const BUILTIN_NAMES: &[&str] =
    &["dtlz2-10", "dtlz2-30", "dtlz2-100", "mw7", "welded-beam", "vehicle-safety"];
