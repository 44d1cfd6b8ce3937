//! Run configuration: problem choice, budgets, trust-region and surrogate
//! settings, sampler, and execution options. Loadable from TOML with every
//! field optional; flag overrides are applied by the CLI on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::Sampler;
use crate::problems::{self, Problem, ProblemSpec, SubprocessProblem};
use crate::surrogate::FitOptions;
use crate::trust_region::TrustRegionConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Built-in name (`dtlz2-<d>`, `mw7`, `welded-beam`, `vehicle-safety`)
    /// or `subprocess`.
    pub name: String,
    /// Program and arguments for `subprocess` problems.
    pub command: Vec<String>,
    pub dim: Option<usize>,
    pub num_objectives: Option<usize>,
    pub num_constraints: Option<usize>,
    /// Raw domain bounds for `subprocess` problems; defaults to the unit
    /// hypercube.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Reference point in the maximization convention. Required for
    /// `subprocess` problems, optional override for built-ins.
    pub ref_point: Option<Vec<f64>>,
}

impl ProblemConfig {
    pub fn instantiate(&self) -> Result<Box<dyn Problem>> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("problem.name is required".into()));
        }
        if self.name == "subprocess" {
            let dim = self
                .dim
                .ok_or_else(|| Error::InvalidConfig("problem.dim is required for subprocess problems".into()))?;
            let num_objectives = self.num_objectives.ok_or_else(|| {
                Error::InvalidConfig("problem.num_objectives is required for subprocess problems".into())
            })?;
            let ref_point = self.ref_point.clone().ok_or_else(|| {
                Error::InvalidConfig("problem.ref_point is required for subprocess problems".into())
            })?;
            let spec = ProblemSpec {
                name: "subprocess".into(),
                dim,
                num_objectives,
                num_constraints: self.num_constraints.unwrap_or(0),
                bounds: self.bounds.clone().unwrap_or_else(|| vec![(0.0, 1.0); dim]),
                ref_point,
            };
            return Ok(Box::new(SubprocessProblem::spawn(&self.command, spec)?));
        }
        let mut problem = problems::by_name(&self.name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown problem name `{}`", self.name)))?;
        if let Some(ref_point) = &self.ref_point {
            let spec = problem.spec();
            if ref_point.len() != spec.num_objectives {
                return Err(Error::InvalidConfig(
                    "problem.ref_point length must equal the number of objectives".into(),
                ));
            }
            problem = Box::new(RefPointOverride {
                spec: ProblemSpec { ref_point: ref_point.clone(), ..spec.clone() },
                inner: problem,
            });
        }
        Ok(problem)
    }
}

struct RefPointOverride {
    spec: ProblemSpec,
    inner: Box<dyn Problem>,
}

impl Problem for RefPointOverride {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
    fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.inner.evaluate(x)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    /// Initial design size.
    pub n0: usize,
    /// Total evaluation budget including the initial design.
    pub nf: usize,
    /// Batch size.
    pub q: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { n0: 50, nf: 500, q: 10 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidatesConfig {
    /// Discrete candidate-set size per trust region and greedy step.
    /// Defaults to the per-problem value (4096 for welded-beam and
    /// vehicle-safety, 512 otherwise).
    pub count: Option<usize>,
    /// Keep only this many nearest observations in a model-fitting window
    /// (unbounded when absent).
    pub window_cap: Option<usize>,
}

impl Default for CandidatesConfig {
    fn default() -> Self {
        Self { count: None, window_cap: None }
    }
}

pub fn default_candidate_count(problem_name: &str) -> usize {
    match problem_name {
        "welded-beam" | "vehicle-safety" => 4096,
        _ => 512,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub lengthscale_min: f64,
    pub lengthscale_max: f64,
    pub signal_variance_min: f64,
    pub signal_variance_max: f64,
    pub noise_ratio: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        let f = FitOptions::default();
        Self {
            restarts: f.restarts,
            max_iters: f.max_iters,
            learning_rate: f.learning_rate,
            lengthscale_min: f.lengthscale_bounds.0,
            lengthscale_max: f.lengthscale_bounds.1,
            signal_variance_min: f.signal_variance_bounds.0,
            signal_variance_max: f.signal_variance_bounds.1,
            noise_ratio: f.noise_ratio,
        }
    }
}

impl SurrogateConfig {
    pub fn fit_options(&self, seed: u64) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            max_iters: self.max_iters,
            learning_rate: self.learning_rate,
            lengthscale_bounds: (self.lengthscale_min, self.lengthscale_max),
            signal_variance_bounds: (self.signal_variance_min, self.signal_variance_max),
            noise_ratio: self.noise_ratio,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// 1 runs synchronously (and bit-reproducibly); larger values evaluate
    /// through a worker pool with selections whenever a worker is idle.
    pub async_workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, out_dir: None, async_workers: 1 }
    }
}

/// Full configuration of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub budget: BudgetConfig,
    pub trust_region: TrustRegionConfig,
    pub candidates: CandidatesConfig,
    pub surrogate: SurrogateConfig,
    pub sampler: Sampler,
    pub run: RunSection,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Exact
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.count.unwrap_or_else(|| default_candidate_count(&self.problem.name))
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budget;
        // nf == n0 is the degenerate zero-iteration run
        if b.n0 < 1 || b.nf < b.n0 {
            return Err(Error::InvalidConfig(format!(
                "budget requires nf >= n0 >= 1, got n0={} nf={}",
                b.n0, b.nf
            )));
        }
        if b.q < 1 {
            return Err(Error::InvalidConfig("budget.q must be >= 1".into()));
        }
        let t = &self.trust_region;
        if t.n_tr < 1 {
            return Err(Error::InvalidConfig("trust_region.n_tr must be >= 1".into()));
        }
        if !(t.l_min > 0.0 && t.l_min <= t.l_init && t.l_init <= t.l_max) {
            return Err(Error::InvalidConfig(
                "trust_region lengths must satisfy 0 < l_min <= l_init <= l_max".into(),
            ));
        }
        if self.candidate_count() < 1 {
            return Err(Error::InvalidConfig("candidates.count must be >= 1".into()));
        }
        if let Sampler::Rff { num_features } = self.sampler {
            if num_features < 1 {
                return Err(Error::InvalidConfig("sampler.num_features must be >= 1".into()));
            }
        }
        if self.surrogate.restarts < 1 {
            return Err(Error::InvalidConfig("surrogate.restarts must be >= 1".into()));
        }
        if self.run.async_workers < 1 {
            return Err(Error::InvalidConfig("run.async_workers must be >= 1".into()));
        }
        Ok(())
    }
}
