//! Multi-objective Bayesian optimization over high-dimensional search spaces
//! using multiple collaborating trust regions.
//!
//! The optimizer maintains several trust regions, each centered on a point of
//! the global Pareto frontier with maximal hypervolume contribution. Local
//! Gaussian-process surrogates are fit per outcome on the observations near
//! each trust region, and batches are built greedily: every batch slot draws
//! joint Thompson samples over discrete candidate sets inside each region and
//! picks the candidate with the largest hypervolume improvement conditioned
//! on the points already selected. Trust regions shrink on failure streaks,
//! terminate at a minimum edge length, and are reinitialized at the point of
//! maximal hypervolume contribution.
//!
//! The crate is organized around the pieces of that loop:
//!
//! - [`pareto`]: domination, nondominated filtering, exact hypervolume,
//!   per-point contributions, and hypervolume improvement.
//! - [`surrogate`]: local GP regression per outcome, exact joint posterior
//!   sampling, and random-Fourier-feature function draws.
//! - [`trust_region`]: lifecycle counters, edge-length adaptation, center
//!   selection, and local data windows.
//! - [`candidates`]: scrambled Sobol sequences, the decaying perturbation
//!   schedule, and discrete candidate generation inside a region.
//! - [`acquisition`]: sequential-greedy hypervolume-improvement batch
//!   selection with the constraint-violation fallback.
//! - [`problems`]: benchmark problems and the pluggable problem interface.
//! - [`engine`]: the main optimization loop, the Sobol baseline, run records
//!   and their serialization.

pub mod acquisition;
pub mod candidates;
pub mod engine;
mod error;
pub mod pareto;
pub mod problems;
pub mod rng;
pub mod surrogate;
pub mod trust_region;

pub use error::{Error, Result};

pub use acquisition::{select_batch, PendingPoint};
pub use candidates::{gen_candidates, perturb_prob, sobol, CandidateSet, PerturbSchedule};
pub use engine::{run, run_sobol_baseline, RunConfig, RunRecord};
pub use pareto::{dominates, hv_contributions, hvi, hypervolume, pareto_filter, ParetoState};
pub use problems::{initial_design, Problem, ProblemSpec};
pub use surrogate::{fit_gp, GPHyperparams, GPModel, RffSample};
pub use trust_region::{local_window, select_centers, TrustRegion, TrustRegionConfig};
