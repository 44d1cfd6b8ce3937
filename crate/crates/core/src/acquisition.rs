//! Sequential-greedy batch construction.
//!
//! Each batch slot draws one joint posterior sample per outcome over every
//! active trust region's candidate set (jointly with that region's own
//! pending points), scores candidates by the hypervolume improvement of
//! their sampled objectives conditioned on the global front and all pending
//! points, and picks the best-scoring candidate across regions. Candidates
//! whose sampled constraints are violated score the negative total
//! violation, so any feasible candidate with nonnegative improvement wins
//! over every infeasible one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pareto::{hypervolume, ParetoState};
use crate::rng::{self, ns};
use crate::surrogate::{draw_rff, GPModel};
use crate::trust_region::TrustRegion;
use crate::{candidates, Error, Result};

/// A batch point that has been selected but not yet evaluated, carrying the
/// posterior-sample values under which it won its greedy step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendingPoint {
    pub x: Vec<f64>,
    pub sampled_objectives: Vec<f64>,
    pub sampled_constraints: Vec<f64>,
    pub source_tr: usize,
}

impl PendingPoint {
    pub fn feasible_under_sample(&self) -> bool {
        self.sampled_constraints.iter().all(|&c| c <= 0.0)
    }

    pub fn sampled_violation(&self) -> f64 {
        self.sampled_constraints.iter().map(|&c| c.max(0.0)).sum()
    }
}

/// Posterior sampler used for batch selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampler {
    /// Exact joint posterior samples via a Cholesky factor over the
    /// candidate set.
    Exact,
    /// Approximate function draws with the given number of Fourier basis
    /// functions, evaluated on the candidate set.
    Rff { num_features: usize },
}

/// Models and candidate base points for one active trust region.
pub struct TrBatchInput<'a> {
    pub tr: &'a TrustRegion,
    pub objective_models: &'a [GPModel],
    pub constraint_models: &'a [GPModel],
    /// Pareto-optimal observation locations inside the region's box; the
    /// region center is used when empty.
    pub base_points: Vec<Vec<f64>>,
}

/// Inputs shared by every greedy step of one batch-selection call.
pub struct BatchContext<'a> {
    pub state: &'a ParetoState,
    pub q: usize,
    pub candidate_count: usize,
    pub perturb_prob: f64,
    pub sampler: Sampler,
    pub seed: u64,
    pub iteration: u64,
}

/// Per-greedy-step record of what was chosen and what the alternatives
/// scored, kept in the run record so constraint-fallback behavior can be
/// audited afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionLogEntry {
    pub iteration: u64,
    pub slot: usize,
    pub chosen_tr: usize,
    pub chosen_score: f64,
    pub chosen_feasible_under_sample: bool,
    /// Best score among candidates feasible under their samples, across all
    /// regions this step (NaN when there were none).
    pub best_feasible_score: f64,
    /// Best score among candidates infeasible under their samples (NaN when
    /// there were none).
    pub best_infeasible_score: f64,
}

/// Scores one trust region's candidates under sampled outcome values.
///
/// For candidate `j`: if its sampled constraints are all satisfied, the
/// score is the hypervolume improvement of its sampled objectives over the
/// front joined with the feasible pending points; otherwise the score is
/// minus the total sampled constraint violation.
pub fn score_candidates(
    sampled_f: &[Vec<f64>],
    sampled_c: &[Vec<f64>],
    pending: &[PendingPoint],
    state: &ParetoState,
) -> Result<Vec<f64>> {
    if !sampled_c.is_empty() && sampled_c.len() != sampled_f.len() {
        return Err(Error::InvalidArgument(
            "sampled objective and constraint row counts differ".into(),
        ));
    }
    let mut base: Vec<Vec<f64>> = state.front_objectives().to_vec();
    base.extend(
        pending
            .iter()
            .filter(|p| p.feasible_under_sample())
            .map(|p| p.sampled_objectives.clone()),
    );
    let base_hv = hypervolume(&base, state.ref_point())?;

    let mut scores = Vec::with_capacity(sampled_f.len());
    for (j, f) in sampled_f.iter().enumerate() {
        let violation: f64 = if sampled_c.is_empty() {
            0.0
        } else {
            sampled_c[j].iter().map(|&c| c.max(0.0)).sum()
        };
        if violation > 0.0 {
            scores.push(-violation);
            continue;
        }
        base.push(f.clone());
        let hv = hypervolume(&base, state.ref_point())?;
        base.pop();
        scores.push((hv - base_hv).max(0.0));
    }
    Ok(scores)
}

struct TrStepResult {
    best_index: usize,
    best_score: f64,
    best_feasible: Option<f64>,
    best_infeasible: Option<f64>,
    chosen: PendingPoint,
}

fn sample_outcome_rows(
    model: &GPModel,
    xs: &[Vec<f64>],
    sampler: Sampler,
    seed: u64,
    path: &[u64],
) -> Result<Vec<f64>> {
    match sampler {
        Sampler::Exact => {
            let mut rng = rng::derive_rng(seed, path);
            let draw = model.sample_joint(xs, &mut rng, 1)?;
            Ok(draw.row(0).iter().copied().collect())
        }
        Sampler::Rff { num_features } => {
            let mut rng = rng::derive_rng(seed, path);
            let sample = draw_rff(model, num_features, &mut rng)?;
            Ok(sample.evaluate(xs))
        }
    }
}

fn step_for_tr(
    input: &TrBatchInput,
    cands: &[Vec<f64>],
    pending: &[PendingPoint],
    ctx: &BatchContext,
    step: usize,
) -> Result<TrStepResult> {
    let tr_id = input.tr.id();
    let own_pending: Vec<&PendingPoint> =
        pending.iter().filter(|p| p.source_tr == tr_id).collect();
    let mut xs: Vec<Vec<f64>> = cands.to_vec();
    xs.extend(own_pending.iter().map(|p| p.x.clone()));

    let m = input.objective_models.len();
    let c = input.constraint_models.len();
    let r = cands.len();
    let mut values = Vec::with_capacity(m + c);
    for (k, model) in input.objective_models.iter().chain(input.constraint_models).enumerate() {
        let path = [ns::THOMPSON, ctx.iteration, step as u64, tr_id as u64, k as u64];
        values.push(sample_outcome_rows(model, &xs, ctx.sampler, ctx.seed, &path)?);
    }

    let sampled_f: Vec<Vec<f64>> =
        (0..r).map(|j| (0..m).map(|k| values[k][j]).collect()).collect();
    let sampled_c: Vec<Vec<f64>> = if c == 0 {
        Vec::new()
    } else {
        (0..r).map(|j| (0..c).map(|k| values[m + k][j]).collect()).collect()
    };

    // This region's pending points enter with their freshly sampled values;
    // other regions' pending keep the values stored at selection time.
    let mut scoring_pending: Vec<PendingPoint> = Vec::with_capacity(pending.len());
    for (i, p) in own_pending.iter().enumerate() {
        scoring_pending.push(PendingPoint {
            x: p.x.clone(),
            sampled_objectives: (0..m).map(|k| values[k][r + i]).collect(),
            sampled_constraints: (0..c).map(|k| values[m + k][r + i]).collect(),
            source_tr: tr_id,
        });
    }
    scoring_pending.extend(pending.iter().filter(|p| p.source_tr != tr_id).cloned());

    let scores = score_candidates(&sampled_f, &sampled_c, &scoring_pending, ctx.state)?;
    let mut best_index = 0usize;
    let mut best_feasible: Option<f64> = None;
    let mut best_infeasible: Option<f64> = None;
    for (j, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Numerical(format!("non-finite acquisition value {s}")));
        }
        if s > scores[best_index] {
            best_index = j;
        }
        let feasible = sampled_c.is_empty() || sampled_c[j].iter().all(|&v| v <= 0.0);
        let slot = if feasible { &mut best_feasible } else { &mut best_infeasible };
        if slot.is_none() || s > slot.unwrap() {
            *slot = Some(s);
        }
    }
    Ok(TrStepResult {
        best_index,
        best_score: scores[best_index],
        best_feasible,
        best_infeasible,
        chosen: PendingPoint {
            x: cands[best_index].clone(),
            sampled_objectives: sampled_f[best_index].clone(),
            sampled_constraints: if sampled_c.is_empty() {
                Vec::new()
            } else {
                sampled_c[best_index].clone()
            },
            source_tr: tr_id,
        },
    })
}

/// Sequential-greedy batch selection over externally supplied candidate
/// sets: `provider(step, tr_index)` must yield the discrete candidate set
/// for that region at that greedy step.
pub fn select_batch_with<F>(
    trs: &[TrBatchInput],
    provider: F,
    mut pending: Vec<PendingPoint>,
    ctx: &BatchContext,
) -> Result<(Vec<PendingPoint>, Vec<SelectionLogEntry>)>
where
    F: Fn(usize, usize) -> Result<Vec<Vec<f64>>> + Sync,
{
    if trs.is_empty() {
        return Err(Error::Lifecycle("batch selection requires at least one active trust region".into()));
    }
    if ctx.q == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut selected = Vec::with_capacity(ctx.q);
    let mut log = Vec::with_capacity(ctx.q);
    for step in 0..ctx.q {
        let results: Vec<Result<TrStepResult>> = trs
            .par_iter()
            .enumerate()
            .map(|(t, input)| {
                let cands = provider(step, t)?;
                step_for_tr(input, &cands, &pending, ctx, step)
            })
            .collect();

        let mut winner: Option<(usize, TrStepResult)> = None;
        let mut best_feasible = f64::NAN;
        let mut best_infeasible = f64::NAN;
        for (t, res) in results.into_iter().enumerate() {
            let res = res?;
            if let Some(v) = res.best_feasible {
                if !(best_feasible >= v) {
                    best_feasible = v;
                }
            }
            if let Some(v) = res.best_infeasible {
                if !(best_infeasible >= v) {
                    best_infeasible = v;
                }
            }
            let better = match &winner {
                None => true,
                // strictly better score wins; ties keep the earlier
                // (tr id, candidate index)
                Some((_, w)) => res.best_score > w.best_score,
            };
            if better {
                winner = Some((t, res));
            }
        }
        let (_, win) = winner.expect("at least one trust region");
        log.push(SelectionLogEntry {
            iteration: ctx.iteration,
            slot: step,
            chosen_tr: win.chosen.source_tr,
            chosen_score: win.best_score,
            chosen_feasible_under_sample: win.chosen.feasible_under_sample(),
            best_feasible_score: best_feasible,
            best_infeasible_score: best_infeasible,
        });
        pending.push(win.chosen.clone());
        selected.push(win.chosen);
    }
    Ok((selected, log))
}

/// Sequential-greedy batch selection with fresh perturbation-based candidate
/// sets drawn inside each region at every greedy step.
pub fn select_batch(
    trs: &[TrBatchInput],
    pending: Vec<PendingPoint>,
    ctx: &BatchContext,
) -> Result<(Vec<PendingPoint>, Vec<SelectionLogEntry>)> {
    let provider = |step: usize, t: usize| {
        let input = &trs[t];
        let seed = rng::derive_key(ctx.seed, &[ns::CANDIDATES, ctx.iteration, step as u64]);
        let set = candidates::gen_candidates(
            input.tr,
            &input.base_points,
            ctx.candidate_count,
            ctx.perturb_prob,
            seed,
        )?;
        Ok(set.points)
    };
    select_batch_with(trs, provider, pending, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::ParetoState;
    use crate::surrogate::GPHyperparams;
    use crate::trust_region::TrustRegion;

    fn state_2d(points: &[[f64; 2]]) -> ParetoState {
        let mut s = ParetoState::new(vec![0.0, 0.0]);
        for (i, p) in points.iter().enumerate() {
            s.insert(p.to_vec(), i).unwrap();
        }
        s
    }

    #[test]
    fn dominated_feasible_candidate_scores_zero() {
        let state = state_2d(&[[2.0, 2.0]]);
        let scores =
            score_candidates(&[vec![1.0, 1.0]], &[vec![-0.5]], &[], &state).unwrap();
        assert_eq!(scores, vec![0.0]);
    }

    #[test]
    fn violated_candidate_scores_negative_violation() {
        let state = state_2d(&[[1.0, 1.0]]);
        let scores =
            score_candidates(&[vec![9.0, 9.0]], &[vec![0.3, -0.1]], &[], &state).unwrap();
        assert!((scores[0] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn incremental_hvi_conditioned_on_pending() {
        let state = state_2d(&[[1.0, 3.0], [3.0, 1.0]]);
        let pending = vec![PendingPoint {
            x: vec![0.5],
            sampled_objectives: vec![2.0, 2.0],
            sampled_constraints: vec![],
            source_tr: 0,
        }];
        let scores =
            score_candidates(&[vec![2.5, 2.5]], &[], &pending, &state).unwrap();
        // leave-in/leave-out oracle
        let with_pending = hypervolume(
            &[vec![1.0, 3.0], vec![3.0, 1.0], vec![2.0, 2.0]],
            state.ref_point(),
        )
        .unwrap();
        let with_both = hypervolume(
            &[vec![1.0, 3.0], vec![3.0, 1.0], vec![2.0, 2.0], vec![2.5, 2.5]],
            state.ref_point(),
        )
        .unwrap();
        assert!((scores[0] - (with_both - with_pending)).abs() < 1e-12);
    }

    #[test]
    fn feasible_nonnegative_infeasible_nonpositive() {
        use rand::Rng;
        let state = state_2d(&[[1.0, 2.0], [2.0, 1.0]]);
        let mut r = crate::rng::derive_rng(3, &[50]);
        for _ in 0..50 {
            let f = vec![r.random_range(-1.0..3.0), r.random_range(-1.0..3.0)];
            let c = vec![r.random_range(-1.0..1.0)];
            let s = score_candidates(&[f], &[c.clone()], &[], &state).unwrap()[0];
            if c[0] <= 0.0 {
                assert!(s >= 0.0);
            } else {
                assert!(s <= 0.0);
            }
        }
    }

    /// A trust region whose models predict fixed values with (near) zero
    /// variance: train the model exactly on the candidate points.
    fn deterministic_input<'a>(
        tr: &'a TrustRegion,
        cands: &[Vec<f64>],
        objectives: &[Vec<f64>],
        constraints: &[Vec<f64>],
        models: &'a mut Vec<GPModel>,
    ) -> TrBatchInput<'a> {
        let d = cands[0].len();
        let hyper = || GPHyperparams {
            lengthscales: vec![0.5; d],
            signal_variance: 1.0,
            noise_variance: 1e-10,
            constant_mean: 0.0,
        };
        let m = objectives[0].len();
        for k in 0..m {
            let targets: Vec<f64> = objectives.iter().map(|o| o[k]).collect();
            models.push(GPModel::with_hyperparams(cands, &targets, hyper()).unwrap());
        }
        let c = constraints.first().map_or(0, |v| v.len());
        for k in 0..c {
            let targets: Vec<f64> = constraints.iter().map(|v| v[k]).collect();
            models.push(GPModel::with_hyperparams(cands, &targets, hyper()).unwrap());
        }
        let (obj, con) = models.split_at(m);
        TrBatchInput { tr, objective_models: obj, constraint_models: con, base_points: vec![] }
    }

    fn ctx<'a>(state: &'a ParetoState, q: usize) -> BatchContext<'a> {
        BatchContext {
            state,
            q,
            candidate_count: 4,
            perturb_prob: 0.5,
            sampler: Sampler::Exact,
            seed: 7,
            iteration: 1,
        }
    }

    #[test]
    fn dominant_candidate_wins_single_slot() {
        let state = state_2d(&[[0.5, 0.5]]);
        let tr = TrustRegion::new(0, vec![0.5, 0.5], 1.0);
        let cands = vec![vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3]];
        let objs = vec![vec![1.0, 1.0], vec![3.0, 3.0], vec![0.6, 0.6]];
        let mut store = Vec::new();
        let input = deterministic_input(&tr, &cands, &objs, &[], &mut store);
        let c = ctx(&state, 1);
        let provider = |_: usize, _: usize| Ok(cands.clone());
        let (sel, log) = select_batch_with(&[input], provider, vec![], &c).unwrap();
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].x, vec![0.2, 0.2]);
        assert!(log[0].chosen_feasible_under_sample);
        assert!(log[0].best_infeasible_score.is_nan());
    }

    #[test]
    fn all_infeasible_picks_least_violation() {
        let state = state_2d(&[[0.5, 0.5]]);
        let tr = TrustRegion::new(0, vec![0.5, 0.5], 1.0);
        let cands = vec![vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3]];
        let objs = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let cons = vec![vec![0.9], vec![0.2], vec![0.5]];
        let mut store = Vec::new();
        let input = deterministic_input(&tr, &cands, &objs, &cons, &mut store);
        let c = ctx(&state, 1);
        let provider = |_: usize, _: usize| Ok(cands.clone());
        let (sel, log) = select_batch_with(&[input], provider, vec![], &c).unwrap();
        assert_eq!(sel[0].x, vec![0.2, 0.2]);
        assert!(!log[0].chosen_feasible_under_sample);
        assert!(log[0].best_feasible_score.is_nan());
        assert!((log[0].best_infeasible_score + 0.2).abs() < 2e-2);
    }

    #[test]
    fn pending_duplicate_scores_zero_and_loses() {
        let state = state_2d(&[[0.2, 0.2]]);
        let tr = TrustRegion::new(0, vec![0.5, 0.5], 1.0);
        let cands = vec![vec![0.4, 0.4], vec![0.6, 0.6]];
        let objs = vec![vec![2.0, 2.0], vec![1.5, 2.5]];
        let mut store = Vec::new();
        let input = deterministic_input(&tr, &cands, &objs, &[], &mut store);
        let c = ctx(&state, 2);
        let provider = |_: usize, _: usize| Ok(cands.clone());
        let (sel, _) = select_batch_with(&[input], provider, vec![], &c).unwrap();
        // first slot takes the dominant candidate; re-picking it would add
        // nothing, so the second slot takes the other one
        assert_eq!(sel[0].x, vec![0.4, 0.4]);
        assert_eq!(sel[1].x, vec![0.6, 0.6]);
    }

    #[test]
    fn batch_size_exact_and_inside_box() {
        let state = state_2d(&[[0.1, 0.1]]);
        let tr = TrustRegion::new(3, vec![0.5, 0.5], 0.4);
        let train = vec![vec![0.45, 0.45], vec![0.55, 0.55]];
        let objs = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let mut store = Vec::new();
        let mut input = deterministic_input(&tr, &train, &objs, &[], &mut store);
        input.base_points = vec![vec![0.5, 0.5]];
        let state_ref = &state;
        let c = BatchContext {
            state: state_ref,
            q: 3,
            candidate_count: 8,
            perturb_prob: 0.7,
            sampler: Sampler::Exact,
            seed: 11,
            iteration: 2,
        };
        let (sel, log) = select_batch(&[input], vec![], &c).unwrap();
        assert_eq!(sel.len(), 3);
        assert_eq!(log.len(), 3);
        for p in &sel {
            assert_eq!(p.source_tr, 3);
            assert!(tr.contains(&p.x), "{:?}", p.x);
        }
    }

    #[test]
    fn candidate_order_invariance_up_to_tiebreak() {
        let state = state_2d(&[[0.5, 0.5]]);
        let tr = TrustRegion::new(0, vec![0.5, 0.5], 1.0);
        let cands = vec![vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3]];
        let objs = vec![vec![1.0, 1.0], vec![3.0, 3.0], vec![0.6, 0.6]];
        let mut store = Vec::new();
        let input = deterministic_input(&tr, &cands, &objs, &[], &mut store);
        let c = ctx(&state, 1);
        let reversed: Vec<Vec<f64>> = cands.iter().rev().cloned().collect();
        let provider = |_: usize, _: usize| Ok(reversed.clone());
        let (sel, _) = select_batch_with(&[input], provider, vec![], &c).unwrap();
        assert_eq!(sel[0].x, vec![0.2, 0.2]);
    }

    #[test]
    fn no_active_trust_regions_is_an_error() {
        let state = state_2d(&[[0.5, 0.5]]);
        let c = ctx(&state, 1);
        let provider = |_: usize, _: usize| Ok(vec![vec![0.5, 0.5]]);
        assert!(select_batch_with(&[], provider, vec![], &c).is_err());
    }
}
