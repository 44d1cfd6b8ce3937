//! The main optimization loop, the quasi-random baseline, and asynchronous
//! evaluation dispatch.
//!
//! One iteration of the synchronous loop: fit local models per trust region
//! on its data window, select a batch by sequential-greedy hypervolume
//! improvement over Thompson samples, evaluate, update the global archive,
//! update per-region success/failure streaks and edge lengths, reinitialize
//! terminated regions, and re-assign every region's center by ranked
//! hypervolume contribution.

mod config;
mod record;

pub use config::{
    default_candidate_count, BudgetConfig, CandidatesConfig, ProblemConfig, RunConfig,
    RunSection, SurrogateConfig,
};
pub use record::{
    FrontRow, HvPoint, ObservationRecord, PhaseTimings, ProblemShape, RunRecord, TrEvent,
    TrEventKind,
};

use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::acquisition::{select_batch, BatchContext, PendingPoint, TrBatchInput};
use crate::candidates::{perturb_prob, sobol, PerturbSchedule};
use crate::pareto::ParetoState;
use crate::problems::{initial_design, total_violation, Problem, ProblemSpec};
use crate::rng::{derive_key, ns};
use crate::surrogate::{fit_gp_with, GPModel};
use crate::trust_region::{local_window, select_centers, CenterMode, LengthChange, TrustRegion};
use crate::{Error, Result};

/// Violation assigned to observations with non-finite outcome values.
const NONFINITE_VIOLATION: f64 = 1e30;
/// A batch counts as a hypervolume improvement above this tolerance.
const HV_IMPROVE_TOL: f64 = 1e-12;

struct Obs {
    raw: Vec<f64>,
    unit: Vec<f64>,
    objectives: Vec<f64>,
    constraints: Vec<f64>,
    violation: f64,
}

impl Obs {
    fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

fn evaluate_raw(problem: &dyn Problem, spec: &ProblemSpec, raw: Vec<f64>) -> Result<Obs> {
    let (objectives, constraints) = problem.evaluate(&raw)?;
    let finite = objectives.iter().chain(&constraints).all(|v| v.is_finite());
    let violation =
        if finite { total_violation(&constraints) } else { NONFINITE_VIOLATION };
    let unit = spec.normalize(&raw);
    Ok(Obs { raw, unit, objectives, constraints, violation })
}

/// Runs the optimizer for the full budget and returns the complete trace.
/// Fully deterministic given the seed when `run.async_workers == 1`. A
/// problem-evaluation failure aborts the run and returns the partial record
/// flagged incomplete.
pub fn run(problem: &dyn Problem, config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    problem.spec().validate()?;
    if config.budget.nf < config.budget.n0 {
        return Err(Error::InvalidConfig("budget.nf must be >= budget.n0".into()));
    }
    if config.run.async_workers > 1 {
        run_async(problem, config)
    } else {
        run_sync(problem, config)
    }
}

/// Instantiates the configured problem and runs it.
pub fn run_named(config: &RunConfig) -> Result<RunRecord> {
    let problem = config.problem.instantiate()?;
    run(problem.as_ref(), config)
}

/// Evaluates the whole budget on scrambled Sobol points: the quasi-random
/// baseline, in the same record format.
pub fn run_sobol_baseline(problem: &dyn Problem, config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    problem.spec().validate()?;
    let start = Instant::now();
    let spec = problem.spec();
    let (n0, nf, q) = (config.budget.n0, config.budget.nf, config.budget.q);
    let mut record = RunRecord::new(config.clone(), spec);
    record.method = "sobol".into();
    let mut state = ParetoState::new(spec.ref_point.clone());
    let points = sobol(nf, spec.dim, derive_key(config.run.seed, &[ns::SOBOL_BASELINE]));
    let eval_start = Instant::now();
    for (i, unit) in points.iter().enumerate() {
        let iteration = if i < n0 { 0 } else { 1 + ((i - n0) / q) as u64 };
        if i >= n0 && (i - n0) % q == 0 {
            record.hv_trace.push(HvPoint { evaluations: i, hypervolume: state.hypervolume() });
        }
        match evaluate_raw(problem, spec, spec.denormalize(unit)) {
            Ok(obs) => {
                if obs.feasible() {
                    state.insert(obs.objectives.clone(), i)?;
                }
                record.observations.push(ObservationRecord {
                    iteration,
                    tr_id: -1,
                    x: obs.raw,
                    objectives: obs.objectives,
                    constraints: obs.constraints,
                });
            }
            Err(Error::Evaluation(msg)) => {
                record.incomplete = true;
                record.abort_reason = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    record.timings.evaluation_secs = eval_start.elapsed().as_secs_f64();
    record.hv_trace.push(HvPoint {
        evaluations: record.observations.len(),
        hypervolume: state.hypervolume(),
    });
    finalize_front(&mut record, &state);
    record.timings.total_secs = start.elapsed().as_secs_f64();
    Ok(record)
}

fn finalize_front(record: &mut RunRecord, state: &ParetoState) {
    let mut rows: Vec<FrontRow> = state
        .front_origins()
        .iter()
        .zip(state.front_objectives())
        .map(|(&i, obj)| FrontRow {
            observation: i,
            x: record.observations[i].x.clone(),
            objectives: obj.clone(),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.objectives[0]
            .partial_cmp(&b.objectives[0])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.observation.cmp(&b.observation))
    });
    record.final_front = rows;
}

/// Shared mutable state of a running optimization.
struct Driver<'a> {
    problem: &'a dyn Problem,
    spec: &'a ProblemSpec,
    config: &'a RunConfig,
    record: RunRecord,
    observations: Vec<Obs>,
    state: ParetoState,
    min_violation: f64,
    trs: Vec<TrustRegion>,
    center_obs: Vec<Option<usize>>,
    n_m: usize,
}

impl<'a> Driver<'a> {
    fn new(problem: &'a dyn Problem, config: &'a RunConfig) -> Self {
        let spec = problem.spec();
        let d = spec.dim;
        let tau_fail = config.trust_region.tau_fail_for(d);
        let trs = (0..config.trust_region.n_tr)
            .map(|i| {
                TrustRegion::new(i, vec![0.5; d], config.trust_region.l_init)
                    .with_tolerances(config.trust_region.tau_succ, tau_fail)
            })
            .collect();
        Driver {
            problem,
            spec,
            config,
            record: RunRecord::new(config.clone(), spec),
            observations: Vec::new(),
            state: ParetoState::new(spec.ref_point.clone()),
            min_violation: f64::INFINITY,
            trs,
            center_obs: vec![None; config.trust_region.n_tr],
            n_m: 250.min(2 * d),
        }
    }

    /// Ingests one evaluated point; returns whether it strictly improved the
    /// global hypervolume (or, while the hypervolume is still zero, strictly
    /// decreased the minimum total constraint violation).
    fn ingest(&mut self, obs: Obs, iteration: u64, tr_id: i64) -> Result<bool> {
        let index = self.observations.len();
        let hv_before = self.state.hypervolume();
        let mut improved = false;
        if obs.feasible() {
            self.state.insert(obs.objectives.clone(), index)?;
            improved = self.state.hypervolume() - hv_before > HV_IMPROVE_TOL;
        }
        if !improved && hv_before == 0.0 && obs.violation < self.min_violation {
            improved = true;
        }
        self.min_violation = self.min_violation.min(obs.violation);
        self.record.observations.push(ObservationRecord {
            iteration,
            tr_id,
            x: obs.raw.clone(),
            objectives: obs.objectives.clone(),
            constraints: obs.constraints.clone(),
        });
        self.observations.push(obs);
        Ok(improved)
    }

    fn push_trace(&mut self) {
        self.record.hv_trace.push(HvPoint {
            evaluations: self.observations.len(),
            hypervolume: self.state.hypervolume(),
        });
    }

    /// Fits one model per outcome per trust region on its local window.
    fn fit_models(&self, iteration: u64) -> Result<Vec<Vec<GPModel>>> {
        let spec = self.spec;
        let outcomes = spec.num_objectives + spec.num_constraints;
        let all_xs: Vec<Vec<f64>> =
            self.observations.iter().map(|o| o.unit.clone()).collect();
        let jobs: Vec<(usize, usize)> = (0..self.trs.len())
            .flat_map(|t| (0..outcomes).map(move |k| (t, k)))
            .collect();
        let models: Vec<Result<(usize, usize, GPModel)>> = jobs
            .par_iter()
            .map(|&(t, k)| {
                let tr = &self.trs[t];
                let window = local_window(
                    &all_xs,
                    tr.center(),
                    tr.length(),
                    self.n_m,
                    self.config.candidates.window_cap,
                );
                let wx: Vec<Vec<f64>> =
                    window.iter().map(|&i| self.observations[i].unit.clone()).collect();
                let raw: Vec<f64> = window
                    .iter()
                    .map(|&i| {
                        let o = &self.observations[i];
                        if k < spec.num_objectives {
                            o.objectives[k]
                        } else {
                            o.constraints[k - spec.num_objectives]
                        }
                    })
                    .collect();
                // non-finite outcomes train at the worst finite value in the
                // window so the surrogate steers away without destroying the
                // target scale
                let worst = raw
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold(None, |acc: Option<f64>, &v| {
                        Some(match acc {
                            None => v,
                            Some(a) => {
                                if k < spec.num_objectives {
                                    a.min(v)
                                } else {
                                    a.max(v)
                                }
                            }
                        })
                    })
                    .unwrap_or(0.0);
                let wy: Vec<f64> =
                    raw.iter().map(|&v| if v.is_finite() { v } else { worst }).collect();
                let seed =
                    derive_key(self.config.run.seed, &[ns::FIT, iteration, t as u64, k as u64]);
                let opts = self.config.surrogate.fit_options(seed);
                let model = fit_gp_with(&wx, &wy, &opts)?;
                Ok((t, k, model))
            })
            .collect();
        let mut out: Vec<Vec<Option<GPModel>>> =
            (0..self.trs.len()).map(|_| (0..outcomes).map(|_| None).collect()).collect();
        for res in models {
            let (t, k, model) = res?;
            out[t][k] = Some(model);
        }
        Ok(out
            .into_iter()
            .map(|row| row.into_iter().map(|m| m.expect("model fitted")).collect())
            .collect())
    }

    fn base_points_for(&self, tr: &TrustRegion) -> Vec<Vec<f64>> {
        self.state
            .front_origins()
            .iter()
            .map(|&i| &self.observations[i].unit)
            .filter(|x| tr.contains(x))
            .cloned()
            .collect()
    }

    /// Applies streak updates, shrinking/termination, reinitialization, and
    /// center re-assignment after a completed batch (or asynchronous epoch).
    fn update_trust_regions(
        &mut self,
        iteration: u64,
        counted: &[bool],
        improved: &[bool],
    ) -> Result<()> {
        let (l_min, l_max, l_init) = (
            self.config.trust_region.l_min,
            self.config.trust_region.l_max,
            self.config.trust_region.l_init,
        );
        let mut modes = Vec::with_capacity(self.trs.len());
        for t in 0..self.trs.len() {
            let tr = &mut self.trs[t];
            if counted[t] {
                tr.record_batch_outcome(improved[t])?;
            }
            let from = tr.length();
            match tr.adjust_length(l_min, l_max) {
                LengthChange::Shrunk => self.record.events.push(TrEvent {
                    iteration,
                    tr_id: t,
                    kind: TrEventKind::Shrunk { from, to: tr.length() },
                }),
                LengthChange::Expanded => self.record.events.push(TrEvent {
                    iteration,
                    tr_id: t,
                    kind: TrEventKind::Expanded { from, to: tr.length() },
                }),
                LengthChange::Terminated => self.record.events.push(TrEvent {
                    iteration,
                    tr_id: t,
                    kind: TrEventKind::Terminated { length: tr.length() },
                }),
                LengthChange::None => {}
            }
            if !tr.is_active() {
                let center = tr.center().to_vec();
                tr.reinitialize(center, l_init);
                self.center_obs[t] = None;
                self.record.events.push(TrEvent {
                    iteration,
                    tr_id: t,
                    kind: TrEventKind::Reinitialized { length: l_init },
                });
                modes.push(CenterMode::Global);
            } else {
                modes.push(CenterMode::Within {
                    center: tr.center().to_vec(),
                    length: tr.length(),
                });
            }
        }
        self.assign_centers(&modes, iteration)
    }

    fn assign_centers(&mut self, modes: &[CenterMode], iteration: u64) -> Result<()> {
        let xs: Vec<Vec<f64>> = self.observations.iter().map(|o| o.unit.clone()).collect();
        let violations: Vec<f64> = self.observations.iter().map(|o| o.violation).collect();
        let choices = select_centers(&xs, &violations, &self.state, modes)?;
        for (t, choice) in choices.iter().enumerate() {
            self.trs[t].set_center(choice.x.clone());
            if self.center_obs[t] != Some(choice.observation) {
                self.center_obs[t] = Some(choice.observation);
                self.record.events.push(TrEvent {
                    iteration,
                    tr_id: t,
                    kind: TrEventKind::CenterMoved { observation: choice.observation },
                });
            }
        }
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn verify_invariants(&self) {
        assert!(self.trs.iter().all(|t| t.is_active()));
        let feasible: Vec<usize> =
            (0..self.observations.len()).filter(|&i| self.observations[i].feasible()).collect();
        let objs: Vec<Vec<f64>> =
            feasible.iter().map(|&i| self.observations[i].objectives.clone()).collect();
        let mut expect: Vec<usize> = crate::pareto::pareto_filter(&objs)
            .into_iter()
            .map(|k| feasible[k])
            .collect();
        expect.sort_unstable();
        let mut got = self.state.front_origins().to_vec();
        got.sort_unstable();
        assert_eq!(got, expect, "archive front diverged from nondominated filter");
    }

    #[cfg(not(debug_assertions))]
    fn verify_invariants(&self) {}
}

fn run_sync(problem: &dyn Problem, config: &RunConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let mut driver = Driver::new(problem, config);
    let (n0, nf, q) = (config.budget.n0, config.budget.nf, config.budget.q);
    let seed = config.run.seed;

    let outcome = (|| -> Result<()> {
        let eval_start = Instant::now();
        for raw in initial_design(problem, n0, seed) {
            let obs = evaluate_raw(problem, driver.spec, raw)?;
            driver.ingest(obs, 0, -1)?;
        }
        driver.record.timings.evaluation_secs += eval_start.elapsed().as_secs_f64();
        driver.push_trace();
        let modes = vec![CenterMode::Global; driver.trs.len()];
        driver.assign_centers(&modes, 0)?;

        let d = driver.spec.dim;
        let mut iteration: u64 = 0;
        while driver.observations.len() < nf {
            iteration += 1;
            let q_eff = q.min(nf - driver.observations.len());
            let evals = driver.observations.len();
            let p_n = if nf - n0 >= 2 {
                perturb_prob(evals, &PerturbSchedule::new(n0, nf, d)?)?
            } else {
                (20.0 / d as f64).min(1.0)
            };

            let fit_start = Instant::now();
            let models = driver.fit_models(iteration)?;
            driver.record.timings.fit_secs += fit_start.elapsed().as_secs_f64();

            let select_start = Instant::now();
            let inputs: Vec<TrBatchInput> = driver
                .trs
                .iter()
                .zip(&models)
                .map(|(tr, row)| TrBatchInput {
                    tr,
                    objective_models: &row[..driver.spec.num_objectives],
                    constraint_models: &row[driver.spec.num_objectives..],
                    base_points: driver.base_points_for(tr),
                })
                .collect();
            let ctx = BatchContext {
                state: &driver.state,
                q: q_eff,
                candidate_count: config.candidate_count(),
                perturb_prob: p_n,
                sampler: config.sampler,
                seed,
                iteration,
            };
            let (selected, log) = select_batch(&inputs, Vec::new(), &ctx)?;
            drop(inputs);
            driver.record.selections.extend(log);
            driver.record.timings.selection_secs += select_start.elapsed().as_secs_f64();

            let eval_start = Instant::now();
            let mut counted = vec![false; driver.trs.len()];
            let mut improved = vec![false; driver.trs.len()];
            for p in &selected {
                let raw = driver.spec.denormalize(&p.x);
                let obs = evaluate_raw(problem, driver.spec, raw)?;
                counted[p.source_tr] = true;
                if driver.ingest(obs, iteration, p.source_tr as i64)? {
                    improved[p.source_tr] = true;
                }
            }
            driver.record.timings.evaluation_secs += eval_start.elapsed().as_secs_f64();

            driver.update_trust_regions(iteration, &counted, &improved)?;
            driver.push_trace();
            driver.verify_invariants();
        }
        Ok(())
    })();

    match outcome {
        Ok(()) => {}
        Err(Error::Evaluation(msg)) => {
            driver.record.incomplete = true;
            driver.record.abort_reason = Some(msg);
        }
        Err(e) => return Err(e),
    }
    let state = driver.state;
    let mut record = driver.record;
    finalize_front(&mut record, &state);
    record.timings.total_secs = start.elapsed().as_secs_f64();
    Ok(record)
}

struct Job {
    id: u64,
    iteration: u64,
    tr_id: i64,
    raw: Vec<f64>,
}

struct Done {
    job: Job,
    result: Result<(Vec<f64>, Vec<f64>)>,
}

/// Asynchronous evaluation: a pool of workers evaluates points while the
/// coordinator selects a new candidate whenever a worker is idle,
/// conditioning on every point still in flight through its sampled values.
/// Trust regions are updated after every `q` received observations.
fn run_async(problem: &dyn Problem, config: &RunConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let workers = config.run.async_workers;
    let (n0, nf, q) = (config.budget.n0, config.budget.nf, config.budget.q);
    let seed = config.run.seed;
    let mut driver = Driver::new(problem, config);

    let (job_tx, job_rx) = mpsc::channel::<Job>();
    let (done_tx, done_rx) = mpsc::channel::<Done>();
    let job_rx = Mutex::new(job_rx);

    let outcome = std::thread::scope(|scope| -> Result<()> {
        // owned by this closure: dropping it on any exit path closes the
        // queue and lets the workers join
        let job_tx = job_tx;
        for _ in 0..workers {
            let done_tx = done_tx.clone();
            let job_rx = &job_rx;
            scope.spawn(move || loop {
                let job = match job_rx.lock().expect("job queue").recv() {
                    Ok(job) => job,
                    Err(_) => return,
                };
                let result = problem.evaluate(&job.raw);
                if done_tx.send(Done { job, result }).is_err() {
                    return;
                }
            });
        }

        let mut dispatched: u64 = 0;
        let mut in_flight = 0usize;
        let mut received = 0usize;
        let mut dispatch = |raw: Vec<f64>, iteration: u64, tr_id: i64,
                            dispatched: &mut u64,
                            in_flight: &mut usize| {
            let id = *dispatched;
            *dispatched += 1;
            *in_flight += 1;
            job_tx.send(Job { id, iteration, tr_id, raw }).expect("workers alive");
        };

        for raw in initial_design(problem, n0, seed) {
            dispatch(raw, 0, -1, &mut dispatched, &mut in_flight);
        }
        while received < n0 {
            let done = done_rx.recv().expect("worker reply");
            in_flight -= 1;
            received += 1;
            let (objectives, constraints) = done.result?;
            let raw = done.job.raw;
            let finite = objectives.iter().chain(&constraints).all(|v| v.is_finite());
            let violation =
                if finite { total_violation(&constraints) } else { NONFINITE_VIOLATION };
            let unit = driver.spec.normalize(&raw);
            driver.ingest(Obs { raw, unit, objectives, constraints, violation }, 0, -1)?;
        }
        driver.push_trace();
        let modes = vec![CenterMode::Global; driver.trs.len()];
        driver.assign_centers(&modes, 0)?;

        let d = driver.spec.dim;
        let mut epoch: u64 = 0;
        let mut arrivals_in_epoch = 0usize;
        let mut counted = vec![false; driver.trs.len()];
        let mut improved = vec![false; driver.trs.len()];
        let mut pending: Vec<(u64, PendingPoint)> = Vec::new();
        let mut models: Option<Vec<Vec<GPModel>>> = None;

        while received < nf {
            while (dispatched as usize) < nf && in_flight < workers {
                // refresh models so every received observation is visible to
                // the very next selection
                if models.is_none() {
                    models = Some(driver.fit_models(epoch + 1)?);
                }
                let model_rows = models.as_ref().expect("models fitted");
                let inputs: Vec<TrBatchInput> = driver
                    .trs
                    .iter()
                    .zip(model_rows)
                    .map(|(tr, row)| TrBatchInput {
                        tr,
                        objective_models: &row[..driver.spec.num_objectives],
                        constraint_models: &row[driver.spec.num_objectives..],
                        base_points: driver.base_points_for(tr),
                    })
                    .collect();
                let evals = driver.observations.len();
                let p_n = if nf - n0 >= 2 {
                    perturb_prob(evals, &PerturbSchedule::new(n0, nf, d)?)?
                } else {
                    (20.0 / d as f64).min(1.0)
                };
                let ctx = BatchContext {
                    state: &driver.state,
                    q: 1,
                    candidate_count: config.candidate_count(),
                    perturb_prob: p_n,
                    sampler: config.sampler,
                    seed,
                    iteration: dispatched,
                };
                let current: Vec<PendingPoint> =
                    pending.iter().map(|(_, p)| p.clone()).collect();
                let (mut selected, log) = select_batch(&inputs, current, &ctx)?;
                drop(inputs);
                let point = selected.pop().expect("one slot");
                driver.record.selections.extend(log);
                let raw = driver.spec.denormalize(&point.x);
                pending.push((dispatched, point.clone()));
                dispatch(raw, epoch + 1, point.source_tr as i64, &mut dispatched, &mut in_flight);
            }

            let done = done_rx.recv().expect("worker reply");
            in_flight -= 1;
            received += 1;
            pending.retain(|(id, _)| *id != done.job.id);
            let (objectives, constraints) = done.result?;
            let raw = done.job.raw;
            let finite = objectives.iter().chain(&constraints).all(|v| v.is_finite());
            let violation =
                if finite { total_violation(&constraints) } else { NONFINITE_VIOLATION };
            let unit = driver.spec.normalize(&raw);
            let obs = Obs { raw, unit, objectives, constraints, violation };
            let tr_id = done.job.tr_id;
            if driver.ingest(obs, done.job.iteration, tr_id)? && tr_id >= 0 {
                improved[tr_id as usize] = true;
            }
            if tr_id >= 0 {
                counted[tr_id as usize] = true;
            }
            models = None;
            arrivals_in_epoch += 1;
            if arrivals_in_epoch >= q {
                epoch += 1;
                driver.update_trust_regions(epoch, &counted, &improved)?;
                driver.push_trace();
                counted.iter_mut().for_each(|c| *c = false);
                improved.iter_mut().for_each(|c| *c = false);
                arrivals_in_epoch = 0;
            }
        }
        if arrivals_in_epoch > 0 {
            epoch += 1;
            driver.update_trust_regions(epoch, &counted, &improved)?;
            driver.push_trace();
        }
        Ok(())
    });

    match outcome {
        Ok(()) => {}
        Err(Error::Evaluation(msg)) => {
            driver.record.incomplete = true;
            driver.record.abort_reason = Some(msg);
        }
        Err(e) => return Err(e),
    }
    let state = driver.state;
    let mut record = driver.record;
    finalize_front(&mut record, &state);
    record.timings.total_secs = start.elapsed().as_secs_f64();
    Ok(record)
}
