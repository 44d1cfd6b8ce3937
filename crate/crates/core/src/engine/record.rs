//! Run records: the full trace of one optimization run and its plain-text
//! serialization.
//!
//! A record saves as two canonical files plus one informational file:
//!
//! - `observations.txt`: one observation per line
//!   (`iteration tr_id x... objectives... constraints...`), floats printed
//!   in shortest round-trip form so a load/save cycle is byte-identical.
//! - `summary.json`: config echo, problem shape, hypervolume trace,
//!   trust-region events, selection log, and the final front.
//! - `timings.json`: wall-clock per phase; excluded from the canonical
//!   record because identical reruns should produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::SelectionLogEntry;
use crate::pareto::{pareto_filter, ParetoState};
use crate::problems::ProblemSpec;
use crate::{Error, Result};

use super::config::RunConfig;

/// One evaluated point. `tr_id` is -1 for initial-design and baseline
/// points. Coordinates are in the raw problem domain; objectives use the
/// maximization convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub iteration: u64,
    pub tr_id: i64,
    pub x: Vec<f64>,
    pub objectives: Vec<f64>,
    pub constraints: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvPoint {
    pub evaluations: usize,
    pub hypervolume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrEventKind {
    Shrunk { from: f64, to: f64 },
    Expanded { from: f64, to: f64 },
    Terminated { length: f64 },
    Reinitialized { length: f64 },
    CenterMoved { observation: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrEvent {
    pub iteration: u64,
    pub tr_id: usize,
    #[serde(flatten)]
    pub kind: TrEventKind,
}

/// Problem shape echoed into the record so files can be parsed and HV
/// recomputed without re-instantiating the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub dim: usize,
    pub num_objectives: usize,
    pub num_constraints: usize,
    pub bounds: Vec<(f64, f64)>,
    pub ref_point: Vec<f64>,
}

impl From<&ProblemSpec> for ProblemShape {
    fn from(spec: &ProblemSpec) -> Self {
        Self {
            dim: spec.dim,
            num_objectives: spec.num_objectives,
            num_constraints: spec.num_constraints,
            bounds: spec.bounds.clone(),
            ref_point: spec.ref_point.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub observation: usize,
    pub x: Vec<f64>,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub fit_secs: f64,
    pub selection_secs: f64,
    pub evaluation_secs: f64,
    pub total_secs: f64,
}

/// Everything produced by one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub shape: ProblemShape,
    /// Which optimizer produced this record (`morbo` or `sobol`).
    pub method: String,
    pub hv_trace: Vec<HvPoint>,
    pub events: Vec<TrEvent>,
    pub selections: Vec<SelectionLogEntry>,
    pub final_front: Vec<FrontRow>,
    pub incomplete: bool,
    pub abort_reason: Option<String>,
    #[serde(skip)]
    pub observations: Vec<ObservationRecord>,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

impl RunRecord {
    pub fn new(config: RunConfig, spec: &ProblemSpec) -> Self {
        Self {
            config,
            shape: spec.into(),
            method: "morbo".into(),
            hv_trace: Vec::new(),
            events: Vec::new(),
            selections: Vec::new(),
            final_front: Vec::new(),
            incomplete: false,
            abort_reason: None,
            observations: Vec::new(),
            timings: PhaseTimings::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.run.seed
    }

    pub fn final_hypervolume(&self) -> f64 {
        self.hv_trace.last().map_or(0.0, |p| p.hypervolume)
    }

    /// The (evaluations, hypervolume) sequence, one entry per batch
    /// boundary.
    pub fn hv_trace(&self) -> &[HvPoint] {
        &self.hv_trace
    }

    /// Whether an observation counts as feasible for front membership.
    pub fn is_feasible(obs: &ObservationRecord) -> bool {
        obs.objectives.iter().all(|v| v.is_finite())
            && obs.constraints.iter().all(|&c| c.is_finite() && c <= 0.0)
    }

    /// Recomputes the hypervolume trace from the stored observations,
    /// independent of the values cached in `hv_trace`.
    pub fn recompute_hv_trace(&self) -> Result<Vec<HvPoint>> {
        let mut state = ParetoState::new(self.shape.ref_point.clone());
        let mut out = Vec::new();
        let mut last_iter = None;
        for (i, obs) in self.observations.iter().enumerate() {
            if last_iter.is_some() && last_iter != Some(obs.iteration) {
                out.push(HvPoint { evaluations: i, hypervolume: state.hypervolume() });
            }
            last_iter = Some(obs.iteration);
            if Self::is_feasible(obs) {
                state.insert(obs.objectives.clone(), i)?;
            }
        }
        out.push(HvPoint {
            evaluations: self.observations.len(),
            hypervolume: state.hypervolume(),
        });
        Ok(out)
    }

    /// Final front recomputed from the stored observations: indices of
    /// feasible nondominated points.
    pub fn recompute_front(&self) -> Vec<usize> {
        let feasible: Vec<usize> = (0..self.observations.len())
            .filter(|&i| Self::is_feasible(&self.observations[i]))
            .collect();
        let objs: Vec<Vec<f64>> =
            feasible.iter().map(|&i| self.observations[i].objectives.clone()).collect();
        pareto_filter(&objs).into_iter().map(|k| feasible[k]).collect()
    }

    fn observations_text(&self) -> String {
        let mut text = String::with_capacity(self.observations.len() * 64);
        text.push_str("# iteration tr_id x[dim] objectives[m] constraints[c]\n");
        for obs in &self.observations {
            let _ = write!(text, "{} {}", obs.iteration, obs.tr_id);
            for v in obs.x.iter().chain(&obs.objectives).chain(&obs.constraints) {
                let _ = write!(text, " {v}");
            }
            text.push('\n');
        }
        text
    }

    /// Writes `observations.txt`, `summary.json`, and `timings.json` into
    /// `dir` (created if needed).
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("observations.txt"), self.observations_text())?;
        let summary = serde_json::to_string_pretty(self)
            .map_err(|e| Error::RecordFormat(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        let timings = serde_json::to_string_pretty(&self.timings)
            .map_err(|e| Error::RecordFormat(e.to_string()))?;
        std::fs::write(dir.join("timings.json"), timings + "\n")?;
        Ok(())
    }

    /// Loads a record saved by [`RunRecord::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let summary = std::fs::read_to_string(dir.join("summary.json"))?;
        let mut record: RunRecord = serde_json::from_str(&summary)
            .map_err(|e| Error::RecordFormat(format!("summary.json: {e}")))?;
        let text = std::fs::read_to_string(dir.join("observations.txt"))?;
        let (d, m, c) =
            (record.shape.dim, record.shape.num_objectives, record.shape.num_constraints);
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_ascii_whitespace();
            let parse_err =
                |what: &str| Error::RecordFormat(format!("line {}: {what}", lineno + 1));
            let iteration = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("missing iteration"))?;
            let tr_id = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("missing tr_id"))?;
            let values: Vec<f64> = tokens
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(&format!("bad float: {e}")))?;
            if values.len() != d + m + c {
                return Err(parse_err(&format!(
                    "expected {} values, found {}",
                    d + m + c,
                    values.len()
                )));
            }
            record.observations.push(ObservationRecord {
                iteration,
                tr_id,
                x: values[..d].to_vec(),
                objectives: values[d..d + m].to_vec(),
                constraints: values[d + m..].to_vec(),
            });
        }
        Ok(record)
    }
}
