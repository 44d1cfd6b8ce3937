//! Trust-region lifecycle, hypervolume-contribution center selection, and
//! local data windows for model fitting.
//!
//! A trust region is an axis-aligned box `center ± L/2` clipped to the unit
//! hypercube. Success and failure counters track consecutive batches that
//! did or did not improve the global hypervolume; on enough consecutive
//! failures the edge length halves, and once it falls below the minimum the
//! region terminates and is reinitialized by the engine.

use serde::{Deserialize, Serialize};

use crate::pareto::{hv_contributions, ParetoState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrStatus {
    Active,
    Terminated,
}

/// Defaults for the trust-region state machine. `tau_fail` of `None` derives
/// `max(10, ceil(d/3))` from the input dimension; `tau_succ` of `None` means
/// an infinite success tolerance (the region never expands).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    pub l_init: f64,
    pub l_max: f64,
    pub l_min: f64,
    pub n_tr: usize,
    pub tau_succ: Option<u32>,
    pub tau_fail: Option<u32>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self { l_init: 0.8, l_max: 1.6, l_min: 0.01, n_tr: 5, tau_succ: None, tau_fail: None }
    }
}

impl TrustRegionConfig {
    pub fn tau_fail_for(&self, d: usize) -> u32 {
        self.tau_fail.unwrap_or_else(|| 10.max((d as u32).div_ceil(3)))
    }
}

/// One trust region: center, edge length, streak counters, lifecycle status.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustRegion {
    id: usize,
    center: Vec<f64>,
    length: f64,
    success_count: u32,
    failure_count: u32,
    tau_succ: Option<u32>,
    tau_fail: u32,
    status: TrStatus,
}

/// What `adjust_length` did, for event logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthChange {
    None,
    Expanded,
    Shrunk,
    Terminated,
}

impl TrustRegion {
    pub fn new(id: usize, center: Vec<f64>, length: f64) -> Self {
        Self {
            id,
            center,
            length,
            success_count: 0,
            failure_count: 0,
            tau_succ: None,
            tau_fail: 10,
            status: TrStatus::Active,
        }
    }

    pub fn with_tolerances(mut self, tau_succ: Option<u32>, tau_fail: u32) -> Self {
        self.tau_succ = tau_succ;
        self.tau_fail = tau_fail;
        self
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn status(&self) -> TrStatus {
        self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == TrStatus::Active
    }

    pub fn success_count(&self) -> u32 {
        self.success_count
    }

    pub fn failure_count(&self) -> u32 {
        self.failure_count
    }

    /// Axis-aligned box `center ± L/2` clipped to the unit hypercube.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let half = self.length / 2.0;
        let lo = self.center.iter().map(|&c| (c - half).max(0.0)).collect();
        let hi = self.center.iter().map(|&c| (c + half).min(1.0)).collect();
        (lo, hi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let half = self.length / 2.0;
        x.iter()
            .zip(&self.center)
            .all(|(&xi, &ci)| xi >= (ci - half).max(0.0) - 1e-12 && xi <= (ci + half).min(1.0) + 1e-12)
    }

    /// Moves the center (the edge length is unchanged).
    pub fn set_center(&mut self, center: Vec<f64>) {
        self.center = center;
    }

    /// Records whether the latest batch of points from this region improved
    /// the global hypervolume. Streaks are consecutive: a success clears the
    /// failure counter and vice versa.
    pub fn record_batch_outcome(&mut self, improved: bool) -> Result<()> {
        if self.status != TrStatus::Active {
            return Err(Error::Lifecycle(format!(
                "trust region {} is terminated",
                self.id
            )));
        }
        if improved {
            self.success_count += 1;
            self.failure_count = 0;
        } else {
            self.failure_count += 1;
            self.success_count = 0;
        }
        Ok(())
    }

    /// Applies the streak thresholds: double the edge length (capped) after
    /// `tau_succ` successes, halve it after `tau_fail` failures, terminate
    /// when it falls below the minimum. Counters reset on any length change.
    pub fn adjust_length(&mut self, l_min: f64, l_max: f64) -> LengthChange {
        if self.status != TrStatus::Active {
            return LengthChange::None;
        }
        let mut change = LengthChange::None;
        if let Some(tau) = self.tau_succ {
            if self.success_count >= tau {
                self.length = (2.0 * self.length).min(l_max);
                self.success_count = 0;
                self.failure_count = 0;
                change = LengthChange::Expanded;
            }
        }
        if self.failure_count >= self.tau_fail {
            self.length /= 2.0;
            self.success_count = 0;
            self.failure_count = 0;
            change = LengthChange::Shrunk;
        }
        if self.length < l_min {
            self.status = TrStatus::Terminated;
            change = LengthChange::Terminated;
        }
        change
    }

    /// Reactivates a terminated region at the initial edge length with a new
    /// center and cleared counters.
    pub fn reinitialize(&mut self, center: Vec<f64>, l_init: f64) {
        self.center = center;
        self.length = l_init;
        self.success_count = 0;
        self.failure_count = 0;
        self.status = TrStatus::Active;
    }
}

/// How a trust region's center is chosen at the next assignment.
#[derive(Debug, Clone)]
pub enum CenterMode {
    /// Anywhere in the domain (initialization and reinitialized regions).
    Global,
    /// Prefer points inside the given box; fall back to its 2L window, then
    /// globally.
    Within { center: Vec<f64>, length: f64 },
}

/// A chosen center: the observation index and its location.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterChoice {
    pub observation: usize,
    pub x: Vec<f64>,
}

/// Assigns one center per trust region, sequentially in the given order.
///
/// Feasible Pareto points are ranked by hypervolume contribution (ties by
/// earliest observation index) and handed out greedily; a point chosen for
/// one region becomes unavailable to later ones. If no feasible point
/// exists, centers fall back to the observations with the smallest total
/// constraint violation. When eligible points run out, remaining regions
/// reuse the best already-assigned point.
pub fn select_centers(
    xs: &[Vec<f64>],
    violations: &[f64],
    state: &ParetoState,
    modes: &[CenterMode],
) -> Result<Vec<CenterChoice>> {
    if xs.is_empty() {
        return Err(Error::Precondition("center selection requires at least one observation".into()));
    }
    if xs.len() != violations.len() {
        return Err(Error::InvalidArgument(
            "observations and violations must have equal lengths".into(),
        ));
    }

    // Ranked pool: feasible Pareto points by HVC, else all points by violation.
    let mut ranked: Vec<usize> = if !state.is_empty() {
        let contributions = hv_contributions(state.front_objectives(), state.ref_point())?;
        let mut order: Vec<usize> = (0..contributions.len()).collect();
        order.sort_by(|&a, &b| {
            contributions[b]
                .partial_cmp(&contributions[a])
                .unwrap()
                .then(state.front_origins()[a].cmp(&state.front_origins()[b]))
        });
        order.into_iter().map(|i| state.front_origins()[i]).collect()
    } else {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| violations[a].partial_cmp(&violations[b]).unwrap().then(a.cmp(&b)));
        order
    };

    let mut assigned: Vec<CenterChoice> = Vec::with_capacity(modes.len());
    for mode in modes {
        let position = match mode {
            CenterMode::Global => (!ranked.is_empty()).then_some(0),
            CenterMode::Within { center, length } => {
                let in_box = |i: &usize| {
                    let half = length / 2.0;
                    xs[*i]
                        .iter()
                        .zip(center)
                        .all(|(&xi, &ci)| xi >= (ci - half).max(0.0) && xi <= (ci + half).min(1.0))
                };
                let in_window = |i: &usize| {
                    xs[*i].iter().zip(center).all(|(&xi, &ci)| (xi - ci).abs() <= *length)
                };
                ranked
                    .iter()
                    .position(in_box)
                    .or_else(|| ranked.iter().position(in_window))
                    .or(if ranked.is_empty() { None } else { Some(0) })
            }
        };
        match position {
            Some(pos) => {
                let obs = ranked.remove(pos);
                assigned.push(CenterChoice { observation: obs, x: xs[obs].clone() });
            }
            None => {
                // Pool exhausted: reuse the best already-assigned point.
                let reuse = assigned
                    .first()
                    .cloned()
                    .expect("ranked pool nonempty for the first region");
                assigned.push(reuse);
            }
        }
    }
    Ok(assigned)
}

/// Observations used to fit a region's local models: the points inside the
/// hypercube of edge `2L` around the center. If fewer than `n_m` fall
/// inside, the `n_m` points nearest the center (by Euclidean distance) are
/// used instead; if more than `n_cap`, only the `n_cap` nearest are kept.
/// Distance ties break by input index. Returned indices are ascending.
pub fn local_window(
    points: &[Vec<f64>],
    center: &[f64],
    l: f64,
    n_m: usize,
    n_cap: Option<usize>,
) -> Vec<usize> {
    let inside: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].iter().zip(center).all(|(&x, &c)| (x - c).abs() <= l))
        .collect();

    let nearest = |k: usize| -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = (0..points.len())
            .map(|i| {
                let d2: f64 =
                    points[i].iter().zip(center).map(|(&x, &c)| (x - c) * (x - c)).sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut idx: Vec<usize> = order.into_iter().take(k).map(|(_, i)| i).collect();
        idx.sort_unstable();
        idx
    };

    let mut window = if inside.len() >= n_m { inside } else { nearest(n_m) };
    if let Some(cap) = n_cap {
        if window.len() > cap {
            let mut order: Vec<(f64, usize)> = window
                .iter()
                .map(|&i| {
                    let d2: f64 =
                        points[i].iter().zip(center).map(|(&x, &c)| (x - c) * (x - c)).sum();
                    (d2, i)
                })
                .collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            window = order.into_iter().take(cap).map(|(_, i)| i).collect();
            window.sort_unstable();
        }
    }
    window
}
