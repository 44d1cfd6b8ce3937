//! Pareto domination, nondominated filtering, exact hypervolume, per-point
//! hypervolume contributions, and hypervolume improvement.
//!
//! Everything here uses the maximization convention: `a` dominates `b` when
//! `a >= b` componentwise with at least one strict improvement, and the
//! hypervolume of a front is the measure of the region dominated by the
//! front and bounded below by the reference point.

use crate::{Error, Result};

/// True iff `a` Pareto-dominates `b` (maximization).
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "objective vectors of different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dom(a, b))
}

#[inline]
fn dom(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strict = false;
    for (&ai, &bi) in a.iter().zip(b) {
        if ai < bi {
            return false;
        }
        if ai > bi {
            strict = true;
        }
    }
    strict
}

/// Indices of the nondominated points. Duplicates are all retained: exactly
/// equal vectors do not dominate each other.
pub fn pareto_filter(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut keep = Vec::new();
    'outer: for i in 0..n {
        for j in 0..n {
            if j != i && dom(&points[j], &points[i]) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// Exact hypervolume of `front` with respect to `ref_point`.
///
/// Supports 2, 3, and 4 objectives: a dimension sweep for two objectives and
/// recursive exclusive-volume slicing above that. Points that do not exceed
/// the reference point in every coordinate contribute nothing.
pub fn hypervolume(front: &[Vec<f64>], ref_point: &[f64]) -> Result<f64> {
    let m = ref_point.len();
    if !(2..=4).contains(&m) {
        return Err(Error::Unsupported(format!(
            "exact hypervolume supports 2-4 objectives, got {m}"
        )));
    }
    for p in front {
        if p.len() != m {
            return Err(Error::InvalidArgument(format!(
                "front point has {} objectives, reference point has {m}",
                p.len()
            )));
        }
    }
    let mut pts: Vec<Vec<f64>> = front
        .iter()
        .filter(|p| p.iter().zip(ref_point).all(|(&v, &r)| v > r))
        .cloned()
        .collect();
    if pts.is_empty() {
        return Ok(0.0);
    }
    // Canonical order so the result does not depend on input order.
    pts.sort_by(|a, b| cmp_lex_desc(a, b));
    pts.dedup();
    Ok(if m == 2 {
        hv2(&pts, ref_point)
    } else {
        hv_rec(pts, ref_point)
    })
}

fn cmp_lex_desc(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Dimension sweep for two objectives; `pts` sorted descending by the first.
fn hv2(pts: &[Vec<f64>], r: &[f64]) -> f64 {
    let mut hv = 0.0;
    let mut best_f2 = r[1];
    for p in pts {
        if p[1] > best_f2 {
            hv += (p[0] - r[0]) * (p[1] - best_f2);
            best_f2 = p[1];
        }
    }
    hv
}

/// Exclusive-volume recursion for three and four objectives.
fn hv_rec(pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..pts.len() {
        total += exclusive(&pts[i], &pts[i + 1..], r);
    }
    total
}

/// Volume dominated by `p` alone and by none of `rest`.
fn exclusive(p: &[f64], rest: &[Vec<f64>], r: &[f64]) -> f64 {
    let own: f64 = p.iter().zip(r).map(|(&v, &rv)| v - rv).product();
    if rest.is_empty() {
        return own;
    }
    // Clip the others into p's box; their union there is the overlap.
    let mut limited: Vec<Vec<f64>> = rest
        .iter()
        .map(|q| q.iter().zip(p).map(|(&qi, &pi)| qi.min(pi)).collect())
        .collect();
    let keep = pareto_filter(&limited);
    limited = keep.into_iter().map(|i| std::mem::take(&mut limited[i])).collect();
    limited.sort_by(|a, b| cmp_lex_desc(a, b));
    limited.dedup();
    own - hv_rec(limited, r)
}

/// Per-point exclusive hypervolume contributions of a nondominated front.
pub fn hv_contributions(front: &[Vec<f64>], ref_point: &[f64]) -> Result<Vec<f64>> {
    let keep = pareto_filter(front);
    if keep.len() != front.len() {
        return Err(Error::InvalidArgument(
            "hv_contributions requires a nondominated front".into(),
        ));
    }
    let total = hypervolume(front, ref_point)?;
    let mut out = Vec::with_capacity(front.len());
    for i in 0..front.len() {
        let mut rest: Vec<Vec<f64>> = Vec::with_capacity(front.len() - 1);
        rest.extend(front.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()));
        let without = hypervolume(&rest, ref_point)?;
        out.push((total - without).max(0.0));
    }
    Ok(out)
}

/// Hypervolume gained by adding `new_points` to the state's front.
pub fn hvi(new_points: &[Vec<f64>], state: &ParetoState) -> Result<f64> {
    let front: Vec<Vec<f64>> = state.front_objectives().to_vec();
    let base = hypervolume(&front, &state.ref_point)?;
    let mut all = front;
    all.extend(new_points.iter().cloned());
    let joint = hypervolume(&all, &state.ref_point)?;
    Ok((joint - base).max(0.0))
}

/// Global nondominated archive with its reference point and cached
/// hypervolume.
#[derive(Debug, Clone)]
pub struct ParetoState {
    ref_point: Vec<f64>,
    objectives: Vec<Vec<f64>>,
    origins: Vec<usize>,
    hv: f64,
}

impl ParetoState {
    pub fn new(ref_point: Vec<f64>) -> Self {
        Self { ref_point, objectives: Vec::new(), origins: Vec::new(), hv: 0.0 }
    }

    pub fn ref_point(&self) -> &[f64] {
        &self.ref_point
    }

    pub fn front_objectives(&self) -> &[Vec<f64>] {
        &self.objectives
    }

    /// Observation indices of the current front members, aligned with
    /// [`Self::front_objectives`].
    pub fn front_origins(&self) -> &[usize] {
        &self.origins
    }

    pub fn hypervolume(&self) -> f64 {
        self.hv
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// Inserts the objective vector of a (feasible) observation. Dominated
    /// incomers are dropped; members dominated by the incomer are evicted;
    /// exact duplicates of a member are retained and contribute zero.
    /// Returns true if the cached hypervolume strictly increased.
    pub fn insert(&mut self, objectives: Vec<f64>, origin: usize) -> Result<bool> {
        if objectives.len() != self.ref_point.len() {
            return Err(Error::InvalidArgument(format!(
                "objective vector length {} does not match reference point length {}",
                objectives.len(),
                self.ref_point.len()
            )));
        }
        if objectives.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite objective value".into()));
        }
        if self.objectives.iter().any(|p| dom(p, &objectives)) {
            return Ok(false);
        }
        let mut keep_obj = Vec::with_capacity(self.objectives.len() + 1);
        let mut keep_org = Vec::with_capacity(self.origins.len() + 1);
        for (p, &o) in self.objectives.iter().zip(&self.origins) {
            if !dom(&objectives, p) {
                keep_obj.push(p.clone());
                keep_org.push(o);
            }
        }
        keep_obj.push(objectives);
        keep_org.push(origin);
        self.objectives = keep_obj;
        self.origins = keep_org;
        let before = self.hv;
        self.hv = hypervolume(&self.objectives, &self.ref_point)?;
        Ok(self.hv > before)
    }
}
