//! Discrete candidate generation inside a trust region.
//!
//! Candidates are built by perturbing Pareto-optimal base points: each
//! dimension is independently replaced, with a probability that decays over
//! the course of the run, by a quasi-random value mapped into the trust
//! region's box. The quasi-random source is a Sobol sequence (Joe-Kuo
//! direction numbers) with hash-based Owen scrambling, so every stream is
//! deterministic given its seed yet decorrelated from the others.

use rand::Rng;
use sobol::params::JoeKuoD6;
use sobol::Sobol;
use std::sync::OnceLock;

use crate::rng::{self, ns};
use crate::trust_region::TrustRegion;
use crate::{Error, Result};

/// Decaying perturbation-probability schedule.
///
/// With `n0` initial points, a total budget of `nf`, and `b = nf - n0`, the
/// probability of perturbing a dimension after `n` evaluations is
/// `p0 * (1 - 0.5 * ln(n') / ln(b))` where `n' = clamp(n - n0, 1, b)` and
/// `p0 = min(20/d, 1)`. It starts at `p0` and decays to `p0/2` at the end of
/// the budget.
#[derive(Debug, Clone, Copy)]
pub struct PerturbSchedule {
    pub n0: usize,
    pub nf: usize,
    pub d: usize,
}

impl PerturbSchedule {
    pub fn new(n0: usize, nf: usize, d: usize) -> Result<Self> {
        if n0 < 1 || nf <= n0 || d < 1 {
            return Err(Error::InvalidConfig(format!(
                "perturbation schedule requires nf > n0 >= 1 and d >= 1, got n0={n0} nf={nf} d={d}"
            )));
        }
        Ok(Self { n0, nf, d })
    }

    pub fn p0(&self) -> f64 {
        (20.0 / self.d as f64).min(1.0)
    }

    pub fn b(&self) -> usize {
        self.nf - self.n0
    }
}

/// Perturbation probability after `n` total evaluations.
pub fn perturb_prob(n: usize, sched: &PerturbSchedule) -> Result<f64> {
    let b = sched.b();
    if b < 2 {
        return Err(Error::InvalidConfig(format!(
            "schedule needs a budget of at least 2 beyond the initial design, got b={b}"
        )));
    }
    let n_prime = n.saturating_sub(sched.n0).clamp(1, b);
    Ok(sched.p0() * (1.0 - 0.5 * (n_prime as f64).ln() / (b as f64).ln()))
}

fn joe_kuo_standard() -> &'static JoeKuoD6 {
    static PARAMS: OnceLock<JoeKuoD6> = OnceLock::new();
    PARAMS.get_or_init(JoeKuoD6::standard)
}

fn joe_kuo_extended() -> &'static JoeKuoD6 {
    static PARAMS: OnceLock<JoeKuoD6> = OnceLock::new();
    PARAMS.get_or_init(JoeKuoD6::extended)
}

// Hash-based Owen scrambling (Burley-style): permute the binary digits of a
// Sobol coordinate so that each digit flip depends on the more significant
// digits, implemented by hashing the bit-reversed value.
#[inline]
fn lk_hash(mut x: u32, seed: u32) -> u32 {
    x ^= x.wrapping_mul(0x3d20_adea);
    x = x.wrapping_add(seed);
    x = x.wrapping_mul((seed >> 16) | 1);
    x ^= x.wrapping_mul(0x0552_6c56);
    x ^= x.wrapping_mul(0x53a2_2864);
    x
}

#[inline]
fn owen_scramble(x: u32, seed: u32) -> u32 {
    lk_hash(x.reverse_bits(), seed).reverse_bits()
}

/// First `n` points of an Owen-scrambled Sobol sequence in `[0,1)^d`,
/// deterministic per seed.
pub fn sobol(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 0 {
        return Vec::new();
    }
    assert!(d >= 1, "sobol requires d >= 1");
    let params: &JoeKuoD6 =
        if d < 1000 { joe_kuo_standard() } else { joe_kuo_extended() };
    let raw = Sobol::<u32>::new(d, params);
    // One scramble key per dimension, derived from the stream seed.
    let keys: Vec<u32> = (0..d)
        .map(|j| (rng::derive_key(seed, &[ns::CANDIDATES, j as u64]) >> 32) as u32)
        .collect();
    raw.take(n)
        .map(|point| {
            point
                .iter()
                .zip(&keys)
                .map(|(&v, &k)| owen_scramble(v, k) as f64 / 4_294_967_296.0)
                .collect()
        })
        .collect()
}

/// A discrete candidate set; every row lies inside the generating trust
/// region's box intersected with the unit hypercube.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
}

/// Builds `r` candidates inside `tr` by perturbing uniformly chosen base
/// points. Each dimension is replaced with probability `p` by a scrambled
/// Sobol value mapped into the trust-region box; at least one dimension is
/// always perturbed.
pub fn gen_candidates(
    tr: &TrustRegion,
    base_points: &[Vec<f64>],
    r: usize,
    p: f64,
    seed: u64,
) -> Result<CandidateSet> {
    if r < 1 {
        return Err(Error::InvalidArgument("candidate count must be >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation probability must be in (0, 1], got {p}"
        )));
    }
    let d = tr.center().len();
    let (lo, hi) = tr.bounds();
    let fallback = [tr.center().to_vec()];
    let bases: &[Vec<f64>] = if base_points.is_empty() { &fallback } else { base_points };

    let quasi = sobol(r, d, rng::derive_key(seed, &[ns::CANDIDATES, tr.id() as u64]));
    let mut rng = rng::derive_rng(seed, &[ns::BASE_POINT, tr.id() as u64]);

    let mut points = Vec::with_capacity(r);
    for (i, q) in quasi.iter().enumerate() {
        let base = &bases[rng.random_range(0..bases.len())];
        let mut mask: Vec<bool> = (0..d).map(|_| rng.random_range(0.0..1.0) < p).collect();
        if !mask.iter().any(|&m| m) {
            mask[rng.random_range(0..d)] = true;
        }
        let mut x = Vec::with_capacity(d);
        for j in 0..d {
            let v = if mask[j] {
                lo[j] + q[j] * (hi[j] - lo[j])
            } else {
                base[j].clamp(lo[j], hi[j])
            };
            x.push(v);
        }
        debug_assert!(i < r);
        points.push(x);
    }
    Ok(CandidateSet { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust_region::TrustRegion;

    #[test]
    fn schedule_endpoints_and_p0() {
        let s = PerturbSchedule::new(50, 550, 100).unwrap();
        assert!((s.p0() - 0.2).abs() < 1e-15);
        // n' = 1 at or just after the initial design
        let p = perturb_prob(50, &s).unwrap();
        assert!((p - s.p0()).abs() < 1e-15);
        let p = perturb_prob(51, &s).unwrap();
        assert!((p - s.p0()).abs() < 1e-15);
        // n' = b at the end of the budget
        let p = perturb_prob(550, &s).unwrap();
        assert!((p - s.p0() / 2.0).abs() < 1e-15);
        let p = perturb_prob(10_000, &s).unwrap();
        assert!((p - s.p0() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_formula_midpoint() {
        let s = PerturbSchedule::new(10, 110, 5).unwrap();
        let b = s.b() as f64;
        let n_prime = (b / 2.0).ceil();
        let n = s.n0 + n_prime as usize;
        let expect = s.p0() * (1.0 - 0.5 * n_prime.ln() / b.ln());
        assert_eq!(perturb_prob(n, &s).unwrap(), expect);
    }

    #[test]
    fn schedule_monotone_nonincreasing() {
        let s = PerturbSchedule::new(20, 220, 30).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=240 {
            let p = perturb_prob(n, &s).unwrap();
            assert!(p <= prev + 1e-15, "n={n} p={p} prev={prev}");
            assert!(p >= s.p0() / 2.0 - 1e-15 && p <= s.p0() + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn schedule_rejects_tiny_budget() {
        let s = PerturbSchedule { n0: 10, nf: 11, d: 4 };
        assert!(perturb_prob(10, &s).is_err());
    }

    #[test]
    fn sobol_empty_and_deterministic() {
        assert!(sobol(0, 3, 1).is_empty());
        let a = sobol(17, 5, 42);
        let b = sobol(17, 5, 42);
        assert_eq!(a, b);
        let c = sobol(17, 5, 43);
        assert_ne!(a, c);
        for p in &a {
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    /// Exact star discrepancy in 2-d by brute force over the coordinate grid.
    fn star_discrepancy_2d(pts: &[Vec<f64>]) -> f64 {
        let n = pts.len() as f64;
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
        xs.push(1.0);
        ys.push(1.0);
        let mut worst = 0.0f64;
        for &x in &xs {
            for &y in &ys {
                let inside =
                    pts.iter().filter(|p| p[0] < x && p[1] < y).count() as f64;
                let closed =
                    pts.iter().filter(|p| p[0] <= x && p[1] <= y).count() as f64;
                worst = worst.max((inside / n - x * y).abs());
                worst = worst.max((closed / n - x * y).abs());
            }
        }
        worst
    }

    #[test]
    fn sobol_beats_uniform_discrepancy() {
        let mut sob = Vec::new();
        let mut uni = Vec::new();
        for seed in 0..10u64 {
            sob.push(star_discrepancy_2d(&sobol(256, 2, seed)));
            let mut r = crate::rng::derive_rng(seed, &[123]);
            let pts: Vec<Vec<f64>> = (0..256)
                .map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
                .collect();
            uni.push(star_discrepancy_2d(&pts));
        }
        sob.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uni.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med_s = (sob[4] + sob[5]) / 2.0;
        let med_u = (uni[4] + uni[5]) / 2.0;
        assert!(med_s < med_u, "sobol median {med_s} vs uniform median {med_u}");
    }

    fn tr_unit(center: Vec<f64>, len: f64) -> TrustRegion {
        TrustRegion::new(0, center, len)
    }

    #[test]
    fn candidates_full_replacement() {
        let tr = tr_unit(vec![0.5; 4], 0.4);
        let (lo, hi) = tr.bounds();
        let base = vec![vec![0.5; 4]];
        let set = gen_candidates(&tr, &base, 64, 1.0, 9).unwrap();
        let quasi = sobol(64, 4, crate::rng::derive_key(9, &[ns::CANDIDATES, 0]));
        for (x, q) in set.points.iter().zip(&quasi) {
            for j in 0..4 {
                let expect = lo[j] + q[j] * (hi[j] - lo[j]);
                assert_eq!(x[j], expect);
            }
        }
    }

    #[test]
    fn candidates_minimum_one_perturbed_dimension() {
        let tr = tr_unit(vec![0.5; 6], 0.8);
        let base = vec![vec![0.5; 6]];
        let set = gen_candidates(&tr, &base, 200, 1e-9, 11).unwrap();
        for x in &set.points {
            let changed = x.iter().filter(|&&v| v != 0.5).count();
            assert_eq!(changed, 1, "{x:?}");
        }
    }

    #[test]
    fn candidates_stay_inside_box() {
        let tr = tr_unit(vec![0.05, 0.95, 0.5], 0.4);
        let (lo, hi) = tr.bounds();
        assert_eq!(lo[0], 0.0);
        assert!((hi[1] - 1.0).abs() < 1e-15);
        let base = vec![vec![0.1, 0.9, 0.45], vec![0.0, 1.0, 0.6]];
        let set = gen_candidates(&tr, &base, 512, 0.5, 3).unwrap();
        for x in &set.points {
            for j in 0..3 {
                assert!(x[j] >= lo[j] - 1e-15 && x[j] <= hi[j] + 1e-15);
                assert!((0.0..=1.0).contains(&x[j]));
            }
        }
    }

    #[test]
    fn candidates_deterministic() {
        let tr = tr_unit(vec![0.3; 5], 0.6);
        let base = vec![vec![0.25; 5], vec![0.35; 5]];
        let a = gen_candidates(&tr, &base, 32, 0.4, 7).unwrap();
        let b = gen_candidates(&tr, &base, 32, 0.4, 7).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn perturbed_fraction_matches_binomial() {
        let d = 100;
        let p = 0.2;
        let tr = tr_unit(vec![0.5; d], 1.0);
        let base = vec![vec![0.5; d]];
        let set = gen_candidates(&tr, &base, 4096, p, 5).unwrap();
        let mut changed = 0usize;
        for x in &set.points {
            changed += x.iter().filter(|&&v| v != 0.5).count();
        }
        let frac = changed as f64 / (4096 * d) as f64;
        assert!(
            (0.18..=0.23).contains(&frac),
            "perturbed fraction {frac} outside [0.18, 0.23]"
        );
    }
}
