//! Marginal-likelihood maximization for the local GP hyperparameters:
//! multi-start gradient ascent (Adam) on log-parameters within box bounds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::kernel::{grad_factor_matrix, kernel_matrix};
use crate::rng;

/// Knobs for hyperparameter fitting. The defaults are used everywhere; the
/// iteration budget is the main cost lever for large windows.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub lengthscale_bounds: (f64, f64),
    pub signal_variance_bounds: (f64, f64),
    /// Noise variance as a fixed fraction of the signal variance
    /// (observations are treated as noise-free).
    pub noise_ratio: f64,
    /// Seed for the restart initializations; fixed so that fitting the same
    /// window twice yields the same model.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 40,
            learning_rate: 0.1,
            lengthscale_bounds: (0.005, 4.0),
            signal_variance_bounds: (0.05, 20.0),
            noise_ratio: 1e-6,
            seed: 0x5eed,
        }
    }
}

/// Jitter escalation ladder (relative to the signal variance).
pub const JITTER_STEPS: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky with escalating diagonal jitter. Returns the factor and the
/// jitter that was needed (0 when none).
pub fn cholesky_with_jitter(
    k: &DMatrix<f64>,
    scale: f64,
) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Some((c, 0.0));
    }
    for &j in &JITTER_STEPS {
        let mut kj = k.clone();
        let bump = j * scale;
        for i in 0..kj.nrows() {
            kj[(i, i)] += bump;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Some((c, bump));
        }
    }
    None
}

/// Log marginal likelihood and its gradient with respect to
/// `[log l_1, ..., log l_d, log sigma2]` for standardized targets with a
/// zero constant mean.
fn mll_and_grad(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    log_ls: &[f64],
    log_sig: f64,
    noise_ratio: f64,
) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let d = log_ls.len();
    let ls: Vec<f64> = log_ls.iter().map(|v| v.exp()).collect();
    let sigma2 = log_sig.exp();

    let mut k = kernel_matrix(x, &ls, sigma2);
    let noise = noise_ratio * sigma2;
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&k, sigma2)?;
    let alpha = chol.solve(y);
    let log_det_half: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    let mll = -0.5 * y.dot(&alpha)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha^T - K^-1; gradient of the MLL in theta is
    // 0.5 tr(W dK/dtheta).
    let mut kinv = DMatrix::identity(n, n);
    chol.solve_mut(&mut kinv);
    let w = &alpha * alpha.transpose() - kinv;

    let mut grad = Vec::with_capacity(d + 1);
    // lengthscales: dK/dlogl_i = G .* D_i / l_i^2 with G shared across dims
    let g = grad_factor_matrix(x, &ls, sigma2);
    let h = w.component_mul(&g);
    let s = h.column_sum(); // row sums (H is symmetric)
    let xm = DMatrix::from_fn(n, d, |i, j| x[i][j]);
    let hx = &h * &xm;
    for dim in 0..d {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..n {
            let v = xm[(i, dim)];
            lin += v * v * s[i];
            quad += v * hx[(i, dim)];
        }
        grad.push((lin - quad) / (ls[dim] * ls[dim]));
    }
    // signal variance: dK/dlog sigma2 = K (noise included, it scales too)
    let grad_sig = 0.5 * (alpha.dot(y) - n as f64);
    grad.push(grad_sig);

    Some((mll, grad))
}

pub(crate) struct FitResult {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub mll: f64,
    /// MLL evaluated at each restart's initial hyperparameters.
    pub initial_mlls: Vec<f64>,
}

/// Multi-start projected Adam on log-parameters; returns the best
/// hyperparameters over every restart trajectory including the starts.
pub(crate) fn maximize_mll(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    opts: &FitOptions,
) -> Option<FitResult> {
    let d = x[0].len();
    let (lo_l, hi_l) = (opts.lengthscale_bounds.0.ln(), opts.lengthscale_bounds.1.ln());
    let (lo_s, hi_s) =
        (opts.signal_variance_bounds.0.ln(), opts.signal_variance_bounds.1.ln());
    let mut seeds = rng::derive_rng(opts.seed, &[rng::ns::FIT]);

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts.max(1));
    let mut base = vec![0.5f64.ln(); d];
    base.push(0.0); // sigma2 = 1 for standardized targets
    starts.push(base);
    for _ in 1..opts.restarts.max(1) {
        let mut z: Vec<f64> = (0..d)
            .map(|_| seeds.random_range(0.05f64.ln()..2.0f64.ln()))
            .collect();
        z.push(seeds.random_range(0.1f64.ln()..5.0f64.ln()));
        starts.push(z);
    }
    for z in &mut starts {
        for v in z[..d].iter_mut() {
            *v = v.clamp(lo_l, hi_l);
        }
        z[d] = z[d].clamp(lo_s, hi_s);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut initial_mlls = Vec::with_capacity(starts.len());
    let mut consider = |z: &[f64], mll: f64, best: &mut Option<(Vec<f64>, f64)>| {
        if best.as_ref().map_or(true, |(_, b)| mll > *b) {
            *best = Some((z.to_vec(), mll));
        }
    };

    for start in &starts {
        let mut z = start.clone();
        let eval = mll_and_grad(x, y, &z[..d], z[d], opts.noise_ratio);
        let (mut mll, mut grad) = match eval {
            Some(v) => v,
            None => {
                initial_mlls.push(f64::NEG_INFINITY);
                continue;
            }
        };
        initial_mlls.push(mll);
        consider(&z, mll, &mut best);

        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m = vec![0.0; d + 1];
        let mut v = vec![0.0; d + 1];
        let mut stall = 0usize;
        let mut last_best = mll;
        for t in 1..=opts.max_iters {
            let gnorm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
            if gnorm < 1e-5 {
                break;
            }
            for i in 0..=d {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let mh = m[i] / (1.0 - b1.powi(t as i32));
                let vh = v[i] / (1.0 - b2.powi(t as i32));
                z[i] += opts.learning_rate * mh / (vh.sqrt() + eps);
            }
            for zi in z[..d].iter_mut() {
                *zi = zi.clamp(lo_l, hi_l);
            }
            z[d] = z[d].clamp(lo_s, hi_s);
            match mll_and_grad(x, y, &z[..d], z[d], opts.noise_ratio) {
                Some((val, g)) => {
                    mll = val;
                    grad = g;
                    consider(&z, mll, &mut best);
                    if mll > last_best + 1e-9 {
                        last_best = mll;
                        stall = 0;
                    } else {
                        stall += 1;
                        if stall >= 6 {
                            break;
                        }
                    }
                }
                None => break,
            }
        }
    }

    best.map(|(z, mll)| FitResult {
        lengthscales: z[..d].iter().map(|v| v.exp()).collect(),
        signal_variance: z[d].exp(),
        mll,
        initial_mlls,
    })
}
