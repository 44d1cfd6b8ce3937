//! Local Gaussian-process surrogates: one independent model per outcome,
//! with a constant mean and a Matérn-5/2 ARD kernel. Targets are
//! standardized per training window; hyperparameters are fit by multi-start
//! gradient ascent on the log marginal likelihood. Posterior inference,
//! exact joint sampling, and random-Fourier-feature draws all operate on the
//! fitted model.

mod fit;
pub mod kernel;
mod rff;

pub use fit::FitOptions;
pub use rff::{draw_rff, draw_rff_prior, eval_rff, RffSample};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};
use fit::{cholesky_with_jitter, maximize_mll};
use kernel::{cross_kernel, kernel_matrix};

/// Kernel and mean hyperparameters, in standardized-target units.
#[derive(Debug, Clone)]
pub struct GPHyperparams {
    /// One positive lengthscale per input dimension.
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub constant_mean: f64,
}

impl GPHyperparams {
    fn validate(&self, d: usize) -> Result<()> {
        if self.lengthscales.len() != d {
            return Err(Error::InvalidArgument(format!(
                "expected {d} lengthscales, got {}",
                self.lengthscales.len()
            )));
        }
        let positive = self.lengthscales.iter().all(|&l| l > 0.0)
            && self.signal_variance > 0.0
            && self.noise_variance > 0.0;
        if !positive {
            return Err(Error::InvalidArgument(
                "lengthscales, signal variance and noise variance must be strictly positive"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// A fitted local surrogate for a single outcome.
#[derive(Debug, Clone)]
pub struct GPModel {
    hyperparams: GPHyperparams,
    train_x: Vec<Vec<f64>>,
    train_y_std: DVector<f64>,
    target_mean: f64,
    target_std: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_marginal: f64,
}

fn check_inputs(train_inputs: &[Vec<f64>], train_targets: &[f64]) -> Result<usize> {
    if train_inputs.is_empty() || train_inputs.len() != train_targets.len() {
        return Err(Error::InvalidData(format!(
            "need n >= 1 with matching inputs/targets, got {} inputs and {} targets",
            train_inputs.len(),
            train_targets.len()
        )));
    }
    let d = train_inputs[0].len();
    for x in train_inputs {
        if x.len() != d {
            return Err(Error::InvalidData("ragged input matrix".into()));
        }
        for &v in x {
            if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(Error::InvalidData(format!(
                    "input coordinate {v} outside the unit hypercube"
                )));
            }
        }
    }
    if train_targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite training target".into()));
    }
    Ok(d)
}

/// Fits a GP to the window with default options.
pub fn fit_gp(train_inputs: &[Vec<f64>], train_targets: &[f64]) -> Result<GPModel> {
    fit_gp_with(train_inputs, train_targets, &FitOptions::default())
}

/// Fits a GP: standardizes the targets (zero-variance windows keep a unit
/// scale), maximizes the marginal likelihood from several restarts, and
/// caches the Cholesky factor of the resulting kernel matrix.
pub fn fit_gp_with(
    train_inputs: &[Vec<f64>],
    train_targets: &[f64],
    opts: &FitOptions,
) -> Result<GPModel> {
    check_inputs(train_inputs, train_targets)?;
    let n = train_targets.len();
    let mean = train_targets.iter().sum::<f64>() / n as f64;
    let var = train_targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let y_std = DVector::from_iterator(n, train_targets.iter().map(|v| (v - mean) / std));

    let fitted = maximize_mll(train_inputs, &y_std, opts).ok_or_else(|| {
        Error::Numerical("kernel matrix not factorizable at any restart".into())
    })?;
    let hyperparams = GPHyperparams {
        noise_variance: opts.noise_ratio * fitted.signal_variance,
        lengthscales: fitted.lengthscales,
        signal_variance: fitted.signal_variance,
        constant_mean: 0.0,
    };
    GPModel::from_parts(
        train_inputs.to_vec(),
        y_std,
        mean,
        std,
        hyperparams,
        fitted.mll,
    )
}

impl GPModel {
    /// Conditions a model on the window with fixed hyperparameters (no
    /// marginal-likelihood optimization). Targets are taken raw and
    /// standardized internally.
    pub fn with_hyperparams(
        train_inputs: &[Vec<f64>],
        train_targets: &[f64],
        hyperparams: GPHyperparams,
    ) -> Result<GPModel> {
        let d = check_inputs(train_inputs, train_targets)?;
        hyperparams.validate(d)?;
        let n = train_targets.len();
        let mean = train_targets.iter().sum::<f64>() / n as f64;
        let var =
            train_targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y_std = DVector::from_iterator(n, train_targets.iter().map(|v| (v - mean) / std));
        Self::from_parts(train_inputs.to_vec(), y_std, mean, std, hyperparams, f64::NAN)
    }

    fn from_parts(
        train_x: Vec<Vec<f64>>,
        train_y_std: DVector<f64>,
        target_mean: f64,
        target_std: f64,
        hyperparams: GPHyperparams,
        log_marginal: f64,
    ) -> Result<GPModel> {
        let n = train_x.len();
        let mut k = kernel_matrix(&train_x, &hyperparams.lengthscales, hyperparams.signal_variance);
        for i in 0..n {
            k[(i, i)] += hyperparams.noise_variance;
        }
        let (chol, _) = cholesky_with_jitter(&k, hyperparams.signal_variance)
            .ok_or_else(|| Error::Numerical("kernel matrix not factorizable".into()))?;
        let centered = &train_y_std - DVector::from_element(n, hyperparams.constant_mean);
        let alpha = chol.solve(&centered);
        Ok(GPModel {
            hyperparams,
            train_x,
            train_y_std,
            target_mean,
            target_std,
            chol,
            alpha,
            log_marginal,
        })
    }

    pub fn hyperparams(&self) -> &GPHyperparams {
        &self.hyperparams
    }

    pub fn train_len(&self) -> usize {
        self.train_x.len()
    }

    pub fn input_dim(&self) -> usize {
        self.train_x[0].len()
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    pub(crate) fn train_targets_std(&self) -> &DVector<f64> {
        &self.train_y_std
    }

    pub(crate) fn standardization(&self) -> (f64, f64) {
        (self.target_mean, self.target_std)
    }

    /// De-standardized constant prior mean.
    pub fn prior_mean(&self) -> f64 {
        self.target_mean + self.target_std * self.hyperparams.constant_mean
    }

    /// Log marginal likelihood of the fitted hyperparameters (NaN for models
    /// conditioned with fixed hyperparameters).
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// Predictive mean and covariance of the latent function at the rows of
    /// `x`, in original target units.
    pub fn posterior(&self, x: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let h = &self.hyperparams;
        let kxs = cross_kernel(&self.train_x, x, &h.lengthscales, h.signal_variance);
        let kss = kernel_matrix(x, &h.lengthscales, h.signal_variance);
        let mean_std = kxs.transpose() * &self.alpha;
        let v = self.chol.l().solve_lower_triangular(&kxs).expect("triangular solve");
        let cov_std = kss - v.transpose() * &v;
        let mean = mean_std.map(|m| {
            self.target_mean + self.target_std * (m + self.hyperparams.constant_mean)
        });
        let cov = cov_std * (self.target_std * self.target_std);
        (mean, cov)
    }

    /// `count` exact draws from the joint posterior over the rows of `x`
    /// (one draw per returned row). Deterministic given the RNG state.
    pub fn sample_joint<R: Rng + ?Sized>(
        &self,
        x: &[Vec<f64>],
        rng: &mut R,
        count: usize,
    ) -> Result<DMatrix<f64>> {
        if x.is_empty() {
            return Err(Error::InvalidArgument("sample_joint needs r >= 1 query points".into()));
        }
        let (mean, cov) = self.posterior(x);
        let scale = self.target_std * self.target_std * self.hyperparams.signal_variance;
        let (chol, _) = cholesky_with_jitter(&cov, scale).ok_or_else(|| {
            Error::Numerical("posterior covariance not factorizable".into())
        })?;
        let r = x.len();
        let l = chol.l();
        let mut out = DMatrix::zeros(count, r);
        for s in 0..count {
            let z = DVector::from_iterator(r, (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let draw = &mean + &l * z;
            for (j, v) in draw.iter().enumerate() {
                out[(s, j)] = *v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn single_point_interpolates() {
        let model = fit_gp(&[vec![0.3, 0.7]], &[2.5]).unwrap();
        let (mean, _) = model.posterior(&[vec![0.3, 0.7]]);
        assert!((mean[0] - 2.5).abs() < 1e-3);
        let (_, cov) = model.posterior(&[vec![0.9, 0.1]]);
        assert!(cov[(0, 0)] > 0.0);
    }

    #[test]
    fn constant_targets_recovered() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let model = fit_gp(&x, &[3.25; 6]).unwrap();
        for q in [0.0, 0.33, 0.99] {
            let (mean, _) = model.posterior(&[vec![q]]);
            assert!((mean[0] - 3.25).abs() < 1e-3, "at {q}: {}", mean[0]);
        }
    }

    #[test]
    fn sine_function_held_out_rmse() {
        let mut r = derive_rng(7, &[1]);
        let f = |p: &[f64]| (2.0 * std::f64::consts::PI * p[0]).sin();
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|p| f(p)).collect();
        let model = fit_gp(&x, &y).unwrap();
        let tests: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![r.random_range(0.05..0.95), r.random_range(0.05..0.95)])
            .collect();
        let (mean, _) = model.posterior(&tests);
        let rmse = (tests
            .iter()
            .enumerate()
            .map(|(i, p)| (mean[i] - f(p)).powi(2))
            .sum::<f64>()
            / tests.len() as f64)
            .sqrt();
        assert!(rmse < 0.1, "held-out rmse {rmse}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_gp(&[], &[]).is_err());
        assert!(fit_gp(&[vec![0.5]], &[f64::NAN]).is_err());
        assert!(fit_gp(&[vec![2.5]], &[1.0]).is_err());
    }

    #[test]
    fn posterior_at_training_point_near_target() {
        let x = vec![vec![0.1], vec![0.4], vec![0.8]];
        let y = [1.0, -0.5, 2.0];
        let model = fit_gp(&x, &y).unwrap();
        let (mean, _) = model.posterior(&x);
        for i in 0..3 {
            assert!((mean[i] - y[i]).abs() < 1e-3, "i={i} mean={}", mean[i]);
        }
    }

    #[test]
    fn prior_reversion_far_from_data() {
        let hyper = GPHyperparams {
            lengthscales: vec![0.01, 0.01],
            signal_variance: 2.0,
            noise_variance: 2e-6,
            constant_mean: 0.0,
        };
        let model =
            GPModel::with_hyperparams(&[vec![0.0, 0.0], vec![0.02, 0.0]], &[1.0, -1.0], hyper)
                .unwrap();
        let (mean, cov) = model.posterior(&[vec![0.9, 0.9]]);
        assert!((mean[0] - model.prior_mean()).abs() < 1e-6);
        let (_, std) = model.standardization();
        assert!((cov[(0, 0)] - 2.0 * std * std).abs() < 1e-6 * std * std);
    }

    #[test]
    fn covariance_diagonal_matches_pointwise_variances() {
        let mut r = derive_rng(8, &[2]);
        let x: Vec<Vec<f64>> =
            (0..15).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * p[0] - p[1]).collect();
        let model = fit_gp(&x, &y).unwrap();
        let queries: Vec<Vec<f64>> =
            (0..6).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let (_, cov) = model.posterior(&queries);
        for (i, q) in queries.iter().enumerate() {
            let (_, single) = model.posterior(&[q.clone()]);
            assert!(
                (cov[(i, i)] - single[(0, 0)]).abs() < 1e-8,
                "joint {} vs single {}",
                cov[(i, i)],
                single[(0, 0)]
            );
        }
    }

    #[test]
    fn posterior_variance_nonnegative() {
        let mut r = derive_rng(9, &[3]);
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).cos()).collect();
        let model = fit_gp(&x, &y).unwrap();
        for _ in 0..50 {
            let q = vec![r.random_range(0.0..1.0)];
            let (_, cov) = model.posterior(&[q]);
            assert!(cov[(0, 0)] >= -1e-10);
        }
    }

    #[test]
    fn joint_samples_match_posterior_moments() {
        let x = vec![vec![0.1], vec![0.5], vec![0.9]];
        let y = [0.0, 1.0, -1.0];
        let model = fit_gp(&x, &y).unwrap();
        let queries = vec![vec![0.2], vec![0.5], vec![0.75]];
        let (mean, cov) = model.posterior(&queries);
        let mut rng = derive_rng(4, &[4]);
        let s = 10_000usize;
        let draws = model.sample_joint(&queries, &mut rng, s).unwrap();
        for j in 0..3 {
            let emp: f64 = draws.column(j).sum() / s as f64;
            let stderr = (cov[(j, j)].max(1e-12) / s as f64).sqrt();
            assert!(
                (emp - mean[j]).abs() <= 4.0 * stderr,
                "coord {j}: emp {emp} vs {} (stderr {stderr})",
                mean[j]
            );
        }
        // covariance entries with meaningful magnitude: 10% relative error
        for a in 0..3 {
            for b in 0..3 {
                let mean_a: f64 = draws.column(a).sum() / s as f64;
                let mean_b: f64 = draws.column(b).sum() / s as f64;
                let emp: f64 = (0..s)
                    .map(|i| (draws[(i, a)] - mean_a) * (draws[(i, b)] - mean_b))
                    .sum::<f64>()
                    / s as f64;
                if cov[(a, b)].abs() > 1e-3 {
                    assert!(
                        (emp - cov[(a, b)]).abs() <= 0.1 * cov[(a, b)].abs(),
                        "cov[{a},{b}] emp {emp} vs {}",
                        cov[(a, b)]
                    );
                }
            }
        }
    }

    #[test]
    fn joint_samples_deterministic_per_seed() {
        let model = fit_gp(&[vec![0.2], vec![0.8]], &[1.0, 2.0]).unwrap();
        let queries = vec![vec![0.3], vec![0.6]];
        let a = model.sample_joint(&queries, &mut derive_rng(5, &[6]), 4).unwrap();
        let b = model.sample_joint(&queries, &mut derive_rng(5, &[6]), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardization_affine_roundtrip() {
        let mut r = derive_rng(10, &[5]);
        let x: Vec<Vec<f64>> =
            (0..18).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + p[1]).collect();
        let (a, b) = (3.7, -11.0);
        let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let opts = FitOptions::default();
        let m1 = fit_gp_with(&x, &y, &opts).unwrap();
        let m2 = fit_gp_with(&x, &y2, &opts).unwrap();
        let queries: Vec<Vec<f64>> =
            (0..8).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let (mean1, _) = m1.posterior(&queries);
        let (mean2, _) = m2.posterior(&queries);
        for i in 0..queries.len() {
            assert!(
                (mean2[i] - (a * mean1[i] + b)).abs() < 1e-6,
                "affine mismatch at {i}: {} vs {}",
                mean2[i],
                a * mean1[i] + b
            );
        }
    }
}
