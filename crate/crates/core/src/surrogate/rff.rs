//! Random-Fourier-feature approximation of GP function samples.
//!
//! A draw is a deterministic function `x -> sqrt(2 sigma2 / m) *
//! sum_j w_j cos(omega_j . x + b_j)` whose frequencies follow the spectral
//! density of the Matérn-5/2 kernel (a multivariate t with 5 degrees of
//! freedom, scaled by the ARD lengthscales). Weights are drawn from the
//! weight-space posterior of the Bayesian linear model on these features,
//! conditioned on the training window, so evaluating the draw anywhere is
//! cheap and requires no further linear algebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::fit::cholesky_with_jitter;
use super::{GPHyperparams, GPModel};
use crate::{Error, Result};

/// One approximate posterior function draw. Evaluation is deterministic
/// given the stored fields.
#[derive(Debug, Clone)]
pub struct RffSample {
    frequencies: DMatrix<f64>, // m x d
    phases: DVector<f64>,      // m
    weights: DVector<f64>,     // m
    signal_variance: f64,      // standardized-target units
    constant_mean: f64,        // standardized-target units
    target_mean: f64,
    target_std: f64,
}

impl RffSample {
    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    /// De-standardized constant mean (what the sample returns far from any
    /// feature support when all weights are zero).
    pub fn prior_mean(&self) -> f64 {
        self.target_mean + self.target_std * self.constant_mean
    }

    /// Feature matrix `Phi` (rows = points, columns = features) without the
    /// weight contraction.
    fn features(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let m = self.num_features();
        let scale = (2.0 * self.signal_variance / m as f64).sqrt();
        let mut phi = DMatrix::zeros(xs.len(), m);
        for (i, x) in xs.iter().enumerate() {
            for j in 0..m {
                let mut dot = self.phases[j];
                for (k, &v) in x.iter().enumerate() {
                    dot += self.frequencies[(j, k)] * v;
                }
                phi[(i, j)] = scale * dot.cos();
            }
        }
        phi
    }

    /// Evaluates the drawn function at each row of `xs`.
    pub fn evaluate(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        if xs.is_empty() {
            return Vec::new();
        }
        let phi = self.features(xs);
        let vals = phi * &self.weights;
        vals.iter()
            .map(|v| self.target_mean + self.target_std * (v + self.constant_mean))
            .collect()
    }
}

/// Free-function form of [`RffSample::evaluate`].
pub fn eval_rff(sample: &RffSample, xs: &[Vec<f64>]) -> Vec<f64> {
    sample.evaluate(xs)
}

fn draw_frequencies_phases<R: Rng + ?Sized>(
    hyper: &GPHyperparams,
    d: usize,
    num_features: usize,
    rng: &mut R,
) -> (DMatrix<f64>, DVector<f64>) {
    // Matérn-nu spectral density = multivariate t with 2*nu dof; nu = 5/2.
    let chi = ChiSquared::new(5.0).expect("valid dof");
    let mut freq = DMatrix::zeros(num_features, d);
    for j in 0..num_features {
        let u: f64 = chi.sample(rng);
        let scale = (5.0 / u).sqrt();
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            freq[(j, k)] = z * scale / hyper.lengthscales[k];
        }
    }
    let phases = DVector::from_iterator(
        num_features,
        (0..num_features).map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI)),
    );
    (freq, phases)
}

/// Draws an approximate posterior function sample with `num_features` basis
/// functions from a fitted model.
pub fn draw_rff<R: Rng + ?Sized>(
    model: &GPModel,
    num_features: usize,
    rng: &mut R,
) -> Result<RffSample> {
    if num_features == 0 {
        return Err(Error::InvalidArgument("need at least one Fourier feature".into()));
    }
    let hyper = model.hyperparams();
    let d = model.input_dim();
    let (frequencies, phases) = draw_frequencies_phases(hyper, d, num_features, rng);
    let (target_mean, target_std) = model.standardization();
    let mut sample = RffSample {
        frequencies,
        phases,
        weights: DVector::zeros(num_features),
        signal_variance: hyper.signal_variance,
        constant_mean: hyper.constant_mean,
        target_mean,
        target_std,
    };

    // Weight-space prior draw, then a Matheron update against the window:
    //   w = w0 + Phi^T (Phi Phi^T + noise I)^-1 (y - m - Phi w0 - eps)
    // which needs only an n x n solve since n < m in every window here.
    let n = model.train_len();
    let w0 = DVector::from_iterator(
        num_features,
        (0..num_features).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let phi = sample.features(model.train_inputs());
    let noise = hyper.noise_variance;
    let mut gram = &phi * phi.transpose();
    for i in 0..n {
        gram[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&gram, hyper.signal_variance)
        .ok_or_else(|| Error::Numerical("feature Gram matrix not factorizable".into()))?;
    let eps = DVector::from_iterator(
        n,
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * noise.sqrt()),
    );
    let centered = model.train_targets_std()
        - DVector::from_element(n, hyper.constant_mean)
        - &phi * &w0
        - eps;
    let update = chol.solve(&centered);
    sample.weights = w0 + phi.transpose() * update;
    Ok(sample)
}

/// Draws a prior function sample (no training data) for the given
/// hyperparameters over a `d`-dimensional input space.
pub fn draw_rff_prior<R: Rng + ?Sized>(
    hyper: &GPHyperparams,
    d: usize,
    num_features: usize,
    rng: &mut R,
) -> Result<RffSample> {
    if num_features == 0 {
        return Err(Error::InvalidArgument("need at least one Fourier feature".into()));
    }
    hyper.validate(d)?;
    let (frequencies, phases) = draw_frequencies_phases(hyper, d, num_features, rng);
    let weights = DVector::from_iterator(
        num_features,
        (0..num_features).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    Ok(RffSample {
        frequencies,
        phases,
        weights,
        signal_variance: hyper.signal_variance,
        constant_mean: hyper.constant_mean,
        target_mean: 0.0,
        target_std: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use crate::surrogate::fit_gp;
    use crate::surrogate::kernel::matern52;

    fn hyper(d: usize) -> GPHyperparams {
        GPHyperparams {
            lengthscales: vec![0.4; d],
            signal_variance: 1.5,
            noise_variance: 1.5e-6,
            constant_mean: 0.0,
        }
    }

    /// Kernel approximation error from the feature map alone.
    fn kernel_mse(num_features: usize, seed: u64) -> f64 {
        let d = 4;
        let h = hyper(d);
        let mut rng = derive_rng(seed, &[1]);
        let sample = draw_rff_prior(&h, d, num_features, &mut rng).unwrap();
        let mut r = derive_rng(seed, &[2]);
        let mut mse = 0.0;
        let pairs = 100;
        for _ in 0..pairs {
            let a: Vec<f64> = (0..d).map(|_| r.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..d).map(|_| r.random_range(0.0..1.0)).collect();
            let phi = sample.features(&[a.clone(), b.clone()]);
            let approx: f64 = (0..num_features).map(|j| phi[(0, j)] * phi[(1, j)]).sum();
            let scaled: f64 = a
                .iter()
                .zip(&b)
                .map(|(&x, &y)| ((x - y) / 0.4) * ((x - y) / 0.4))
                .sum::<f64>()
                .sqrt();
            let exact = 1.5 * matern52(scaled);
            mse += (approx - exact) * (approx - exact);
        }
        mse / pairs as f64
    }

    #[test]
    fn more_features_approximate_kernel_better() {
        let mut coarse = Vec::new();
        let mut fine = Vec::new();
        for seed in 0..10 {
            coarse.push(kernel_mse(256, seed));
            fine.push(kernel_mse(4096, seed));
        }
        coarse.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fine.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            fine[5] < coarse[5],
            "median mse with 4096 features {} !< with 256 features {}",
            fine[5],
            coarse[5]
        );
    }

    #[test]
    fn evaluation_is_deterministic() {
        let x = vec![vec![0.2, 0.4], vec![0.7, 0.1]];
        let model = fit_gp(&x, &[1.0, -1.0]).unwrap();
        let sample = draw_rff(&model, 128, &mut derive_rng(3, &[7])).unwrap();
        let q = vec![vec![0.5, 0.5], vec![0.9, 0.2]];
        assert_eq!(sample.evaluate(&q), sample.evaluate(&q));
        assert!(sample.evaluate(&[]).is_empty());
    }

    #[test]
    fn zero_weights_return_constant_mean() {
        let h = hyper(2);
        let mut sample = draw_rff_prior(&h, 2, 64, &mut derive_rng(4, &[8])).unwrap();
        sample.weights = DVector::zeros(64);
        let vals = sample.evaluate(&[vec![0.1, 0.9], vec![0.6, 0.6]]);
        for v in vals {
            assert_eq!(v, sample.prior_mean());
        }
    }

    #[test]
    fn prior_draw_variance_near_signal_variance() {
        let h = hyper(3);
        let q = vec![vec![0.3, 0.8, 0.5]];
        let mut rng = derive_rng(5, &[9]);
        let n = 1000;
        let vals: Vec<f64> = (0..n)
            .map(|_| draw_rff_prior(&h, 3, 512, &mut rng).unwrap().evaluate(&q)[0])
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(
            (var - h.signal_variance).abs() <= 0.15 * h.signal_variance,
            "empirical {var} vs {}",
            h.signal_variance
        );
    }

    #[test]
    fn posterior_draws_match_gp_posterior_mean() {
        let mut r = derive_rng(6, &[10]);
        let x: Vec<Vec<f64>> =
            (0..12).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let model = fit_gp(&x, &y).unwrap();
        let queries: Vec<Vec<f64>> =
            (0..5).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let (mean, cov) = model.posterior(&queries);
        let draws = 1000;
        let mut acc = vec![0.0; queries.len()];
        let mut rng = derive_rng(6, &[11]);
        for _ in 0..draws {
            let sample = draw_rff(&model, 1024, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(sample.evaluate(&queries)) {
                *a += v;
            }
        }
        for j in 0..queries.len() {
            let emp = acc[j] / draws as f64;
            // sample variance of the draw at this point, plus approximation slack
            let stderr = (cov[(j, j)].max(1e-10) / draws as f64).sqrt();
            assert!(
                (emp - mean[j]).abs() <= 4.0 * stderr + 0.02,
                "point {j}: {emp} vs {} (stderr {stderr})",
                mean[j]
            );
        }
    }
}
