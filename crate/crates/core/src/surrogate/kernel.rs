//! Matérn-5/2 kernel with per-dimension (ARD) lengthscales.

use nalgebra::DMatrix;

pub const SQRT_5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 correlation as a function of the scaled distance `r`.
#[inline]
pub fn matern52(r: f64) -> f64 {
    let s = SQRT_5 * r;
    (1.0 + s + (5.0 / 3.0) * r * r) * (-s).exp()
}

#[inline]
fn scaled_dist(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    let mut sum = 0.0;
    for ((&x, &y), &l) in a.iter().zip(b).zip(lengthscales) {
        let d = (x - y) / l;
        sum += d * d;
    }
    sum.sqrt()
}

/// Symmetric kernel matrix `sigma2 * matern52(R)` over the rows of `x`
/// (an `n x d` matrix flattened as row slices).
pub fn kernel_matrix(x: &[Vec<f64>], lengthscales: &[f64], sigma2: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = sigma2;
        for j in (i + 1)..n {
            let v = sigma2 * matern52(scaled_dist(&x[i], &x[j], lengthscales));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-kernel matrix between the rows of `a` and the rows of `b`.
pub fn cross_kernel(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    lengthscales: &[f64],
    sigma2: f64,
) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            k[(i, j)] = sigma2 * matern52(scaled_dist(&a[i], &b[j], lengthscales));
        }
    }
    k
}

/// The factor shared by all ARD lengthscale derivatives:
/// `d k / d r^2_scaled,i` summed form. For the Matérn-5/2 kernel,
/// `dk/d logl_i = G(r) * (x_i - x'_i)^2 / l_i^2` with
/// `G(r) = (5 sigma2 / 3) (1 + sqrt5 r) exp(-sqrt5 r)`.
pub fn grad_factor_matrix(x: &[Vec<f64>], lengthscales: &[f64], sigma2: f64) -> DMatrix<f64> {
    let n = x.len();
    let c = 5.0 * sigma2 / 3.0;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = c;
        for j in (i + 1)..n {
            let r = scaled_dist(&x[i], &x[j], lengthscales);
            let s = SQRT_5 * r;
            let v = c * (1.0 + s) * (-s).exp();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
