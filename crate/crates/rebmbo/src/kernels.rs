//! Covariance functions: RBF with per-dimension lengthscales, Matérn-5/2,
//! and their learned nonnegative mixture, plus Gram-matrix construction.
//!
//! `k(x, x') = σ_f² [w_rbf · k_rbf(x, x') + w_matern · k_matern(x, x')]`

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Mixture-kernel hyperparameters.
///
/// The weights are nonnegative but not constrained to a simplex; `amplitude`
/// absorbs overall scale. All positive quantities are optimized in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Signal variance σ_f².
    pub amplitude: f64,
    /// Per-dimension RBF lengthscales.
    pub rbf_lengthscales: Vec<f64>,
    /// Single isotropic Matérn-5/2 lengthscale.
    pub matern_lengthscale: f64,
    pub w_rbf: f64,
    pub w_matern: f64,
}

impl KernelParams {
    /// Unit defaults: amplitude 1, all lengthscales 1, equal half weights.
    pub fn unit(dim: usize) -> Self {
        Self {
            amplitude: 1.0,
            rbf_lengthscales: vec![1.0; dim],
            matern_lengthscale: 1.0,
            w_rbf: 0.5,
            w_matern: 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.rbf_lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::Param("amplitude must be > 0".into()));
        }
        if self.rbf_lengthscales.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Param("rbf lengthscales must be > 0".into()));
        }
        if !(self.matern_lengthscale > 0.0) {
            return Err(Error::Param("matern lengthscale must be > 0".into()));
        }
        if self.w_rbf < 0.0 || self.w_matern < 0.0 || self.w_rbf + self.w_matern <= 0.0 {
            return Err(Error::Param(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(())
    }

    /// Prior variance `k(x, x)`, independent of x.
    pub fn prior_variance(&self) -> f64 {
        self.amplitude * (self.w_rbf + self.w_matern)
    }
}

/// `exp(-1/2 Σ ((x_i - x'_i) / ℓ_i)²)`; 1 iff x = x'.
pub fn rbf(x: &[f64], x_other: &[f64], lengthscales: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), x_other.len());
    debug_assert_eq!(x.len(), lengthscales.len());
    let mut q = 0.0;
    for i in 0..x.len() {
        let z = (x[i] - x_other[i]) / lengthscales[i];
        q += z * z;
    }
    (-0.5 * q).exp()
}

/// `(1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(-√5 r/ℓ)` with `r = ‖x - x'‖`.
pub fn matern52(x: &[f64], x_other: &[f64], lengthscale: f64) -> f64 {
    debug_assert_eq!(x.len(), x_other.len());
    let r2: f64 = x
        .iter()
        .zip(x_other)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let r = r2.sqrt();
    let s = SQRT_5 * r / lengthscale;
    (1.0 + s + 5.0 * r2 / (3.0 * lengthscale * lengthscale)) * (-s).exp()
}

/// Weighted mixture `σ_f² (w_rbf · rbf + w_matern · matern52)`.
pub fn mixture(x: &[f64], x_other: &[f64], params: &KernelParams) -> f64 {
    params.amplitude
        * (params.w_rbf * rbf(x, x_other, &params.rbf_lengthscales)
            + params.w_matern * matern52(x, x_other, params.matern_lengthscale))
}

/// Gram matrix `G[i][j] = mixture(x_i, x_j)`, exactly symmetric: each
/// unordered pair is evaluated once and mirrored.
pub fn gram(points: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = points.len();
    let diag = params.prior_variance();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = diag;
        for j in (i + 1)..n {
            let v = mixture(&points[i], &points[j], params);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Cross-covariance matrix `C[i][j] = mixture(a_i, b_j)`.
pub fn cross_gram(a: &[Vec<f64>], b: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            c[(i, j)] = mixture(&a[i], &b[j], params);
        }
    }
    c
}

/// Kernel vector `k(x*, X)`.
pub fn kernel_vector(x_star: &[f64], points: &[Vec<f64>], params: &KernelParams) -> Vec<f64> {
    points.iter().map(|p| mixture(x_star, p, params)).collect()
}
