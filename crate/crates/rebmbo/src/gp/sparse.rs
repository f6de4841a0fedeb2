//! Sparse inducing-point variant.
//!
//! Inducing locations come from seeded k-means over the (normalized)
//! training inputs; the Gaussian likelihood admits a closed-form optimum
//! for the variational posterior over inducing outputs, so no iterative
//! bound optimization is needed. With m = n and Z = X this reproduces the
//! exact posterior.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::kernels::{self, KernelParams};

use super::{
    cholesky_with_jitter, standardize, Dataset, GpModel, SparseState, VariantState,
};

/// Seed for the k-means initialization; fixed so a fit is a pure function
/// of its arguments.
const KMEANS_SEED: u64 = 0x5EED_1234;

/// Fits the sparse variant with `m` inducing points.
pub fn fit_sparse(data: &Dataset, m: usize, params: &KernelParams, noise: f64) -> Result<GpModel> {
    super::validate_fit_inputs(data, params, noise)?;
    let n = data.len();
    if m == 0 || m > n {
        return Err(Error::Param(format!(
            "inducing count m={m} must satisfy 1 <= m <= n={n}"
        )));
    }
    let x_norm: Vec<Vec<f64>> = data.xs().iter().map(|x| data.domain().to_unit(x)).collect();
    let (y_scale, y_scaled) = standardize(data.ys());

    // m = n keeps the data itself as inducing set (the approximation is
    // exact there); otherwise cluster.
    let inducing = if m == n {
        x_norm.clone()
    } else {
        kmeans_centers(&x_norm, m, KMEANS_SEED)
    };

    let kzz = kernels::gram(&inducing, params);
    let (chol_kzz, jitter_zz) = cholesky_with_jitter(&kzz, 0.0)?;
    let kzx = kernels::cross_gram(&inducing, &x_norm, params);

    // Λ = K_zz + σ^{-2} K_zx K_xz; closed-form optimum of q(u):
    //   μ_u = σ^{-2} K_zz Λ^{-1} K_zx y,   Σ_u = K_zz Λ^{-1} K_zz.
    let lambda = &kzz + (&kzx * kzx.transpose()) / noise;
    let (chol_lambda, _) = cholesky_with_jitter(&lambda, jitter_zz)?;

    let kzx_y = &kzx * &y_scaled;
    let lambda_inv_kzx_y = chol_lambda.solve(&kzx_y);
    let mu_u = (&kzz * &lambda_inv_kzx_y) / noise;
    let lambda_inv_kzz = chol_lambda.solve(&kzz);
    let sigma_u = &kzz * &lambda_inv_kzz;

    // Predictive mean weights K_zz^{-1} μ_u reduce to σ^{-2} Λ^{-1} K_zx y.
    let mean_weights: DVector<f64> = lambda_inv_kzx_y / noise;

    Ok(GpModel {
        params: params.clone(),
        noise,
        domain: data.domain().clone(),
        x_norm,
        y_scale,
        state: VariantState::Sparse(SparseState {
            inducing,
            chol_kzz,
            chol_lambda,
            mean_weights,
            mu_u,
            sigma_u,
        }),
    })
}

/// Lloyd's k-means with a k-means++ style seeded initialization. Points and
/// centers live in the unit box. Deterministic for fixed inputs and seed.
fn kmeans_centers(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = points.len();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ init: first center uniform, then proportional to squared
    // distance from the nearest chosen center.
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..25 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap();
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, &v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (ctr, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    centers
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
