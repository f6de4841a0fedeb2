//! Gaussian-process surrogates: exact inference, a sparse inducing-point
//! variant, and a deep-feature variant, plus marginal-likelihood
//! hyperparameter search and posterior statistics (CDF, pairwise win
//! probability).
//!
//! Inputs are normalized to the unit box and targets standardized
//! internally; every public method speaks original units.

mod deep;
mod hyperopt;
mod sparse;

pub use deep::{fit_deep, fit_deep_from_net, DeepConfig};
pub use hyperopt::{optimize_hyperparams, HyperoptOutcome};
pub use sparse::fit_sparse;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::erf::erfc;

use crate::benchmarks::DomainBox;
use crate::error::{Error, Result};
use crate::kernels::{self, KernelParams};
use crate::net::Mlp;

/// The ordered observation set with its domain box.
#[derive(Debug, Clone)]
pub struct Dataset {
    domain: DomainBox,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(domain: DomainBox) -> Self {
        Self {
            domain,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        assert_eq!(x.len(), self.domain.dim(), "observation dim mismatch");
        self.xs.push(x);
        self.ys.push(y);
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Largest observed target, with its point.
    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.ys
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &y)| (self.xs[i].as_slice(), y))
    }
}

/// Standardization constants for the targets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct YScale {
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn standardize(ys: &[f64]) -> (YScale, DVector<f64>) {
    let n = ys.len();
    if n == 0 {
        return (YScale { mean: 0.0, std: 1.0 }, DVector::zeros(0));
    }
    let mean = ys.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        1.0
    } else {
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt().max(1e-12)
    };
    let scaled = DVector::from_iterator(n, ys.iter().map(|y| (y - mean) / std));
    (YScale { mean, std }, scaled)
}

/// Cholesky of `k + (noise + jitter) I` with jitter escalating from 1e-8 by
/// factors of 10 up to 1e-4. Returns the factor and the jitter that was
/// needed.
pub(crate) fn cholesky_with_jitter(
    k: &DMatrix<f64>,
    noise: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let eye = DMatrix::identity(n, n);
    let mut jitter = 0.0;
    loop {
        let m = k + &eye * (noise + jitter);
        if let Some(c) = m.cholesky() {
            return Ok((c, jitter));
        }
        jitter = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 };
        if jitter > 1e-4 {
            let diag_max = (0..n).map(|i| k[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::Numerical(format!(
                "Cholesky failed for {n}x{n} matrix (noise {noise:.3e}, max diag {diag_max:.3e}) \
                 after jitter escalation to 1e-4"
            )));
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ExactState {
    pub chol: Cholesky<f64, Dyn>,
    /// `(K + σ_n² I)^{-1} y` on standardized targets.
    pub alpha: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SparseState {
    /// Inducing points, normalized coordinates.
    pub inducing: Vec<Vec<f64>>,
    pub chol_kzz: Cholesky<f64, Dyn>,
    /// Cholesky of `Λ = K_zz + σ^{-2} K_zx K_xz`; `Λ^{-1}` doubles as
    /// `K_zz^{-1} Σ_u K_zz^{-1}` in the predictive variance.
    pub chol_lambda: Cholesky<f64, Dyn>,
    /// `K_zz^{-1} μ_u` (predictive-mean weights).
    pub mean_weights: DVector<f64>,
    /// Variational posterior over inducing outputs (kept for inspection).
    pub mu_u: DVector<f64>,
    pub sigma_u: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DeepState {
    pub net: Mlp,
    /// Posterior mean of the linear head.
    pub head_mean: DVector<f64>,
    /// Cholesky of `A = α I + β Φᵀ Φ`.
    pub chol_a: Cholesky<f64, Dyn>,
    /// Observation precision β (noise floor 1/β).
    pub precision: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum VariantState {
    /// No conditioning data: predictions revert to the kernel prior.
    Prior,
    Exact(ExactState),
    Sparse(SparseState),
    Deep(DeepState),
}

/// Surrogate variant label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Exact,
    Sparse,
    Deep,
}

/// A fitted surrogate. Immutable after fitting; cheap to clone and safe to
/// read from multiple threads.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub params: KernelParams,
    pub noise: f64,
    domain: DomainBox,
    /// Training inputs, normalized to the unit box.
    x_norm: Vec<Vec<f64>>,
    y_scale: YScale,
    state: VariantState,
}

impl GpModel {
    /// Prior-only model (no observations).
    pub fn prior(domain: DomainBox, params: KernelParams, noise: f64) -> Self {
        Self {
            params,
            noise,
            domain,
            x_norm: Vec::new(),
            y_scale: YScale { mean: 0.0, std: 1.0 },
            state: VariantState::Prior,
        }
    }

    pub fn variant(&self) -> Variant {
        match self.state {
            VariantState::Prior | VariantState::Exact(_) => Variant::Exact,
            VariantState::Sparse(_) => Variant::Sparse,
            VariantState::Deep(_) => Variant::Deep,
        }
    }

    pub fn n_train(&self) -> usize {
        self.x_norm.len()
    }

    pub fn y_mean(&self) -> f64 {
        self.y_scale.mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_scale.std
    }

    /// `(y - mean) / std` with this model's standardization constants.
    pub fn standardize_y(&self, y: f64) -> f64 {
        (y - self.y_scale.mean) / self.y_scale.std
    }

    /// Prior variance in original units at any point (kernel diagonal).
    pub fn prior_variance(&self) -> f64 {
        self.y_scale.std * self.y_scale.std * self.params.prior_variance()
    }

    /// Per-epoch negative marginal likelihood of the deep-variant feature
    /// training; empty for other variants.
    pub fn deep_loss_history(&self) -> &[f64] {
        match &self.state {
            VariantState::Deep(d) => &d.loss_history,
            _ => &[],
        }
    }

    /// Posterior mean and variance at `x`, in original units. The variance
    /// is clamped at zero from below and never exceeds the prior.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let u = self.domain.to_unit(x);
        let s2 = self.y_scale.std * self.y_scale.std;
        match &self.state {
            VariantState::Prior => (self.y_scale.mean, s2 * self.params.prior_variance()),
            VariantState::Exact(state) => {
                let kstar =
                    DVector::from_vec(kernels::kernel_vector(&u, &self.x_norm, &self.params));
                let mu_std = kstar.dot(&state.alpha);
                let w = state.chol.solve(&kstar);
                let var_std = (self.params.prior_variance() - kstar.dot(&w)).max(0.0);
                (self.y_scale.mean + self.y_scale.std * mu_std, s2 * var_std)
            }
            VariantState::Sparse(state) => {
                let a =
                    DVector::from_vec(kernels::kernel_vector(&u, &state.inducing, &self.params));
                let mu_std = a.dot(&state.mean_weights);
                let kzz_inv_a = state.chol_kzz.solve(&a);
                let lambda_inv_a = state.chol_lambda.solve(&a);
                let var_std = (self.params.prior_variance() - a.dot(&kzz_inv_a)
                    + a.dot(&lambda_inv_a))
                .max(0.0);
                (self.y_scale.mean + self.y_scale.std * mu_std, s2 * var_std)
            }
            VariantState::Deep(state) => {
                let (phi, _) = state
                    .net
                    .forward(&u)
                    .expect("feature net accepts unit-box inputs");
                let phi = DVector::from_vec(phi);
                let mu_std = phi.dot(&state.head_mean);
                let a_inv_phi = state.chol_a.solve(&phi);
                let var_std = phi.dot(&a_inv_phi).max(0.0) + 1.0 / state.precision;
                (self.y_scale.mean + self.y_scale.std * mu_std, s2 * var_std)
            }
        }
    }

    /// `P(f(x) <= z)` under the Gaussian posterior at `x`. Degenerates to a
    /// step function at the mean when the variance vanishes.
    pub fn posterior_cdf(&self, x: &[f64], z: f64) -> f64 {
        let (mu, var) = self.predict(x);
        let sigma = var.sqrt();
        if sigma == 0.0 {
            return if z < mu { 0.0 } else { 1.0 };
        }
        standard_normal_cdf((z - mu) / sigma)
    }

    /// Posterior covariance `cov(f(x), f(x'))` in original units. Only the
    /// exact variant carries the full joint posterior.
    pub fn posterior_cov(&self, x: &[f64], x_other: &[f64]) -> Result<f64> {
        let s2 = self.y_scale.std * self.y_scale.std;
        let u = self.domain.to_unit(x);
        let v = self.domain.to_unit(x_other);
        match &self.state {
            VariantState::Prior => Ok(s2 * kernels::mixture(&u, &v, &self.params)),
            VariantState::Exact(state) => {
                let ku = DVector::from_vec(kernels::kernel_vector(&u, &self.x_norm, &self.params));
                let kv = DVector::from_vec(kernels::kernel_vector(&v, &self.x_norm, &self.params));
                let w = state.chol.solve(&kv);
                Ok(s2 * (kernels::mixture(&u, &v, &self.params) - ku.dot(&w)))
            }
            _ => Err(Error::UnsupportedVariant(
                "posterior covariance requires the exact variant".into(),
            )),
        }
    }

    /// `P(f(x) > f(x'))` under the joint posterior. Returns the probability
    /// and a degeneracy flag; a vanishing denominator yields `(0.5, true)`.
    pub fn prob_duel(&self, x: &[f64], x_other: &[f64]) -> Result<(f64, bool)> {
        let (mu_a, var_a) = self.predict(x);
        let (mu_b, var_b) = self.predict(x_other);
        let cov = self.posterior_cov(x, x_other)?;
        let denom2 = var_a + var_b - 2.0 * cov;
        if denom2 <= 1e-16 {
            return Ok((0.5, true));
        }
        Ok((standard_normal_cdf((mu_a - mu_b) / denom2.sqrt()), false))
    }
}

/// Standard normal CDF, `Φ(t) = erfc(-t/√2) / 2`.
pub fn standard_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn validate_fit_inputs(data: &Dataset, params: &KernelParams, noise: f64) -> Result<()> {
    params.validate()?;
    if params.dim() != data.domain().dim() {
        return Err(Error::Param(format!(
            "kernel dim {} vs domain dim {}",
            params.dim(),
            data.domain().dim()
        )));
    }
    if !(noise > 0.0) {
        return Err(Error::Param("noise variance must be > 0".into()));
    }
    if data.ys().iter().any(|y| !y.is_finite()) {
        return Err(Error::Input("non-finite target".into()));
    }
    Ok(())
}

/// Fits the exact-inference variant: standardizes targets, builds the Gram
/// matrix on unit-box inputs, factorizes `K + σ_n² I`, and solves for the
/// weight vector.
pub fn fit_exact(data: &Dataset, params: &KernelParams, noise: f64) -> Result<GpModel> {
    validate_fit_inputs(data, params, noise)?;
    if data.is_empty() {
        return Ok(GpModel::prior(data.domain().clone(), params.clone(), noise));
    }
    let x_norm: Vec<Vec<f64>> = data.xs().iter().map(|x| data.domain().to_unit(x)).collect();
    let (y_scale, y_scaled) = standardize(data.ys());
    let k = kernels::gram(&x_norm, params);
    let (chol, _jitter) = cholesky_with_jitter(&k, noise)?;
    let alpha = chol.solve(&y_scaled);
    Ok(GpModel {
        params: params.clone(),
        noise,
        domain: data.domain().clone(),
        x_norm,
        y_scale,
        state: VariantState::Exact(ExactState { chol, alpha }),
    })
}

/// Log marginal likelihood of the standardized targets:
/// `-1/2 yᵀα - Σ log L_ii - (n/2) log 2π`.
pub fn log_marginal_likelihood(data: &Dataset, params: &KernelParams, noise: f64) -> Result<f64> {
    validate_fit_inputs(data, params, noise)?;
    let n = data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let x_norm: Vec<Vec<f64>> = data.xs().iter().map(|x| data.domain().to_unit(x)).collect();
    let (_, y_scaled) = standardize(data.ys());
    let k = kernels::gram(&x_norm, params);
    let (chol, _) = cholesky_with_jitter(&k, noise)?;
    let alpha = chol.solve(&y_scaled);
    let log_diag: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    Ok(-0.5 * y_scaled.dot(&alpha) - log_diag - n as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln())
}
