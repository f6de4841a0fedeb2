//! Deep-feature variant: a small MLP maps inputs to latent features and a
//! Bayesian linear head on those features supplies GP-like statistics,
//!
//!   μ(x) = m̂ᵀ φ(x),
//!   σ²(x) = φ(x)ᵀ A⁻¹ φ(x) + 1/β,   A = α I + β Φᵀ Φ,
//!
//! with observation precision β and weight-prior precision α. The feature
//! net is trained by gradient ascent on the exact marginal likelihood of
//! the linear-Gaussian head (the head posterior is available in closed
//! form, so the likelihood gradient with respect to the feature matrix is
//! exact: `∂lml/∂Φ = β r m̂ᵀ − β Φ A⁻¹`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::net::{Activation, Adam, Mlp};

use super::{standardize, Dataset, DeepState, GpModel, VariantState};

/// Deep-variant configuration.
#[derive(Debug, Clone)]
pub struct DeepConfig {
    /// Latent feature dimension.
    pub feature_dim: usize,
    /// Observation precision β; 1/β is the predictive variance floor.
    pub precision: f64,
    /// Weight-prior precision α of the linear head.
    pub prior_precision: f64,
    /// Feature-net training epochs (0 = keep the initial features).
    pub epochs: usize,
    /// Hidden width of the default feature net.
    pub hidden: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DeepConfig {
    fn default() -> Self {
        Self {
            feature_dim: 8,
            precision: 100.0,
            prior_precision: 1.0,
            epochs: 60,
            hidden: 32,
            learning_rate: 1e-2,
            seed: 0,
        }
    }
}

/// Fits the deep variant with the default feature net
/// (input -> hidden tanh -> feature_dim linear).
pub fn fit_deep(data: &Dataset, config: &DeepConfig, params: &KernelParams) -> Result<GpModel> {
    let dim = data.domain().dim();
    let net = Mlp::new(
        &[dim, config.hidden, config.feature_dim],
        Activation::Tanh,
        config.seed,
    )?;
    fit_deep_from_net(data, net, config, params)
}

/// Fits the deep variant around a caller-supplied feature net (the net's
/// input must match the domain dimension and its output `feature_dim`).
pub fn fit_deep_from_net(
    data: &Dataset,
    mut net: Mlp,
    config: &DeepConfig,
    params: &KernelParams,
) -> Result<GpModel> {
    super::validate_fit_inputs(data, params, config.precision.recip())?;
    if data.is_empty() {
        return Err(Error::Input("deep variant needs at least one observation".into()));
    }
    if net.in_dim() != data.domain().dim() || net.out_dim() != config.feature_dim {
        return Err(Error::Param("feature net shape mismatch".into()));
    }
    if !(config.precision > 0.0) || !(config.prior_precision > 0.0) {
        return Err(Error::Param("precisions must be > 0".into()));
    }

    let n = data.len();
    let d_f = config.feature_dim;
    let beta = config.precision;
    let alpha = config.prior_precision;
    let x_norm: Vec<Vec<f64>> = data.xs().iter().map(|x| data.domain().to_unit(x)).collect();
    let (y_scale, y_scaled) = standardize(data.ys());

    let mut adam = Adam::new(net.num_params(), config.learning_rate);
    let mut loss_history = Vec::with_capacity(config.epochs);

    let head = |net: &Mlp| -> Result<(DMatrix<f64>, Vec<crate::net::Cache>)> {
        let mut phi = DMatrix::zeros(n, d_f);
        let mut caches = Vec::with_capacity(n);
        for (i, x) in x_norm.iter().enumerate() {
            let (out, cache) = net.forward(x)?;
            for (j, v) in out.iter().enumerate() {
                phi[(i, j)] = *v;
            }
            caches.push(cache);
        }
        Ok((phi, caches))
    };

    for epoch in 0..config.epochs {
        let (phi, caches) = head(&net)?;
        let a = DMatrix::identity(d_f, d_f) * alpha + phi.transpose() * &phi * beta;
        let chol_a = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("head precision matrix not PD".into()))?;
        let m_hat = chol_a.solve(&(phi.transpose() * &y_scaled)) * beta;
        let residual = &y_scaled - &phi * &m_hat;

        let log_det_a: f64 = chol_a.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let lml = 0.5 * (n as f64) * beta.ln() + 0.5 * (d_f as f64) * alpha.ln()
            - 0.5 * beta * residual.norm_squared()
            - 0.5 * alpha * m_hat.norm_squared()
            - 0.5 * log_det_a
            - 0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln();
        if !lml.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite marginal likelihood at epoch {epoch}"
            )));
        }
        loss_history.push(-lml);

        // ∂lml/∂Φ = β r m̂ᵀ − β Φ A⁻¹ (envelope theorem at the head optimum).
        let a_inv = chol_a.solve(&DMatrix::identity(d_f, d_f));
        let dphi = (&residual * m_hat.transpose() - &phi * &a_inv) * beta;

        let mut grads = vec![0.0; net.num_params()];
        for (i, cache) in caches.iter().enumerate() {
            let row: Vec<f64> = (0..d_f).map(|j| dphi[(i, j)]).collect();
            let (pg, _) = net.backward(cache, &row)?;
            for (g, p) in grads.iter_mut().zip(&pg) {
                *g += p;
            }
        }
        // Ascend the likelihood.
        for g in grads.iter_mut() {
            *g = -*g;
        }
        let mut flat = net.flat_params();
        if !adam.step(&mut flat, &grads) {
            return Err(Error::Numerical(format!(
                "non-finite feature gradient at epoch {epoch}"
            )));
        }
        net.set_flat_params(&flat);
    }

    // Final closed-form head on the trained features.
    let (phi, _) = head(&net)?;
    let a = DMatrix::identity(d_f, d_f) * alpha + phi.transpose() * &phi * beta;
    let chol_a = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("head precision matrix not PD".into()))?;
    let head_mean = chol_a.solve(&(phi.transpose() * &y_scaled)) * beta;

    Ok(GpModel {
        params: params.clone(),
        noise: 1.0 / beta,
        domain: data.domain().clone(),
        x_norm,
        y_scale,
        state: VariantState::Deep(DeepState {
            net,
            head_mean,
            chol_a,
            precision: beta,
            loss_history,
        }),
    })
}
