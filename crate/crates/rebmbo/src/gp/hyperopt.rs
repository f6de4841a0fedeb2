//! Derivative-free kernel-hyperparameter search.
//!
//! All positive quantities (amplitude, lengthscales, mixture weights) are
//! optimized in log space, which enforces positivity by construction.
//! Multi-start Nelder-Mead; the returned parameters never score below the
//! initial ones. Above 8 input dimensions the per-dimension RBF
//! lengthscales are tied to a single shared value during the search — a
//! simplex over d+4 free parameters is useless on a ~200-evaluation budget.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::kernels::KernelParams;

use super::{log_marginal_likelihood, Dataset};

/// Dimension cutoff above which RBF lengthscales are tied during search.
const TIE_LENGTHSCALES_ABOVE: usize = 8;
const N_STARTS: usize = 4;
/// Internal seed for start perturbations; the search is a pure function of
/// its arguments.
const HYPEROPT_SEED: u64 = 0x6F70_7431;

/// Result of a hyperparameter search.
#[derive(Debug, Clone)]
pub struct HyperoptOutcome {
    pub params: KernelParams,
    /// Log marginal likelihood of `params`.
    pub lml: f64,
    /// Log marginal likelihood of the initial parameters.
    pub init_lml: f64,
    /// True when every start failed to produce a usable fit and the initial
    /// parameters were returned unchanged.
    pub fell_back: bool,
}

struct Packing {
    dim: usize,
    tied: bool,
}

impl Packing {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            tied: dim > TIE_LENGTHSCALES_ABOVE,
        }
    }

    fn n_vars(&self) -> usize {
        if self.tied {
            5
        } else {
            self.dim + 4
        }
    }

    fn pack(&self, p: &KernelParams) -> Vec<f64> {
        let mut v = vec![p.amplitude.ln()];
        if self.tied {
            // Geometric mean keeps the tied start close to the ARD values.
            let g = p.rbf_lengthscales.iter().map(|l| l.ln()).sum::<f64>()
                / p.rbf_lengthscales.len() as f64;
            v.push(g);
        } else {
            v.extend(p.rbf_lengthscales.iter().map(|l| l.ln()));
        }
        v.push(p.matern_lengthscale.ln());
        v.push(p.w_rbf.max(1e-8).ln());
        v.push(p.w_matern.max(1e-8).ln());
        v
    }

    fn unpack(&self, v: &[f64]) -> KernelParams {
        let mut idx = 0;
        let amplitude = v[idx].exp();
        idx += 1;
        let rbf_lengthscales = if self.tied {
            let l = v[idx].exp();
            idx += 1;
            vec![l; self.dim]
        } else {
            let ls: Vec<f64> = v[idx..idx + self.dim].iter().map(|x| x.exp()).collect();
            idx += self.dim;
            ls
        };
        let matern_lengthscale = v[idx].exp();
        let w_rbf = v[idx + 1].exp();
        let w_matern = v[idx + 2].exp();
        KernelParams {
            amplitude,
            rbf_lengthscales,
            matern_lengthscale,
            w_rbf,
            w_matern,
        }
    }
}

/// Multi-start Nelder-Mead ascent of the log marginal likelihood over
/// log-parameters. `budget` bounds the total number of likelihood
/// evaluations; the returned parameters score at least as high as `init`.
pub fn optimize_hyperparams(
    data: &Dataset,
    init: &KernelParams,
    noise: f64,
    budget: usize,
) -> HyperoptOutcome {
    let packing = Packing::new(init.dim());
    let mut evals_left = budget.max(1);

    let objective = |v: &[f64], evals_left: &mut usize| -> f64 {
        if *evals_left == 0 {
            return f64::NEG_INFINITY;
        }
        *evals_left -= 1;
        let params = packing.unpack(v);
        match log_marginal_likelihood(data, &params, noise) {
            Ok(l) if l.is_finite() => l,
            _ => f64::NEG_INFINITY,
        }
    };

    let x0 = packing.pack(init);
    let init_lml = objective(&x0, &mut evals_left);
    let mut best_v = x0.clone();
    let mut best_lml = init_lml;

    let mut rng = ChaCha8Rng::seed_from_u64(HYPEROPT_SEED);
    let per_start = (evals_left / N_STARTS).max(1);
    for start in 0..N_STARTS {
        if evals_left == 0 {
            break;
        }
        let mut v0 = x0.clone();
        if start > 0 {
            for vi in v0.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *vi += 0.5 * z;
            }
        }
        let allotment = per_start.min(evals_left);
        let (v, lml) = nelder_mead(
            |v, left| objective(v, left),
            &v0,
            allotment,
            &mut evals_left,
        );
        if lml > best_lml {
            best_lml = lml;
            best_v = v;
        }
    }

    if !best_lml.is_finite() {
        // Even the initial parameters failed to fit; hand them back flagged.
        return HyperoptOutcome {
            params: init.clone(),
            lml: f64::NEG_INFINITY,
            init_lml,
            fell_back: true,
        };
    }
    HyperoptOutcome {
        params: packing.unpack(&best_v),
        lml: best_lml,
        init_lml,
        fell_back: false,
    }
}

/// Classic Nelder-Mead maximization with reflection/expansion/contraction/
/// shrink. Stops when the evaluation allotment is spent or the simplex
/// collapses.
fn nelder_mead(
    mut f: impl FnMut(&[f64], &mut usize) -> f64,
    x0: &[f64],
    allotment: usize,
    evals_left: &mut usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut used = 0usize;
    let mut eval = |x: &[f64], evals_left: &mut usize, used: &mut usize| -> f64 {
        if *used >= allotment {
            return f64::NEG_INFINITY;
        }
        *used += 1;
        f(x, evals_left)
    };

    // Initial simplex: x0 plus coordinate steps.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, evals_left, &mut used);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += 0.25;
        let fx = eval(&x, evals_left, &mut used);
        simplex.push((x, fx));
    }

    while used < allotment {
        // Sort descending (maximization): best first.
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let worst = simplex[n].clone();
        let spread = simplex[0].1 - worst.1;
        if spread.abs() < 1e-12 && spread.is_finite() {
            break;
        }

        // Centroid excluding the worst vertex.
        let mut centroid = vec![0.0; n];
        for (x, _) in simplex.iter().take(n) {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }

        let blend = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(&c, &w)| c + a * (c - w))
                .collect()
        };

        let reflected = blend(1.0);
        let fr = eval(&reflected, evals_left, &mut used);
        if fr > simplex[0].1 {
            let expanded = blend(2.0);
            let fe = eval(&expanded, evals_left, &mut used);
            simplex[n] = if fe > fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = blend(-0.5);
            let fc = eval(&contracted, evals_left, &mut used);
            if fc > worst.1 {
                simplex[n] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(&b, &x)| b + 0.5 * (x - b))
                        .collect();
                    let fs = eval(&shrunk, evals_left, &mut used);
                    *entry = (shrunk, fs);
                }
            }
        }
    }

    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    simplex.remove(0)
}
