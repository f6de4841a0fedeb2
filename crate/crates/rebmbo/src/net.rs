//! Minimal neural substrate shared by the energy model and the policy:
//! dense MLPs (optionally with residual blocks), exact reverse-mode
//! gradients for parameters and inputs, Kaiming initialization, global-norm
//! clipping, and an Adam optimizer over flat parameter vectors.
//!
//! Everything is double precision; networks here are tiny and the gradient
//! checks demand it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;
use crate::error::{Error, Result};

/// Elementwise activation applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// LeakyReLU with slope 0.2 on the negative side.
    LeakyRelu,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    z
                } else {
                    0.2 * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation z.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.2
                }
            }
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `act(W x + b)`.
#[derive(Debug, Clone)]
pub struct Dense {
    /// Weight matrix, `out_dim x in_dim`.
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub activation: Activation,
}

impl Dense {
    fn kaiming(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        let weights = DMatrix::from_fn(out_dim, in_dim, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            std * z
        });
        Self {
            weights,
            biases: DVector::zeros(out_dim),
            activation,
        }
    }

    fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let z = &self.weights * x + &self.biases;
        let a = z.map(|v| self.activation.apply(v));
        (a, z)
    }
}

/// A network block: a plain dense layer or a residual group
/// `y = x + g(x)` where `g` is a dense-layer composition.
#[derive(Debug, Clone)]
pub enum Block {
    Dense(Dense),
    /// Skip connection; inner composition must map back to the input width.
    Residual(Vec<Dense>),
}

/// Feed-forward network built from blocks.
#[derive(Debug, Clone)]
pub struct Mlp {
    blocks: Vec<Block>,
    in_dim: usize,
    out_dim: usize,
}

/// Pre-activations and inputs recorded by a forward pass, consumed by
/// `backward` for exact gradients.
#[derive(Debug, Clone)]
pub struct Cache {
    input: DVector<f64>,
    /// Per dense layer (in block order): (layer input, pre-activation z).
    layers: Vec<(DVector<f64>, DVector<f64>)>,
}

impl Mlp {
    /// Plain dense chain: `layer_sizes = [in, h1, ..., out]`, the given
    /// activation on hidden layers and identity on the last. Kaiming-normal
    /// weights, zero biases, deterministic under `seed`.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Param("need at least input and output sizes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::new();
        for w in layer_sizes.windows(2).enumerate() {
            let (idx, pair) = w;
            let act = if idx + 2 == layer_sizes.len() {
                Activation::Identity
            } else {
                activation
            };
            blocks.push(Block::Dense(Dense::kaiming(pair[0], pair[1], act, &mut rng)));
        }
        Ok(Self {
            blocks,
            in_dim: layer_sizes[0],
            out_dim: *layer_sizes.last().unwrap(),
        })
    }

    /// Residual architecture: input -> hidden, then `n_blocks` residual
    /// groups (hidden -> latent -> hidden with a skip), then hidden -> out.
    pub fn with_residual_blocks(
        in_dim: usize,
        hidden: usize,
        latent: usize,
        n_blocks: usize,
        out_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = vec![Block::Dense(Dense::kaiming(in_dim, hidden, activation, &mut rng))];
        for _ in 0..n_blocks {
            blocks.push(Block::Residual(vec![
                Dense::kaiming(hidden, latent, activation, &mut rng),
                Dense::kaiming(latent, hidden, Activation::Identity, &mut rng),
            ]));
        }
        blocks.push(Block::Dense(Dense::kaiming(
            hidden,
            out_dim,
            Activation::Identity,
            &mut rng,
        )));
        Self {
            blocks,
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_params(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(d) => d.num_params(),
                Block::Residual(ds) => ds.iter().map(Dense::num_params).sum(),
            })
            .sum()
    }

    fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.blocks.iter().flat_map(|b| match b {
            Block::Dense(d) => std::slice::from_ref(d).iter(),
            Block::Residual(ds) => ds.iter(),
        })
    }

    fn dense_layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.blocks.iter_mut().flat_map(|b| match b {
            Block::Dense(d) => std::slice::from_mut(d).iter_mut(),
            Block::Residual(ds) => ds.iter_mut(),
        })
    }

    /// Parameters flattened layer by layer (weights row-major, then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for d in self.dense_layers() {
            for r in 0..d.weights.nrows() {
                for c in 0..d.weights.ncols() {
                    out.push(d.weights[(r, c)]);
                }
            }
            out.extend(d.biases.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length mismatch");
        let mut k = 0;
        for d in self.dense_layers_mut() {
            for r in 0..d.weights.nrows() {
                for c in 0..d.weights.ncols() {
                    d.weights[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for r in 0..d.biases.len() {
                d.biases[r] = flat[k];
                k += 1;
            }
        }
    }

    /// Forward pass; the cache holds everything `backward` needs.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        if input.len() != self.in_dim {
            return Err(Error::Input(format!(
                "expected input dim {}, got {}",
                self.in_dim,
                input.len()
            )));
        }
        let mut x = DVector::from_column_slice(input);
        let mut layers = Vec::new();
        let cache_input = x.clone();
        for block in &self.blocks {
            match block {
                Block::Dense(d) => {
                    let (a, z) = d.forward(&x);
                    layers.push((x, z));
                    x = a;
                }
                Block::Residual(ds) => {
                    let skip = x.clone();
                    let mut h = x;
                    for d in ds {
                        let (a, z) = d.forward(&h);
                        layers.push((h, z));
                        h = a;
                    }
                    x = skip + h;
                }
            }
        }
        Ok((
            x.iter().copied().collect(),
            Cache {
                input: cache_input,
                layers,
            },
        ))
    }

    /// Exact reverse-mode gradients of `output · grad_output` with respect
    /// to all parameters (flat, same order as `flat_params`) and the input.
    pub fn backward(&self, cache: &Cache, grad_output: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if grad_output.len() != self.out_dim {
            return Err(Error::Input("grad_output dim mismatch".into()));
        }
        let total_layers: usize = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Dense(_) => 1,
                Block::Residual(ds) => ds.len(),
            })
            .sum();
        if cache.layers.len() != total_layers {
            return Err(Error::Input("stale cache: layer count mismatch".into()));
        }

        let mut flat_grads = vec![0.0; self.num_params()];
        // Per-layer flat offsets, in forward order.
        let mut offsets = Vec::with_capacity(total_layers);
        let mut off = 0;
        for d in self.dense_layers() {
            offsets.push(off);
            off += d.num_params();
        }

        let mut grad = DVector::from_column_slice(grad_output);
        let mut layer_idx = cache.layers.len();

        let backprop_dense =
            |d: &Dense, idx: usize, grad: &DVector<f64>, flat: &mut [f64]| -> DVector<f64> {
                let (inp, z) = &cache.layers[idx];
                // delta = grad ⊙ act'(z)
                let delta =
                    DVector::from_fn(z.len(), |r, _| grad[r] * d.activation.derivative(z[r]));
                let base = offsets[idx];
                let (rows, cols) = (d.weights.nrows(), d.weights.ncols());
                for r in 0..rows {
                    for c in 0..cols {
                        flat[base + r * cols + c] += delta[r] * inp[c];
                    }
                }
                for r in 0..rows {
                    flat[base + rows * cols + r] += delta[r];
                }
                d.weights.transpose() * delta
            };

        for block in self.blocks.iter().rev() {
            match block {
                Block::Dense(d) => {
                    layer_idx -= 1;
                    grad = backprop_dense(d, layer_idx, &grad, &mut flat_grads);
                }
                Block::Residual(ds) => {
                    let skip_grad = grad.clone();
                    let mut g = grad;
                    for d in ds.iter().rev() {
                        layer_idx -= 1;
                        g = backprop_dense(d, layer_idx, &g, &mut flat_grads);
                    }
                    grad = g + skip_grad;
                }
            }
        }
        debug_assert_eq!(grad.len(), cache.input.len());
        Ok((flat_grads, grad.iter().copied().collect()))
    }
}

/// If the global L2 norm of `grads` exceeds `max_norm`, scale all entries by
/// `max_norm / norm`. Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be > 0");
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Adam over a flat parameter vector, with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step_count: u64,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update in place. Non-finite gradients skip the update entirely
    /// and return false.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> bool {
        assert_eq!(params.len(), self.m.len(), "parameter shape mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient shape mismatch");
        if grads.iter().any(|g| !g.is_finite()) {
            return false;
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Central finite differences of a scalar function of the flat params.
    pub(crate) fn fd_grad(f: &mut dyn FnMut(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
        let mut g = vec![0.0; at.len()];
        let mut x = at.to_vec();
        for i in 0..at.len() {
            let orig = x[i];
            x[i] = orig + h;
            let fp = f(&x);
            x[i] = orig - h;
            let fm = f(&x);
            x[i] = orig;
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn init_deterministic_and_shaped() {
        let a = Mlp::new(&[4, 8, 1], Activation::Relu, 9).unwrap();
        let b = Mlp::new(&[4, 8, 1], Activation::Relu, 9).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        match (&a.blocks[0], &a.blocks[1]) {
            (Block::Dense(d0), Block::Dense(d1)) => {
                assert_eq!((d0.weights.nrows(), d0.weights.ncols()), (8, 4));
                assert_eq!((d1.weights.nrows(), d1.weights.ncols()), (1, 8));
            }
            _ => panic!("expected dense blocks"),
        }
        assert!(Mlp::new(&[4], Activation::Relu, 0).is_err());
    }

    #[test]
    fn kaiming_std_statistics() {
        let net = Mlp::new(&[256, 512], Activation::Relu, 3).unwrap();
        let Block::Dense(d) = &net.blocks[0] else {
            panic!()
        };
        let vals: Vec<f64> = d.weights.iter().copied().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std =
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        let expected = (2.0 / 256.0f64).sqrt();
        assert!((std - expected).abs() / expected < 0.2, "std {std} vs {expected}");
        assert!(d.biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn forward_identity_and_zero() {
        // Identity-configured single linear layer.
        let mut net = Mlp::new(&[3, 3], Activation::Identity, 0).unwrap();
        let n = net.num_params();
        let mut flat = vec![0.0; n];
        // weights = I
        for i in 0..3 {
            flat[i * 3 + i] = 1.0;
        }
        net.set_flat_params(&flat);
        let (out, _) = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![1.0, -2.0, 3.0]);

        // Zero weights, zero bias -> zero output.
        let mut zero = Mlp::new(&[3, 4, 2], Activation::Relu, 0).unwrap();
        zero.set_flat_params(&vec![0.0; zero.num_params()]);
        let (out, _) = zero.forward(&[0.5, 0.6, 0.7]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));

        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (arch, act, seed) in [
            (vec![3, 8, 5, 2], Activation::Tanh, 1u64),
            (vec![4, 16, 1], Activation::LeakyRelu, 2),
            (vec![2, 32, 32, 3], Activation::Relu, 3),
        ] {
            let net = Mlp::new(&arch, act, seed).unwrap();
            let input: Vec<f64> = (0..arch[0]).map(|i| 0.3 * (i as f64 + 1.0)).collect();
            let grad_out: Vec<f64> =
                (0..*arch.last().unwrap()).map(|i| 1.0 - 0.4 * i as f64).collect();

            let (_, cache) = net.forward(&input).unwrap();
            let (pg, ig) = net.backward(&cache, &grad_out).unwrap();

            let mut probe = net.clone();
            let go = grad_out.clone();
            let inp = input.clone();
            let mut f = |p: &[f64]| {
                probe.set_flat_params(p);
                let (o, _) = probe.forward(&inp).unwrap();
                o.iter().zip(&go).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd = fd_grad(&mut f, &net.flat_params(), 1e-5);
            for (i, (&a, &n)) in pg.iter().zip(&fd).enumerate() {
                assert!(rel_err(a, n) < 1e-4, "param grad {i}: analytic {a} vs fd {n}");
            }

            // Input gradient check.
            let net2 = net.clone();
            let go2 = grad_out.clone();
            let mut fx = |x: &[f64]| {
                let (o, _) = net2.forward(x).unwrap();
                o.iter().zip(&go2).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd_in = fd_grad(&mut fx, &input, 1e-5);
            for (i, (&a, &n)) in ig.iter().zip(&fd_in).enumerate() {
                assert!(rel_err(a, n) < 1e-4, "input grad {i}: analytic {a} vs fd {n}");
            }
        }
    }

    #[test]
    fn residual_backward_matches_finite_differences() {
        let net = Mlp::with_residual_blocks(3, 8, 6, 2, 1, Activation::LeakyRelu, 7);
        let input = [0.4, -0.9, 0.15];
        let (_, cache) = net.forward(&input).unwrap();
        let (pg, ig) = net.backward(&cache, &[1.0]).unwrap();

        let mut probe = net.clone();
        let mut f = |p: &[f64]| {
            probe.set_flat_params(p);
            probe.forward(&input).unwrap().0[0]
        };
        let fd = fd_grad(&mut f, &net.flat_params(), 1e-5);
        for (i, (&a, &n)) in pg.iter().zip(&fd).enumerate() {
            assert!(rel_err(a, n) < 1e-4, "residual param grad {i}: {a} vs {n}");
        }
        let net2 = net.clone();
        let mut fx = |x: &[f64]| net2.forward(x).unwrap().0[0];
        let fd_in = fd_grad(&mut fx, &input, 1e-5);
        for (i, (&a, &n)) in ig.iter().zip(&fd_in).enumerate() {
            assert!(rel_err(a, n) < 1e-4, "residual input grad {i}: {a} vs {n}");
        }
    }

    #[test]
    fn backward_trivial_cases() {
        let net = Mlp::new(&[3, 2], Activation::Identity, 4).unwrap();
        let (_, cache) = net.forward(&[1.0, 1.0, 1.0]).unwrap();

        // Zero grad_output -> all-zero gradients.
        let (pg, ig) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(pg.iter().all(|&g| g == 0.0));
        assert!(ig.iter().all(|&g| g == 0.0));

        // Linear layer with grad_output = 1: input grad = column sums of W.
        let (_, ig) = net.backward(&cache, &[1.0, 1.0]).unwrap();
        let Block::Dense(d) = &net.blocks[0] else {
            panic!()
        };
        for c in 0..3 {
            let col_sum: f64 = (0..2).map(|r| d.weights[(r, c)]).sum();
            assert_abs_diff_eq!(ig[c], col_sum, epsilon = 1e-12);
        }

        // Stale cache rejected.
        let other = Mlp::new(&[3, 5, 2], Activation::Identity, 4).unwrap();
        assert!(other.backward(&cache, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn adam_basics() {
        let mut adam = Adam::new(3, 0.1);
        let mut params = vec![1.0, 2.0, 3.0];
        let before = params.clone();
        assert!(adam.step(&mut params, &[0.0, 0.0, 0.0]));
        assert_eq!(params, before, "zero gradients leave params unchanged");

        // Non-finite gradient: skipped.
        assert!(!adam.step(&mut params, &[f64::NAN, 0.0, 0.0]));
        assert_eq!(params, before);
        assert_eq!(adam.step_count(), 1);

        // Constant gradient: step magnitude approaches lr * sign(g).
        let mut adam = Adam::new(1, 0.05);
        let mut p = vec![0.0];
        for _ in 0..500 {
            adam.step(&mut p, &[2.5]);
        }
        let prev = p[0];
        adam.step(&mut p, &[2.5]);
        assert_abs_diff_eq!(prev - p[0], 0.05, epsilon = 1e-3);
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        // d/dx of 1/2 x^2 is x; start far away.
        let mut adam = Adam::new(2, 1e-2);
        let mut x = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = x.clone();
            adam.step(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "converged to {x:?}");
    }

    #[test]
    fn clip_norm_behavior() {
        let mut g = vec![3.0, 4.0]; // norm 5
        let pre = clip_global_norm(&mut g, 10.0);
        assert_abs_diff_eq!(pre, 5.0, epsilon = 1e-12);
        assert_eq!(g, vec![3.0, 4.0]);

        let pre = clip_global_norm(&mut g, 2.5);
        assert_abs_diff_eq!(pre, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-12);

        let mut big: Vec<f64> = (0..50).map(|i| (i as f64 - 25.0) * 0.7).collect();
        clip_global_norm(&mut big, 1.0);
        let post = big.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(post <= 1.0 + 1e-9);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = Mlp::with_residual_blocks(2, 6, 4, 1, 1, Activation::Tanh, 11);
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.num_params());
        let mut doubled = flat.clone();
        for v in &mut doubled {
            *v *= 2.0;
        }
        net.set_flat_params(&doubled);
        assert_eq!(net.flat_params(), doubled);
    }
}
