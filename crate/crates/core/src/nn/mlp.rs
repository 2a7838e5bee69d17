use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{axpy, dot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                // Branch keeps exp() from overflowing for large |x|.
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// d(post)/d(pre), written in terms of whichever is cheaper.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Tanh => 1.0 - post * post,
            Activation::Linear => 1.0,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Some(match id {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Linear,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

/// Fully connected layer; `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

static NEXT_MLP_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MLP_ID.fetch_add(1, Ordering::Relaxed)
}

/// Stack of dense layers: `hidden` after every layer but the last, `head`
/// after the last.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    hidden: Activation,
    head: Activation,
    // Identity and parameter version, so caches from other nets or from
    // before an update are rejected by backward().
    id: u64,
    version: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Mlp {
            layers: self.layers.clone(),
            hidden: self.hidden,
            head: self.head,
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.hidden == other.hidden && self.head == other.head
    }
}

/// Values recorded by a forward pass and consumed by the matching backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mlp_id: u64,
    version: u64,
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Pre-activations of the final layer (logits for a sigmoid head).
    pub fn head_pre_activation(&self) -> &[f64] {
        self.pre.last().expect("cache always holds at least one layer")
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(1.0, &b.weights, &mut a.weights);
            axpy(1.0, &b.bias, &mut a.bias);
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = 0.0);
        }
    }

    /// Flat view in layer order, weights before bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>, hidden: Activation, head: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::shape(format!("layer {k} has a zero dimension")));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::shape(format!("layer {k} parameter arrays do not match its dims")));
            }
            if k > 0 && layers[k - 1].out_dim != l.in_dim {
                return Err(Error::shape(format!(
                    "layer {k} expects {} inputs but layer {} emits {}",
                    l.in_dim,
                    k - 1,
                    layers[k - 1].out_dim
                )));
            }
        }
        Ok(Mlp {
            layers,
            hidden,
            head,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn head_activation(&self) -> Activation {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    fn activation_for(&self, k: usize) -> Activation {
        if k + 1 == self.layers.len() {
            self.head
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "layer 0 expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Evaluation without recording a cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(k);
            cur = (0..layer.out_dim)
                .map(|o| act.apply(layer.bias[o] + dot(layer.row(o), &cur)))
                .collect();
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(k);
            let z: Vec<f64> = (0..layer.out_dim)
                .map(|o| layer.bias[o] + dot(layer.row(o), &cur))
                .collect();
            let a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            inputs.push(std::mem::replace(&mut cur, a));
            pre.push(z);
        }
        let cache = ForwardCache {
            mlp_id: self.id,
            version: self.version,
            inputs,
            pre,
            output: cur.clone(),
        };
        Ok((cur, cache))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.mlp_id != self.id || cache.version != self.version {
            return Err(Error::shape(
                "forward cache is stale or belongs to a different network",
            ));
        }
        Ok(())
    }

    /// Gradients of `grad_output · y(x)` for the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let gi = self.backward_accumulate(cache, grad_output, false, &mut grads, true)?;
        Ok((grads, gi.expect("input gradient requested")))
    }

    /// Adds parameter gradients into `grads`. With `from_logits` the seed
    /// gradient is taken with respect to the head's pre-activation instead of
    /// its output. Returns the input gradient when `want_input` is set.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        grad: &[f64],
        from_logits: bool,
        grads: &mut Gradients,
        want_input: bool,
    ) -> Result<Option<Vec<f64>>> {
        self.check_cache(cache)?;
        if grad.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "output gradient has {} entries, network emits {}",
                grad.len(),
                self.output_dim()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("gradient accumulator does not match the network"));
        }
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = if from_logits {
            grad.to_vec()
        } else {
            let act = self.head;
            grad.iter()
                .zip(&cache.pre[last])
                .zip(&cache.output)
                .map(|((g, &z), &a)| g * act.derivative(z, a))
                .collect()
        };
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            let input = &cache.inputs[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    g.bias[o] += d;
                }
            }
            if k == 0 && !want_input {
                return Ok(None);
            }
            let mut upstream = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, layer.row(o), &mut upstream);
                }
            }
            if k == 0 {
                return Ok(Some(upstream));
            }
            // Previous layer's post-activation is this layer's input.
            let act = self.hidden;
            for ((u, &z), &a) in upstream.iter_mut().zip(&cache.pre[k - 1]).zip(input) {
                *u *= act.derivative(z, a);
            }
            delta = upstream;
        }
        unreachable!("loop returns at layer 0")
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    pub(crate) fn layers_mut_no_bump(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }
}

/// He-initialized network: weights ~ N(0, 2/in_dim), zero biases, ReLU
/// hidden layers.
pub fn init_mlp(dims: &[usize], head: Activation, seed: u64) -> Result<Mlp> {
    if dims.len() < 2 {
        return Err(Error::shape("network needs at least input and output dims"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (in_dim, out_dim) = (w[0], w[1]);
            let std = (2.0 / in_dim.max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            DenseLayer {
                in_dim,
                out_dim,
                weights: (0..in_dim * out_dim).map(|_| normal.sample(&mut rng)).collect(),
                bias: vec![0.0; out_dim],
            }
        })
        .collect();
    Mlp::from_layers(layers, Activation::Relu, head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn zero_net(head: Activation) -> Mlp {
        Mlp::from_layers(
            vec![DenseLayer::zeros(3, 4), DenseLayer::zeros(4, 2)],
            Activation::Relu,
            head,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs() {
        let x = [0.3, -1.0, 2.0];
        assert_eq!(zero_net(Activation::Sigmoid).forward(&x).unwrap().0, vec![0.5, 0.5]);
        assert_eq!(zero_net(Activation::Tanh).forward(&x).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn small_net_matches_matrix_oracle() {
        let net = init_mlp(&[2, 3, 1], Activation::Linear, 4).unwrap();
        let x = [0.7, -0.4];
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut h = [0.0; 3];
        for o in 0..3 {
            let mut z = l0.bias[o];
            for i in 0..2 {
                z += l0.weights[o * 2 + i] * x[i];
            }
            h[o] = if z > 0.0 { z } else { 0.0 };
        }
        let mut y = l1.bias[0];
        for i in 0..3 {
            y += l1.weights[i] * h[i];
        }
        let got = net.forward(&x).unwrap().0;
        assert!((got[0] - y).abs() < 1e-12);
        assert_eq!(net.predict(&x).unwrap(), got);
    }

    #[test]
    fn identity_layer_gradients() {
        let layer = DenseLayer {
            in_dim: 1,
            out_dim: 1,
            weights: vec![1.0],
            bias: vec![0.0],
        };
        let net = Mlp::from_layers(vec![layer], Activation::Relu, Activation::Linear).unwrap();
        let (_, cache) = net.forward(&[2.5]).unwrap();
        let (g, gi) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights, vec![2.5]);
        assert_eq!(g.layers[0].bias, vec![1.0]);
        assert_eq!(gi, vec![1.0]);
    }

    #[test]
    fn relu_gate_blocks_negative_units() {
        let l0 = DenseLayer {
            in_dim: 1,
            out_dim: 2,
            weights: vec![1.0, -1.0],
            bias: vec![0.0, 0.0],
        };
        let l1 = DenseLayer {
            in_dim: 2,
            out_dim: 1,
            weights: vec![1.0, 1.0],
            bias: vec![0.0],
        };
        let net = Mlp::from_layers(vec![l0, l1], Activation::Relu, Activation::Linear).unwrap();
        let (_, cache) = net.forward(&[2.0]).unwrap();
        let (g, _) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights, vec![2.0, 0.0]);
        assert_eq!(g.layers[1].weights, vec![2.0, 0.0]);
    }

    fn loss(net: &Mlp, x: &[f64], w: &[f64]) -> f64 {
        net.predict(x).unwrap().iter().zip(w).map(|(a, b)| a * b).sum()
    }

    fn max_fd_error(dims: &[usize], head: Activation, seed: u64) -> f64 {
        let mut net = init_mlp(dims, head, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
        }
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..*dims.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, gi) = net.backward(&cache, &w).unwrap();
        let h = 1e-6;
        let mut worst = 0.0f64;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-7);
        for k in 0..net.layers().len() {
            for idx in 0..net.layers()[k].weights.len() {
                let orig = net.layers()[k].weights[idx];
                net.layers_mut()[k].weights[idx] = orig + h;
                let up = loss(&net, &x, &w);
                net.layers_mut()[k].weights[idx] = orig - h;
                let down = loss(&net, &x, &w);
                net.layers_mut()[k].weights[idx] = orig;
                worst = worst.max(rel((up - down) / (2.0 * h), grads.layers[k].weights[idx]));
            }
            for idx in 0..net.layers()[k].bias.len() {
                let orig = net.layers()[k].bias[idx];
                net.layers_mut()[k].bias[idx] = orig + h;
                let up = loss(&net, &x, &w);
                net.layers_mut()[k].bias[idx] = orig - h;
                let down = loss(&net, &x, &w);
                net.layers_mut()[k].bias[idx] = orig;
                worst = worst.max(rel((up - down) / (2.0 * h), grads.layers[k].bias[idx]));
            }
        }
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let up = loss(&net, &xp, &w);
            xp[i] = x[i] - h;
            let down = loss(&net, &xp, &w);
            xp[i] = x[i];
            worst = worst.max(rel((up - down) / (2.0 * h), gi[i]));
        }
        worst
    }

    #[test]
    fn backward_matches_finite_differences() {
        for head in [Activation::Linear, Activation::Sigmoid, Activation::Tanh] {
            let err = max_fd_error(&[4, 8, 8, 1], head, 11);
            assert!(err <= 1e-5, "{head:?}: {err}");
        }
        let err = max_fd_error(&[6, 5, 3], Activation::Tanh, 2);
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = init_mlp(&[2, 2], Activation::Linear, 0).unwrap();
        let (_, cache) = net.forward(&[1.0, 2.0]).unwrap();
        let other = net.clone();
        assert!(other.backward(&cache, &[1.0, 1.0]).is_err());
        net.layers_mut()[0].bias[0] = 1.0;
        assert!(net.backward(&cache, &[1.0, 1.0]).is_err());
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn init_is_seeded_and_he_scaled() {
        let dims = [5, 128, 128, 128, 1000];
        let a = init_mlp(&dims, Activation::Tanh, 9).unwrap();
        let b = init_mlp(&dims, Activation::Tanh, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers().len(), 4);
        assert!(a.layers()[..3].iter().all(|l| l.out_dim == 128));
        let w = &a.layers()[1].weights;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let want = 2.0 / 128.0;
        assert!((var - want).abs() <= 0.2 * want, "{var} vs {want}");
    }

    #[test]
    fn activation_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-30.0..30.0);
            let s = Activation::Sigmoid.apply(x);
            let t = Activation::Tanh.apply(x * 0.3);
            assert!(s > 0.0 && s < 1.0, "{x} -> {s}");
            assert!(t > -1.0 && t < 1.0);
        }
    }
}
