use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates mirroring a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        AdamState {
            m: Gradients::zeros_like(mlp),
            v: Gradients::zeros_like(mlp),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    fn matches(&self, mlp: &Mlp) -> bool {
        let same = |g: &Gradients| {
            g.layers.len() == mlp.layers().len()
                && g.layers.iter().zip(mlp.layers()).all(|(a, b)| {
                    a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
                })
        };
        same(&self.m) && same(&self.v)
    }
}

/// One bias-corrected Adam update. Fails without touching anything when a
/// gradient is non-finite.
pub fn adam_step(mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    if !state.matches(mlp) || grads.layers.len() != mlp.layers().len() {
        return Err(Error::shape("optimizer state or gradients do not match the network"));
    }
    if !grads.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite gradient at optimizer step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.t.min(i32::MAX as u64) as i32);
    let c2 = 1.0 - b2.powi(state.t.min(i32::MAX as u64) as i32);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    mlp.bump_version();
    let layers = mlp.layers_mut_no_bump();
    for (k, layer) in layers.iter_mut().enumerate() {
        let (g, m, v) = (&grads.layers[k], &mut state.m.layers[k], &mut state.v.layers[k]);
        update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer};

    fn scalar_net(w: f64) -> Mlp {
        let layer = DenseLayer {
            in_dim: 1,
            out_dim: 1,
            weights: vec![w],
            bias: vec![0.0],
        };
        Mlp::from_layers(vec![layer], Activation::Relu, Activation::Linear).unwrap()
    }

    fn scalar_grad(mlp: &Mlp, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(mlp);
        grads.layers[0].weights[0] = g;
        grads
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net);
        let g = scalar_grad(&net, 1.0);
        adam_step(&mut net, &g, &mut state, 1e-5).unwrap();
        let delta = net.layers()[0].weights[0];
        assert!((delta - (-1e-5 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!((delta + 9.99999e-6).abs() < 1e-11);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = scalar_net(0.7);
        let mut state = AdamState::new(&net);
        let g = Gradients::zeros_like(&net);
        adam_step(&mut net, &g, &mut state, 1e-3).unwrap();
        assert_eq!(net.layers()[0].weights[0], 0.7);
        assert_eq!(net.layers()[0].bias[0], 0.0);
    }

    #[test]
    fn matches_hand_executed_recurrence() {
        // Reference trace of the recurrence for g = 2, lr = 0.1, written out
        // step by step from the definitions.
        let (lr, g) = (0.1, 2.0);
        let mut p = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            p -= lr * m_hat / (v_hat.sqrt() + 1e-8);
            expected.push(p);
        }
        let mut net = scalar_net(1.0);
        let mut state = AdamState::new(&net);
        let grads = scalar_grad(&net, g);
        for want in expected {
            adam_step(&mut net, &grads, &mut state, lr).unwrap();
            assert!((net.layers()[0].weights[0] - want).abs() < 1e-12);
        }
        assert!(state.v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut net = scalar_net(0.5);
        let mut state = AdamState::new(&net);
        let g = scalar_grad(&net, f64::NAN);
        assert!(matches!(adam_step(&mut net, &g, &mut state, 1e-3), Err(Error::Numeric(_))));
        assert_eq!(net.layers()[0].weights[0], 0.5);
        assert_eq!(state.t, 0);
    }
}
