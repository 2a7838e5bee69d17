//! Negated alternating objectives of the conditional, L1-regularized GAN.
//!
//! Loss values clamp probabilities to `[PROB_CLAMP, 1 - PROB_CLAMP]` before
//! taking logs. Gradients are taken through the discriminator logit, where
//! `d(-log σ(a))/da = σ(a) - 1` and `d(-log(1 - σ(a)))/da = σ(a)`; these agree
//! with the clamped losses wherever the clamp is inactive.

use super::model::{concat, GanModel};
use crate::error::{Error, Result};
use crate::nn::Gradients;

pub const PROB_CLAMP: f64 = 1e-12;

/// Fingerprints paired with their conditions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(Error::shape(format!(
                "{name} batch needs matching non-empty x/y, got {} and {}",
                self.x.len(),
                self.y.len()
            )));
        }
        Ok(())
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-mean log D(x|y) - mean log(1 - D(G(z|y)|y))` from the two probability lists.
pub fn d_loss_from_probs(real: &[f64], fake: &[f64]) -> f64 {
    let real_term = real.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / real.len() as f64;
    let fake_term = fake.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / fake.len() as f64;
    -real_term - fake_term
}

/// `-mean log D(G(z|y)|y) + lambda * mean ||x - G(z|y)||_1`.
pub fn g_loss_from_parts(fake: &[f64], l1: &[f64], lambda: f64) -> f64 {
    let adv = fake.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / fake.len() as f64;
    let rec = l1.iter().sum::<f64>() / l1.len() as f64;
    -adv + lambda * rec
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numeric(format!("{what} is not finite ({value})")))
    }
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
}

fn check_frames(model: &GanModel, batch: &Batch) -> Result<()> {
    if let Some(x) = batch.x.iter().find(|x| x.len() != model.n_frames) {
        return Err(Error::shape(format!(
            "fingerprint has {} frames, model expects {}",
            x.len(),
            model.n_frames
        )));
    }
    Ok(())
}

pub fn d_loss(real: &Batch, fake: &Batch, model: &GanModel) -> Result<f64> {
    real.check("real")?;
    fake.check("fake")?;
    check_frames(model, real)?;
    check_frames(model, fake)?;
    let probs = |b: &Batch| -> Result<Vec<f64>> {
        b.x.iter().zip(&b.y).map(|(x, y)| model.discriminate(x, y)).collect()
    };
    finite(d_loss_from_probs(&probs(real)?, &probs(fake)?), "discriminator loss")
}

/// Discriminator loss and its gradient with respect to the discriminator.
pub fn d_loss_grad(real: &Batch, fake: &Batch, model: &GanModel) -> Result<(f64, Gradients)> {
    real.check("real")?;
    fake.check("fake")?;
    check_frames(model, real)?;
    check_frames(model, fake)?;
    let d = &model.discriminator;
    let mut grads = Gradients::zeros_like(d);
    let mut real_p = Vec::with_capacity(real.len());
    let mut fake_p = Vec::with_capacity(fake.len());
    for (batch, probs, is_real) in [(real, &mut real_p, true), (fake, &mut fake_p, false)] {
        let inv = 1.0 / batch.len() as f64;
        for (x, y) in batch.x.iter().zip(&batch.y) {
            let (out, cache) = d.forward(&concat(x, y))?;
            let p = out[0];
            probs.push(p);
            let dlogit = if is_real { p - 1.0 } else { p };
            d.backward_accumulate(&cache, &[dlogit * inv], true, &mut grads, false)?;
        }
    }
    let loss = finite(d_loss_from_probs(&real_p, &fake_p), "discriminator loss")?;
    Ok((loss, grads))
}

fn check_g_inputs(z: &[Vec<f64>], y: &[Vec<f64>], real: &[Vec<f64>], model: &GanModel) -> Result<()> {
    if z.is_empty() || z.len() != y.len() || z.len() != real.len() {
        return Err(Error::shape(format!(
            "generator batch needs aligned non-empty z/y/x, got {}/{}/{}",
            z.len(),
            y.len(),
            real.len()
        )));
    }
    if let Some(x) = real.iter().find(|x| x.len() != model.n_frames) {
        return Err(Error::shape(format!(
            "fingerprint has {} frames, model expects {}",
            x.len(),
            model.n_frames
        )));
    }
    Ok(())
}

pub fn g_loss(
    z: &[Vec<f64>],
    y: &[Vec<f64>],
    real: &[Vec<f64>],
    model: &GanModel,
    lambda: f64,
) -> Result<f64> {
    check_g_inputs(z, y, real, model)?;
    let mut probs = Vec::with_capacity(z.len());
    let mut l1 = Vec::with_capacity(z.len());
    for ((z, y), x) in z.iter().zip(y).zip(real) {
        let fake = model.generate(z, y)?;
        probs.push(model.discriminate(&fake, y)?);
        l1.push(l1_distance(x, &fake));
    }
    finite(g_loss_from_parts(&probs, &l1, lambda), "generator loss")
}

/// Generator loss and its gradient with respect to the generator, taken
/// through the (frozen) discriminator.
pub fn g_loss_grad(
    z: &[Vec<f64>],
    y: &[Vec<f64>],
    real: &[Vec<f64>],
    model: &GanModel,
    lambda: f64,
) -> Result<(f64, Gradients)> {
    check_g_inputs(z, y, real, model)?;
    let g = &model.generator;
    let d = &model.discriminator;
    let inv = 1.0 / z.len() as f64;
    let mut grads = Gradients::zeros_like(g);
    let mut scratch = Gradients::zeros_like(d);
    let mut probs = Vec::with_capacity(z.len());
    let mut l1 = Vec::with_capacity(z.len());
    for ((z, y), x) in z.iter().zip(y).zip(real) {
        let (fake, g_cache) = g.forward(&concat(z, y))?;
        let (out, d_cache) = d.forward(&concat(&fake, y))?;
        let p = out[0];
        probs.push(p);
        l1.push(l1_distance(x, &fake));
        let d_input = d
            .backward_accumulate(&d_cache, &[(p - 1.0) * inv], true, &mut scratch, true)?
            .expect("input gradient requested");
        let grad_fake: Vec<f64> = d_input[..model.n_frames]
            .iter()
            .zip(&fake)
            .zip(x)
            .map(|((gd, f), r)| {
                let sign = if f > r {
                    1.0
                } else if f < r {
                    -1.0
                } else {
                    0.0
                };
                gd + lambda * inv * sign
            })
            .collect();
        g.backward_accumulate(&g_cache, &grad_fake, false, &mut grads, false)?;
    }
    let loss = finite(g_loss_from_parts(&probs, &l1, lambda), "generator loss")?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::condition::ConditionMap;
    use crate::nn::DenseLayer;
    use crate::tissue::TissueParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn model(frames: usize) -> GanModel {
        let map = ConditionMap::fit(
            &[TissueParams::new(100.0, 10.0).unwrap(), TissueParams::new(2000.0, 300.0).unwrap()],
            false,
        )
        .unwrap();
        GanModel::new(frames, 4, map, 10.0, 7).unwrap()
    }

    /// Zero the discriminator's last layer so it outputs exactly 0.5.
    fn neutral_discriminator(m: &mut GanModel) {
        let last = m.discriminator.layers_mut().last_mut().unwrap();
        *last = DenseLayer::zeros(last.in_dim, 1);
    }

    #[test]
    fn fixed_point_values() {
        assert!((d_loss_from_probs(&[0.5; 3], &[0.5; 4]) - 2.0 * LN2).abs() < 1e-15);
        assert!(d_loss_from_probs(&[1.0 - 1e-12], &[1e-12]).abs() < 1e-11);
        assert!(d_loss_from_probs(&[1.0], &[0.0]).is_finite());
        assert!((g_loss_from_parts(&[0.5; 2], &[0.0; 2], 100.0) - LN2).abs() < 1e-15);
        let l1 = 200.0 * 0.01;
        assert!((g_loss_from_parts(&[0.5], &[l1], 100.0) - (LN2 + 200.0)).abs() < 1e-9);
    }

    #[test]
    fn neutral_discriminator_losses() {
        let mut m = model(6);
        neutral_discriminator(&mut m);
        let y = vec![vec![0.1, -0.3], vec![0.5, 0.2]];
        let z = vec![vec![0.3, -0.2, 0.1, 0.0], vec![-0.5, 0.4, 0.9, 0.1]];
        let fake: Vec<Vec<f64>> = z.iter().zip(&y).map(|(z, y)| m.generate(z, y).unwrap()).collect();
        let real = Batch { x: fake.clone(), y: y.clone() };
        let fake_b = Batch { x: fake.clone(), y: y.clone() };
        assert!((d_loss(&real, &fake_b, &m).unwrap() - 2.0 * LN2).abs() < 1e-9);
        for lambda in [0.0, 1.0, 100.0] {
            assert!((g_loss(&z, &y, &fake, &m, lambda).unwrap() - LN2).abs() < 1e-9);
        }
        let other = vec![vec![0.7; 6], vec![-0.7; 6]];
        assert!((g_loss(&z, &y, &other, &m, 0.0).unwrap() - LN2).abs() < 1e-9);
    }

    #[test]
    fn batch_values_match_scalar_evaluation() {
        let m = model(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rv = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.9..0.9)).collect() };
        let real = Batch { x: (0..3).map(|_| rv(5)).collect(), y: (0..3).map(|_| rv(2)).collect() };
        let fake = Batch { x: (0..2).map(|_| rv(5)).collect(), y: (0..2).map(|_| rv(2)).collect() };
        let mut expect = 0.0;
        for (x, y) in real.x.iter().zip(&real.y) {
            expect -= m.discriminate(x, y).unwrap().clamp(1e-12, 1.0 - 1e-12).ln() / 3.0;
        }
        for (x, y) in fake.x.iter().zip(&fake.y) {
            expect -= (1.0 - m.discriminate(x, y).unwrap().clamp(1e-12, 1.0 - 1e-12)).ln() / 2.0;
        }
        assert!((d_loss(&real, &fake, &m).unwrap() - expect).abs() < 1e-12);
        let (with_grad, _) = d_loss_grad(&real, &fake, &m).unwrap();
        assert!((with_grad - expect).abs() < 1e-12);
    }

    #[test]
    fn g_loss_is_affine_in_lambda() {
        let m = model(5);
        let z = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let y = vec![vec![0.0, 0.5]];
        let x = vec![vec![0.2, -0.1, 0.0, 0.3, 0.1]];
        let fake = m.generate(&z[0], &y[0]).unwrap();
        let l1: f64 = fake.iter().zip(&x[0]).map(|(a, b)| (a - b).abs()).sum();
        let base = g_loss(&z, &y, &x, &m, 0.0).unwrap();
        for lambda in [0.5, 3.0, 100.0] {
            let v = g_loss(&z, &y, &x, &m, lambda).unwrap();
            assert!((v - (base + lambda * l1)).abs() <= 1e-9 * v.abs().max(1.0));
            assert!(v >= base);
        }
    }

    #[test]
    fn rejects_misaligned_batches() {
        let m = model(5);
        assert!(g_loss(&[vec![0.0; 4]], &[], &[vec![0.0; 5]], &m, 1.0).is_err());
        let bad = Batch { x: vec![vec![0.0; 3]], y: vec![vec![0.0; 2]] };
        assert!(d_loss(&bad, &bad, &m).is_err());
    }
}
