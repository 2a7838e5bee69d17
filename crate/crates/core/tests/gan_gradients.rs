//! Central finite differences against the analytic loss gradients, on the
//! full-size generator and discriminator.

use mrf_core::gan::{d_loss, d_loss_grad, g_loss, g_loss_grad, Batch, ConditionMap, GanModel};
use mrf_core::nn::Mlp;
use mrf_core::{default_sequence, expand_grid, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRAMES: usize = 200;
const Z_DIM: usize = 32;
const H: f64 = 1e-6;
const SAMPLES: usize = 50;
const TOL: f64 = 1e-4;

fn model() -> GanModel {
    let params = expand_grid(&GridSpec::coarse()).unwrap();
    let map = ConditionMap::fit(&params, true).unwrap();
    GanModel::new(FRAMES, Z_DIM, map, 3.0, 11).unwrap()
}

fn conditions(m: &GanModel, rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let seq = default_sequence(FRAMES, 0).unwrap();
    let params = expand_grid(&GridSpec::coarse()).unwrap();
    let d = m.conditions.descriptor(&seq);
    (0..n)
        .map(|_| m.conditions.condition(&params[rng.random_range(0..params.len())], &d))
        .collect()
}

fn vectors(rng: &mut ChaCha8Rng, n: usize, len: usize, amp: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..len).map(|_| rng.random_range(-amp..amp)).collect())
        .collect()
}

fn set_param(net: &mut Mlp, mut k: usize, value: f64) {
    for layer in net.layers_mut() {
        let nw = layer.weights.len();
        if k < nw {
            layer.weights[k] = value;
            return;
        }
        k -= nw;
        if k < layer.bias.len() {
            layer.bias[k] = value;
            return;
        }
        k -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Checks `SAMPLES` random coordinates of `analytic` against central
/// differences of `loss`, perturbing the network picked by `net`.
fn check(
    mut m: GanModel,
    analytic: Vec<f64>,
    net: fn(&mut GanModel) -> &mut Mlp,
    loss: &dyn Fn(&GanModel) -> f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let k = rng.random_range(0..analytic.len());
        let orig = *net(&mut m).params().nth(k).unwrap();
        set_param(net(&mut m), k, orig + H);
        let plus = loss(&m);
        set_param(net(&mut m), k, orig - H);
        let minus = loss(&m);
        set_param(net(&mut m), k, orig);
        let numeric = (plus - minus) / (2.0 * H);
        worst = worst.max(rel_err(analytic[k], numeric));
    }
    worst
}

#[test]
fn discriminator_gradient_matches_finite_differences() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let real = Batch { x: vectors(&mut rng, 3, FRAMES, 0.9), y: conditions(&m, &mut rng, 3) };
    let fake = Batch { x: vectors(&mut rng, 3, FRAMES, 0.9), y: conditions(&m, &mut rng, 3) };
    let (_, grads) = d_loss_grad(&real, &fake, &m).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let worst = check(
        m,
        analytic,
        |m| &mut m.discriminator,
        &|m| d_loss(&real, &fake, m).unwrap(),
        2,
    );
    assert!(worst <= TOL, "max relative error {worst:e}");
}

#[test]
fn generator_gradient_matches_finite_differences() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = vectors(&mut rng, 3, Z_DIM, 2.0);
    let y = conditions(&m, &mut rng, 3);
    let x = vectors(&mut rng, 3, FRAMES, 0.9);
    let (_, grads) = g_loss_grad(&z, &y, &x, &m, 100.0).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let worst = check(
        m,
        analytic,
        |m| &mut m.generator,
        &|m| g_loss(&z, &y, &x, m, 100.0).unwrap(),
        4,
    );
    assert!(worst <= TOL, "max relative error {worst:e}");
}
