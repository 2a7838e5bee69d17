use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::condition::ConditionMap;
use super::loss::{d_loss_grad, g_loss_grad, Batch};
use super::model::GanModel;
use super::synth::{fingerprint_rmse, synthesize, ZPolicy};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::nn::adam_step;
use crate::sequence::SequenceParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the L1 reconstruction term.
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Number of generator updates.
    pub iterations: usize,
    pub z_dim: usize,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    /// Append the binned FA/TR descriptor to the condition.
    pub sequence_descriptor: bool,
    /// Generator steps between history rows; defaults to `max(1, iterations / 100)`.
    pub eval_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 100.0,
            lr: 1e-5,
            batch_size: 30,
            iterations: 20_000,
            z_dim: 32,
            seed: 0,
            d_steps_per_g_step: 1,
            sequence_descriptor: true,
            eval_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.d_steps_per_g_step == 0 {
            return Err(Error::config("batch size and discriminator steps must be >= 1"));
        }
        if self.eval_every == Some(0) {
            return Err(Error::config("evaluation interval must be >= 1"));
        }
        Ok(())
    }

    pub fn eval_interval(&self) -> usize {
        self.eval_every.unwrap_or((self.iterations / 100).max(1))
    }
}

/// One learning-curve sample. Losses are means over the preceding interval;
/// RMSEs compare zero-noise synthesis against the unit-norm benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub train_rmse: f64,
    /// NaN when no held-out set was supplied.
    pub test_rmse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("iteration,d_loss,g_loss,train_rmse,test_rmse\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration, r.d_loss, r.g_loss, r.train_rmse, r.test_rmse
            ));
        }
        s
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }
}

/// Cycles through seeded permutations of `0..n`, reshuffling at each epoch.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
}

impl Sampler {
    fn new(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Sampler { order, pos: 0 }
    }

    fn batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

fn noise(z_dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..z_dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Fits the GAN to a training set prepared with `scale_for_training`.
///
/// Each generator update is preceded by `d_steps_per_g_step` discriminator
/// updates. Every step draws its own minibatch from a per-epoch shuffle
/// and fresh noise. `test` is the optional held-out benchmark (unit norm)
/// tracked alongside the training set.
pub fn train(
    train_set: &Dictionary,
    test: Option<&Dictionary>,
    seq: &SequenceParams,
    config: &TrainConfig,
    on_eval: &mut dyn FnMut(&HistoryRow),
) -> Result<(GanModel, History)> {
    config.validate()?;
    let scale = train_set
        .train_scale()
        .ok_or_else(|| Error::config("training set must be scaled with scale_for_training"))?;
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if seq.n_frames() != train_set.n_frames() {
        return Err(Error::shape(format!(
            "sequence has {} frames, training set has {}",
            seq.n_frames(),
            train_set.n_frames()
        )));
    }
    if let Some(t) = test {
        if t.n_frames() != train_set.n_frames() {
            return Err(Error::shape("held-out set frame count differs from the training set"));
        }
    }
    let conditions = ConditionMap::fit(train_set.params(), config.sequence_descriptor)?;
    let descriptor = conditions.descriptor(seq);
    let ys: Vec<Vec<f64>> = train_set
        .params()
        .iter()
        .map(|p| conditions.condition(p, &descriptor))
        .collect();
    let mut model = GanModel::new(train_set.n_frames(), config.z_dim, conditions, scale, config.seed)?;
    let mut history = History::default();
    if config.iterations == 0 {
        return Ok((model, history));
    }

    let bench_train = train_set.unscaled();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_6a4e);
    let mut sampler = Sampler::new(train_set.n_atoms(), &mut rng);
    let interval = config.eval_interval();
    let (mut d_sum, mut g_sum, mut n_since) = (0.0, 0.0, 0usize);

    for step in 1..=config.iterations {
        let mut d_loss_step = 0.0;
        for _ in 0..config.d_steps_per_g_step {
            let idx = sampler.batch(config.batch_size, &mut rng);
            let real = Batch {
                x: idx.iter().map(|&j| train_set.atom(j).to_vec()).collect(),
                y: idx.iter().map(|&j| ys[j].clone()).collect(),
            };
            let fake_x = real
                .y
                .iter()
                .map(|y| model.generate(&noise(config.z_dim, &mut rng), y))
                .collect::<Result<Vec<_>>>()?;
            let fake = Batch { x: fake_x, y: real.y.clone() };
            let (loss, grads) = d_loss_grad(&real, &fake, &model)
                .map_err(|e| step_error(step, "discriminator", e, f64::NAN))?;
            adam_step(&mut model.discriminator, &grads, &mut model.d_opt, config.lr)
                .map_err(|e| step_error(step, "discriminator", e, loss))?;
            d_loss_step = loss;
        }

        let idx = sampler.batch(config.batch_size, &mut rng);
        let z: Vec<Vec<f64>> = idx.iter().map(|_| noise(config.z_dim, &mut rng)).collect();
        let y: Vec<Vec<f64>> = idx.iter().map(|&j| ys[j].clone()).collect();
        let x: Vec<Vec<f64>> = idx.iter().map(|&j| train_set.atom(j).to_vec()).collect();
        let (g_loss_step, grads) = g_loss_grad(&z, &y, &x, &model, config.lambda).map_err(|e| {
            Error::numeric(format!(
                "step {step}: d_loss {d_loss_step}, generator loss failed: {e}"
            ))
        })?;
        adam_step(&mut model.generator, &grads, &mut model.g_opt, config.lr).map_err(|e| {
            Error::numeric(format!("step {step}: d_loss {d_loss_step}, g_loss {g_loss_step}: {e}"))
        })?;

        d_sum += d_loss_step;
        g_sum += g_loss_step;
        n_since += 1;
        if step % interval == 0 || step == config.iterations {
            let at_step = |e: Error| {
                Error::numeric(format!(
                    "step {step}: d_loss {d_loss_step}, g_loss {g_loss_step}: evaluation failed: {e}"
                ))
            };
            let train_rmse = eval_rmse(&model, &bench_train, seq).map_err(at_step)?;
            let test_rmse = match test {
                Some(t) => eval_rmse(&model, t, seq).map_err(at_step)?,
                None => f64::NAN,
            };
            let row = HistoryRow {
                iteration: step,
                d_loss: d_sum / n_since as f64,
                g_loss: g_sum / n_since as f64,
                train_rmse,
                test_rmse,
            };
            on_eval(&row);
            history.rows.push(row);
            (d_sum, g_sum, n_since) = (0.0, 0.0, 0);
        }
    }
    Ok((model, history))
}

fn step_error(step: usize, net: &str, e: Error, loss: f64) -> Error {
    Error::numeric(format!("step {step}: {net} update failed (loss {loss}): {e}"))
}

fn eval_rmse(model: &GanModel, bench: &Dictionary, seq: &SequenceParams) -> Result<f64> {
    let (synth, _) = synthesize(model, bench.params(), seq, ZPolicy::Zeros)?;
    fingerprint_rmse(&synth, &bench.unscaled())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRow {
    pub lambda: f64,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable {
    pub rows: Vec<LambdaRow>,
    pub selected: f64,
}

impl LambdaTable {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("lambda,train_rmse,val_rmse,selected\n");
        for r in &self.rows {
            let sel = u8::from(r.lambda == self.selected);
            s.push_str(&format!("{},{},{},{}\n", r.lambda, r.train_rmse, r.val_rmse, sel));
        }
        s
    }
}

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

/// Trains one model per lambda under identical seeds and budgets and picks
/// the one with the smallest validation RMSE (ties go to the larger lambda).
pub fn validate_lambda(
    train_set: &Dictionary,
    val_set: &Dictionary,
    lambda_grid: &[f64],
    seq: &SequenceParams,
    config: &TrainConfig,
) -> Result<LambdaTable> {
    if lambda_grid.is_empty() {
        return Err(Error::config("lambda grid is empty"));
    }
    let bench_train = train_set.unscaled();
    let bench_val = val_set.unscaled();
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let cfg = TrainConfig { lambda, ..config.clone() };
        let label = |e: Error| Error::numeric(format!("lambda {lambda}: {e}"));
        let (model, _) = train(train_set, None, seq, &cfg, &mut |_| {}).map_err(label)?;
        rows.push(LambdaRow {
            lambda,
            train_rmse: eval_rmse(&model, &bench_train, seq).map_err(label)?,
            val_rmse: eval_rmse(&model, &bench_val, seq).map_err(label)?,
        });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.val_rmse.total_cmp(&b.val_rmse).then(b.lambda.total_cmp(&a.lambda)))
        .expect("grid is non-empty");
    Ok(LambdaTable {
        selected: best.lambda,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// Train/test RMSE against iteration, for plotting on a log iteration axis.
pub fn learning_curves(history: &History) -> Result<Vec<CurvePoint>> {
    if history.rows.is_empty() {
        return Err(Error::config("history is empty"));
    }
    Ok(history
        .rows
        .iter()
        .map(|r| CurvePoint {
            iteration: r.iteration,
            train_rmse: r.train_rmse,
            test_rmse: r.test_rmse,
        })
        .collect())
}

/// `iteration,log10_iteration,train_rmse,test_rmse`
pub fn curves_to_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("iteration,log10_iteration,train_rmse,test_rmse\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.iteration,
            (p.iteration.max(1) as f64).log10(),
            p.train_rmse,
            p.test_rmse
        ));
    }
    s
}
