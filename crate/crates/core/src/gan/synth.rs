use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::model::{concat, GanModel};
use crate::dictionary::{l2_norm, normalize_atoms, Dictionary};
use crate::error::{Error, Result};
use crate::sequence::SequenceParams;
use crate::tissue::TissueParams;

/// Noise fed to the generator at synthesis time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZPolicy {
    #[default]
    Zeros,
    /// Fresh N(0, 1) noise per atom; atom `j` draws from stream `j` of the seed.
    Seeded(u64),
}

impl ZPolicy {
    fn noise(&self, z_dim: usize, atom: usize) -> Vec<f64> {
        match *self {
            ZPolicy::Zeros => vec![0.0; z_dim],
            ZPolicy::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(atom as u64);
                (0..z_dim).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthTiming {
    pub atoms: usize,
    pub frames: usize,
    pub wall_seconds: f64,
}

/// Builds a unit-norm dictionary from generator passes, one per tissue.
///
/// The sequence descriptor is taken from `seq` when the model conditions on
/// it, so a model can be queried for a different schedule of the same length.
pub fn synthesize(
    model: &GanModel,
    params: &[TissueParams],
    seq: &SequenceParams,
    z_policy: ZPolicy,
) -> Result<(Dictionary, SynthTiming)> {
    if params.is_empty() {
        return Err(Error::config("cannot synthesize an empty parameter list"));
    }
    if seq.n_frames() != model.n_frames {
        return Err(Error::shape(format!(
            "sequence has {} frames, model generates {}",
            seq.n_frames(),
            model.n_frames
        )));
    }
    let descriptor = model.conditions.descriptor(seq);
    if 2 + descriptor.len() != model.generator.input_dim() - model.z_dim {
        return Err(Error::shape(format!(
            "condition length {} does not match the checkpoint's y_dim {}",
            2 + descriptor.len(),
            model.y_dim()
        )));
    }
    let started = Instant::now();
    let columns: Vec<Vec<f64>> = params
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let y = model.conditions.condition(p, &descriptor);
            let z = z_policy.noise(model.z_dim, j);
            let mut out = model.generator.predict(&concat(&z, &y))?;
            let n = l2_norm(&out);
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::numeric(format!("generator output for {p} has norm {n}")));
            }
            // Dividing by the training scale before normalizing cancels out.
            out.iter_mut().for_each(|v| *v /= n);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let wall_seconds = started.elapsed().as_secs_f64();
    let dict = Dictionary::new(model.n_frames, columns.concat(), params.to_vec())?;
    let dict = normalize_atoms(&dict)?;
    Ok((
        dict,
        SynthTiming {
            atoms: params.len(),
            frames: model.n_frames,
            wall_seconds,
        },
    ))
}

/// Root mean square difference over every entry of two aligned dictionaries.
pub fn fingerprint_rmse(synth: &Dictionary, bench: &Dictionary) -> Result<f64> {
    if synth.n_frames() != bench.n_frames() || synth.n_atoms() != bench.n_atoms() {
        return Err(Error::shape(format!(
            "cannot compare {}x{} with {}x{}",
            synth.n_frames(),
            synth.n_atoms(),
            bench.n_frames(),
            bench.n_atoms()
        )));
    }
    let n = synth.as_slice().len() as f64;
    let ss: f64 = synth
        .as_slice()
        .iter()
        .zip(bench.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n).sqrt())
}

/// `100 * ||synth - bench||_F / ||bench||_F`.
pub fn relative_rmse_percent(synth: &Dictionary, bench: &Dictionary) -> Result<f64> {
    let rmse = fingerprint_rmse(synth, bench)?;
    let n = bench.as_slice().len() as f64;
    let bench_rms = (bench.as_slice().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if bench_rms == 0.0 {
        return Err(Error::numeric("benchmark dictionary is all zeros"));
    }
    Ok(100.0 * rmse / bench_rms)
}

/// Per-atom `||s_j - b_j|| / ||b_j||`.
pub fn per_atom_relative_errors(synth: &Dictionary, bench: &Dictionary) -> Result<Vec<f64>> {
    fingerprint_rmse(synth, bench)?;
    Ok(synth
        .atoms()
        .zip(bench.atoms())
        .map(|(s, b)| {
            let d: f64 = s.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            d / l2_norm(b)
        })
        .collect())
}
