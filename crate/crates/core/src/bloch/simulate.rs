use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use super::{dephase_cs, relax_factors, IsochromatState, RfRotation, SliceProfile};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::sequence::SequenceParams;
use crate::tissue::TissueParams;

pub const DEFAULT_N_PROFILE: usize = 51;
pub const DEFAULT_N_DEPHASE: usize = 50;

/// Discretization of the voxel into `n_profile` slice positions times
/// `n_dephase` intra-voxel dephasing states. The signal is sampled at TE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimGrid {
    pub n_profile: usize,
    pub n_dephase: usize,
}

impl Default for SimGrid {
    fn default() -> Self {
        SimGrid {
            n_profile: DEFAULT_N_PROFILE,
            n_dephase: DEFAULT_N_DEPHASE,
        }
    }
}

impl SimGrid {
    pub fn new(n_profile: usize, n_dephase: usize) -> Result<Self> {
        let g = SimGrid { n_profile, n_dephase };
        g.validate()?;
        Ok(g)
    }

    /// `n_dephase == 1` is accepted and means a single unspoiled packet.
    pub fn validate(&self) -> Result<()> {
        if self.n_profile == 0 || self.n_dephase == 0 {
            return Err(Error::config(format!(
                "simulation grid needs P >= 1 and Q >= 1, got P={} Q={}",
                self.n_profile, self.n_dephase
            )));
        }
        Ok(())
    }

    /// Per-TR dephasing increment of state `k`: `(k + 0.5) * 2π / Q`.
    pub fn dephase_increment(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * 2.0 * PI / self.n_dephase as f64
    }

    pub fn isochromats(&self) -> usize {
        self.n_profile * self.n_dephase
    }
}

/// Simulated FISP fingerprint of one tissue.
///
/// Every isochromat starts at equilibrium and, when inversion is enabled,
/// receives an ideal (profile-independent) 180° pulse followed by `ti_ms` of
/// relaxation. Each frame then applies the profile-scaled flip angle, relaxes
/// to TE, samples `mx + i·my`, relaxes for the rest of the TR, and dephases by
/// the isochromat's increment. The complex ensemble mean is rotated onto the
/// axis of its largest-magnitude sample (first on ties), signed as described
/// in [`phase_align`], and the real part is returned.
pub fn simulate_fingerprint(
    tissue: &TissueParams,
    seq: &SequenceParams,
    profile: &SliceProfile,
    grid: &SimGrid,
) -> Result<Vec<f64>> {
    tissue.validate()?;
    seq.validate()?;
    profile.validate()?;
    grid.validate()?;
    if profile.len() != grid.n_profile {
        return Err(Error::config(format!(
            "profile has {} positions but the grid expects {}",
            profile.len(),
            grid.n_profile
        )));
    }
    let n = seq.n_frames();
    let e_te = ((-seq.te_ms / tissue.t1_ms).exp(), (-seq.te_ms / tissue.t2_ms).exp());
    let e_rest: Vec<(f64, f64)> = seq
        .tr_ms
        .iter()
        .map(|&tr| {
            let dt = tr - seq.te_ms;
            ((-dt / tissue.t1_ms).exp(), (-dt / tissue.t2_ms).exp())
        })
        .collect();
    let dephasers: Vec<(f64, f64)> = (0..grid.n_dephase)
        .map(|k| {
            let (s, c) = grid.dephase_increment(k).sin_cos();
            (c, s)
        })
        .collect();
    let start = if seq.inversion_enabled {
        let inverted = RfRotation::new(180.0, 0.0).apply(IsochromatState::EQUILIBRIUM);
        let e1 = (-seq.ti_ms / tissue.t1_ms).exp();
        let e2 = (-seq.ti_ms / tissue.t2_ms).exp();
        relax_factors(inverted, e1, e2)
    } else {
        IsochromatState::EQUILIBRIUM
    };

    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let mut pulses = Vec::with_capacity(n);
    for &scale in profile.fa_scale() {
        pulses.clear();
        pulses.extend(seq.flip_angles_deg.iter().map(|&fa| RfRotation::new(scale * fa, 0.0)));
        for &(c, s) in &dephasers {
            let mut m = start;
            for i in 0..n {
                m = pulses[i].apply(m);
                m = relax_factors(m, e_te.0, e_te.1);
                re[i] += m.mx;
                im[i] += m.my;
                m = relax_factors(m, e_rest[i].0, e_rest[i].1);
                m = dephase_cs(m, c, s);
            }
        }
    }
    let count = grid.isochromats() as f64;
    Ok(phase_align(&re, &im, count))
}

/// Real part of `(re + i·im) / count` after removing the phase of the
/// largest-magnitude sample.
///
/// That sample fixes the signal axis only up to sign. The sign is taken so
/// the axis points along +y, where a pulse at phase 0 tips positive Mz, so
/// inverted magnetization reads negative. Keying the sign on which lobe of an
/// inversion-recovery curve happens to be larger would flip whole regions of
/// a dictionary and make it discontinuous in (T1, T2).
pub(crate) fn phase_align(re: &[f64], im: &[f64], count: f64) -> Vec<f64> {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, (a, b)) in re.iter().zip(im).enumerate() {
        let mag = a.hypot(*b);
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return vec![0.0; re.len()];
    }
    let (mut c, mut s) = (re[best] / best_mag, im[best] / best_mag);
    if s < 0.0 {
        (c, s) = (-c, -s);
    }
    // Multiply by e^{-iθ}: real part is re·cosθ + im·sinθ.
    re.iter()
        .zip(im)
        .map(|(a, b)| (a * c + b * s) / count)
        .collect()
}

/// Whether atoms are simulated on the rayon pool or on the calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTiming {
    pub atoms: usize,
    pub frames: usize,
    pub wall_seconds: f64,
}

impl SimTiming {
    pub fn seconds_per_atom(&self) -> f64 {
        self.wall_seconds / self.atoms.max(1) as f64
    }
}

pub fn simulate_dictionary(
    params: &[TissueParams],
    seq: &SequenceParams,
    profile: &SliceProfile,
    grid: &SimGrid,
) -> Result<(Dictionary, SimTiming)> {
    simulate_dictionary_with(params, seq, profile, grid, Execution::Parallel)
}

/// Simulates one un-normalized column per tissue. Each atom is computed
/// independently, so serial and parallel runs are bit-identical.
pub fn simulate_dictionary_with(
    params: &[TissueParams],
    seq: &SequenceParams,
    profile: &SliceProfile,
    grid: &SimGrid,
    execution: Execution,
) -> Result<(Dictionary, SimTiming)> {
    if params.is_empty() {
        return Err(Error::config("cannot simulate an empty parameter list"));
    }
    let started = Instant::now();
    let columns: Vec<Vec<f64>> = match execution {
        Execution::Parallel => params
            .par_iter()
            .map(|t| simulate_fingerprint(t, seq, profile, grid))
            .collect::<Result<_>>()?,
        Execution::Serial => params
            .iter()
            .map(|t| simulate_fingerprint(t, seq, profile, grid))
            .collect::<Result<_>>()?,
    };
    let wall_seconds = started.elapsed().as_secs_f64();
    let atoms = columns.concat();
    let dict = Dictionary::new(seq.n_frames(), atoms, params.to_vec())?;
    Ok((
        dict,
        SimTiming {
            atoms: params.len(),
            frames: seq.n_frames(),
            wall_seconds,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::l2_norm;
    use crate::sequence::default_sequence;

    fn tp(t1: f64, t2: f64) -> TissueParams {
        TissueParams::new(t1, t2).unwrap()
    }

    #[test]
    fn no_excitation_gives_zero_signal() {
        let mut seq = default_sequence(50, 0).unwrap();
        seq.flip_angles_deg.iter_mut().for_each(|fa| *fa = 0.0);
        seq.inversion_enabled = false;
        let grid = SimGrid::new(5, 4).unwrap();
        let sig = simulate_fingerprint(&tp(1000.0, 100.0), &seq, &SliceProfile::hann_sinc(5).unwrap(), &grid).unwrap();
        assert!(sig.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pulse_closed_form() {
        let seq = SequenceParams {
            flip_angles_deg: vec![90.0],
            tr_ms: vec![10.0],
            te_ms: 2.0,
            inversion_enabled: false,
            ti_ms: 0.0,
        };
        let grid = SimGrid::new(1, 1).unwrap();
        let sig = simulate_fingerprint(&tp(1000.0, 100.0), &seq, &SliceProfile::ideal(), &grid).unwrap();
        let want = (-0.02f64).exp() * 90f64.to_radians().sin();
        assert!((sig[0].abs() - want).abs() < 1e-12);
        assert!((sig[0] - 0.980199).abs() < 1e-6);
    }

    #[test]
    fn composes_with_single_atom_calls() {
        let seq = default_sequence(60, 3).unwrap();
        let profile = SliceProfile::hann_sinc(5).unwrap();
        let grid = SimGrid::new(5, 8).unwrap();
        let params = [tp(300.0, 30.0), tp(950.0, 40.0), tp(2950.0, 500.0)];
        let (dict, timing) = simulate_dictionary(&params, &seq, &profile, &grid).unwrap();
        assert_eq!((dict.n_frames(), dict.n_atoms()), (60, 3));
        assert_eq!(timing.atoms, 3);
        for (j, p) in params.iter().enumerate() {
            let single = simulate_fingerprint(p, &seq, &profile, &grid).unwrap();
            assert_eq!(dict.atom(j), single.as_slice());
        }
        let (serial, _) = simulate_dictionary_with(&params, &seq, &profile, &grid, Execution::Serial).unwrap();
        assert_eq!(serial, dict);
    }

    #[test]
    fn longer_t2_carries_more_energy() {
        let seq = default_sequence(1000, 0).unwrap();
        let profile = SliceProfile::hann_sinc(DEFAULT_N_PROFILE).unwrap();
        let grid = SimGrid::default();
        let short = simulate_fingerprint(&tp(1000.0, 40.0), &seq, &profile, &grid).unwrap();
        let long = simulate_fingerprint(&tp(1000.0, 200.0), &seq, &profile, &grid).unwrap();
        assert!(l2_norm(&long) > l2_norm(&short));
    }

    #[test]
    fn alignment_sign_follows_the_excitation_axis() {
        // Largest sample lies along -y: its sign must survive alignment.
        let (re, im) = (vec![0.0, 0.0, 0.0], vec![0.5, -2.0, 1.0]);
        assert_eq!(phase_align(&re, &im, 1.0), vec![0.5, -2.0, 1.0]);
        let (re, im) = (vec![0.0, 3.0], vec![0.0, 0.0]);
        assert_eq!(phase_align(&re, &im, 1.0), vec![0.0, 3.0]);
    }

    #[test]
    fn inversion_reads_negative_for_every_coarse_tissue() {
        let seq = default_sequence(200, 0).unwrap();
        let grid = SimGrid::new(7, 8).unwrap();
        let profile = SliceProfile::hann_sinc(7).unwrap();
        for (t1, t2) in [(100.0, 20.0), (800.0, 300.0), (2000.0, 2000.0)] {
            let sig = simulate_fingerprint(&tp(t1, t2), &seq, &profile, &grid).unwrap();
            assert!(sig[0] < 0.0, "T1={t1} T2={t2}: first frame {}", sig[0]);
        }
    }

    #[test]
    fn rejects_mismatched_profile() {
        let seq = default_sequence(10, 0).unwrap();
        let grid = SimGrid::new(3, 2).unwrap();
        assert!(simulate_fingerprint(&tp(100.0, 10.0), &seq, &SliceProfile::ideal(), &grid).is_err());
        assert!(SimGrid::new(0, 4).is_err());
    }
}
