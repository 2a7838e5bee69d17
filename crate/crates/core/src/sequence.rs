//! FISP acquisition schedules: per-frame flip angles and repetition times.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FRAMES: usize = 1000;
pub const FA_MIN_DEG: f64 = 5.0;
pub const FA_MAX_DEG: f64 = 70.0;
pub const TR_MIN_MS: f64 = 12.07;
pub const TR_MAX_MS: f64 = 14.73;
pub const DEFAULT_TE_MS: f64 = 2.0;
pub const DEFAULT_TI_MS: f64 = 20.64;

const FA_LOBES: usize = 4;
const TR_HARMONICS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub flip_angles_deg: Vec<f64>,
    pub tr_ms: Vec<f64>,
    pub te_ms: f64,
    pub inversion_enabled: bool,
    pub ti_ms: f64,
}

impl SequenceParams {
    pub fn new(flip_angles_deg: Vec<f64>, tr_ms: Vec<f64>, te_ms: f64) -> Result<Self> {
        let seq = SequenceParams {
            flip_angles_deg,
            tr_ms,
            te_ms,
            inversion_enabled: true,
            ti_ms: DEFAULT_TI_MS,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn n_frames(&self) -> usize {
        self.flip_angles_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.flip_angles_deg.len();
        if n == 0 {
            return Err(Error::config("sequence has no frames"));
        }
        if self.tr_ms.len() != n {
            return Err(Error::config(format!(
                "sequence has {n} flip angles but {} repetition times",
                self.tr_ms.len()
            )));
        }
        if !(self.te_ms.is_finite() && self.te_ms > 0.0) {
            return Err(Error::config(format!("echo time must be positive, got {}", self.te_ms)));
        }
        if !(self.ti_ms.is_finite() && self.ti_ms >= 0.0) {
            return Err(Error::config(format!("inversion delay must be >= 0, got {}", self.ti_ms)));
        }
        for (i, (&fa, &tr)) in self.flip_angles_deg.iter().zip(&self.tr_ms).enumerate() {
            if !(0.0..=180.0).contains(&fa) {
                return Err(Error::config(format!("frame {i}: flip angle {fa} outside [0, 180]")));
            }
            if !(tr.is_finite() && tr > self.te_ms) {
                return Err(Error::config(format!(
                    "frame {i}: TR {tr} ms must exceed TE {} ms",
                    self.te_ms
                )));
            }
        }
        Ok(())
    }

    /// Parses the `flip_angle_deg,tr_ms` frame table. TE/TI/inversion come
    /// from the caller since they live in the run config.
    pub fn from_csv_str(text: &str, te_ms: f64, inversion_enabled: bool, ti_ms: f64) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::format("empty sequence file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["flip_angle_deg", "tr_ms"] {
            return Err(Error::format(format!("unexpected sequence header {header:?}")));
        }
        let mut fa = Vec::new();
        let mut tr = Vec::new();
        for (row, line) in lines.enumerate() {
            let [a, b] = parse_pair(line).ok_or_else(|| {
                Error::format(format!("sequence row {row}: expected two numbers, got {line:?}"))
            })?;
            fa.push(a);
            tr.push(b);
        }
        let seq = SequenceParams {
            flip_angles_deg: fa,
            tr_ms: tr,
            te_ms,
            inversion_enabled,
            ti_ms,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn load_csv(path: &Path, te_ms: f64, inversion_enabled: bool, ti_ms: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read sequence file {}: {e}", path.display()))
        })?;
        Self::from_csv_str(&text, te_ms, inversion_enabled, ti_ms)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("flip_angle_deg,tr_ms\n");
        for (fa, tr) in self.flip_angles_deg.iter().zip(&self.tr_ms) {
            s.push_str(&format!("{fa},{tr}\n"));
        }
        s
    }

    /// A copy truncated to the first `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_frames());
        SequenceParams {
            flip_angles_deg: self.flip_angles_deg[..n].to_vec(),
            tr_ms: self.tr_ms[..n].to_vec(),
            ..self.clone()
        }
    }
}

pub(crate) fn parse_pair(line: &str) -> Option<[f64; 2]> {
    let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
    let a = it.next()?.ok()?;
    let b = it.next()?.ok()?;
    if it.next().is_some() || !a.is_finite() || !b.is_finite() {
        return None;
    }
    Some([a, b])
}

/// Maps `values` affinely onto `[lo, hi]` so both ends are attained exactly.
fn stretch_to(values: &mut [f64], lo: f64, hi: f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        values.iter_mut().for_each(|v| *v = lo);
        return;
    }
    for v in values.iter_mut() {
        let u = (*v - min) / (max - min);
        *v = if u >= 1.0 { hi } else { lo + u * (hi - lo) };
    }
}

/// Synthetic FISP-MRF schedule: four half-sine flip-angle lobes of decreasing
/// height on a 5° floor, and a smooth seeded TR series, each stretched to the
/// published ranges.
pub fn default_sequence(n_frames: usize, seed: u64) -> Result<SequenceParams> {
    if n_frames == 0 {
        return Err(Error::config("default sequence needs at least one frame"));
    }
    let lobe_len = n_frames.div_ceil(FA_LOBES);
    let peaks = [1.0, 0.55, 0.8, 0.4];
    let mut fa: Vec<f64> = (0..n_frames)
        .map(|i| {
            let lobe = i / lobe_len;
            let phase = (i % lobe_len) as f64 / lobe_len as f64;
            peaks[lobe % peaks.len()] * (PI * phase).sin()
        })
        .collect();
    stretch_to(&mut fa, FA_MIN_DEG, FA_MAX_DEG);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let harmonics: Vec<(f64, f64, f64)> = (0..TR_HARMONICS)
        .map(|k| {
            let cycles = 0.5 + k as f64 + rng.random::<f64>();
            let amp = rng.random::<f64>() / (1.0 + k as f64);
            let phase = 2.0 * PI * rng.random::<f64>();
            (cycles, amp, phase)
        })
        .collect();
    let mut tr: Vec<f64> = (0..n_frames)
        .map(|i| {
            let t = i as f64 / n_frames as f64;
            harmonics
                .iter()
                .map(|&(c, a, p)| a * (2.0 * PI * c * t + p).sin())
                .sum()
        })
        .collect();
    stretch_to(&mut tr, TR_MIN_MS, TR_MAX_MS);

    SequenceParams::new(fa, tr, DEFAULT_TE_MS)
}
