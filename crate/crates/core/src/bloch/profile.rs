use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sequence::parse_pair;

/// Half-width of the sampled through-slice axis, in units of the pulse
/// bandwidth. The windowed-sinc profile stays below 2e-3 beyond it.
pub const PROFILE_EXTENT: f64 = 1.25;

/// Pulse support in zero-crossing units: three lobes span [-2, 2].
const PULSE_HALF_WIDTH: f64 = 2.0;
const QUAD_INTERVALS: usize = 4000;

/// Flip-angle scale across the slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    positions: Vec<f64>,
    fa_scale: Vec<f64>,
    description: String,
}

impl SliceProfile {
    pub fn new(positions: Vec<f64>, fa_scale: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        let p = SliceProfile {
            positions,
            fa_scale,
            description: description.into(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Single position with the nominal flip angle.
    pub fn ideal() -> Self {
        SliceProfile {
            positions: vec![0.0],
            fa_scale: vec![1.0],
            description: "ideal".into(),
        }
    }

    /// Small-tip profile of a Hann-windowed three-lobe sinc pulse, sampled at
    /// the midpoints of `n` equal bins over `[-PROFILE_EXTENT, PROFILE_EXTENT]`.
    pub fn hann_sinc(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("slice profile needs at least one position"));
        }
        let h = 2.0 * PROFILE_EXTENT / n as f64;
        let positions: Vec<f64> = (0..n)
            .map(|i| -PROFILE_EXTENT + (i as f64 + 0.5) * h)
            .collect();
        let raw: Vec<f64> = positions.iter().map(|&x| windowed_sinc_spectrum(x).abs()).collect();
        // Mirror so symmetry is exact regardless of rounding in the positions.
        let mut fa: Vec<f64> = (0..n).map(|i| 0.5 * (raw[i] + raw[n - 1 - i])).collect();
        let max = fa.iter().copied().fold(0.0, f64::max);
        fa.iter_mut().for_each(|v| *v /= max);
        SliceProfile::new(positions, fa, format!("hann-sinc3/{n}"))
    }

    pub fn len(&self) -> usize {
        self.fa_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fa_scale.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn fa_scale(&self) -> &[f64] {
        &self.fa_scale
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fa_scale.len();
        if n == 0 || self.positions.len() != n {
            return Err(Error::config(format!(
                "slice profile needs matching non-empty arrays, got {} positions and {} scales",
                self.positions.len(),
                n
            )));
        }
        if self.fa_scale.iter().chain(&self.positions).any(|v| !v.is_finite()) {
            return Err(Error::config("slice profile contains non-finite values"));
        }
        if self.fa_scale.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::config("slice profile scales must lie in [0, 1]"));
        }
        let max = self.fa_scale.iter().copied().fold(0.0, f64::max);
        if (max - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("slice profile maximum is {max}, expected 1")));
        }
        for i in 0..n / 2 {
            if (self.fa_scale[i] - self.fa_scale[n - 1 - i]).abs() > 1e-12 {
                return Err(Error::config(format!("slice profile is not symmetric at position {i}")));
            }
        }
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::format("empty profile file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["position", "fa_scale"] {
            return Err(Error::format(format!("unexpected profile header {header:?}")));
        }
        let (mut pos, mut fa) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let [p, s] = parse_pair(line)
                .ok_or_else(|| Error::format(format!("profile row {row}: bad line {line:?}")))?;
            pos.push(p);
            fa.push(s);
        }
        SliceProfile::new(pos, fa, "file")
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read profile file {}: {e}", path.display()))
        })?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("position,fa_scale\n");
        for (p, f) in self.positions.iter().zip(&self.fa_scale) {
            s.push_str(&format!("{p},{f}\n"));
        }
        s
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

fn pulse(t: f64) -> f64 {
    let hann = 0.5 * (1.0 + (PI * t / PULSE_HALF_WIDTH).cos());
    sinc(t) * hann
}

/// Fourier transform of the (real, even) pulse at frequency `x`, by
/// composite Simpson quadrature.
fn windowed_sinc_spectrum(x: f64) -> f64 {
    let a = -PULSE_HALF_WIDTH;
    let h = 2.0 * PULSE_HALF_WIDTH / QUAD_INTERVALS as f64;
    let f = |t: f64| pulse(t) * (2.0 * PI * x * t).cos();
    let mut sum = f(a) + f(-a);
    for k in 1..QUAD_INTERVALS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}
