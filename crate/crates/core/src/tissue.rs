//! Tissue relaxation parameters and the piecewise grids that enumerate them.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALIGN_TOL_MS: f64 = 1e-9;

/// One (T1, T2) combination, both in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TissueParams {
    pub t1_ms: f64,
    pub t2_ms: f64,
}

impl TissueParams {
    pub fn new(t1_ms: f64, t2_ms: f64) -> Result<Self> {
        let p = TissueParams { t1_ms, t2_ms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_ms.is_finite() && self.t2_ms.is_finite()) {
            return Err(Error::config(format!("non-finite tissue parameters {self}")));
        }
        if self.t1_ms <= 0.0 || self.t2_ms <= 0.0 {
            return Err(Error::config(format!("tissue parameters must be positive, got {self}")));
        }
        if self.t2_ms > self.t1_ms {
            return Err(Error::config(format!("T2 exceeds T1 in {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for TissueParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(T1={} ms, T2={} ms)", self.t1_ms, self.t2_ms)
    }
}

/// Inclusive range `[start, end]` sampled every `step` milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Segment {
    pub const fn new(start: f64, end: f64, step: f64) -> Self {
        Segment { start, end, step }
    }

    fn count(&self) -> Result<usize> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(Error::config(format!("segment {self} has non-finite bounds")));
        }
        if self.step <= 0.0 {
            return Err(Error::config(format!("segment {self}: step must be positive")));
        }
        if self.start > self.end {
            return Err(Error::config(format!("segment {self}: start exceeds end")));
        }
        let intervals = (self.end - self.start) / self.step;
        let rounded = intervals.round();
        if (rounded * self.step - (self.end - self.start)).abs() > ALIGN_TOL_MS {
            return Err(Error::config(format!(
                "segment {self}: end is not aligned to the step"
            )));
        }
        if rounded >= MAX_AXIS_POINTS as f64 {
            return Err(Error::config(format!("segment {self} has too many points")));
        }
        Ok(rounded as usize + 1)
    }

    fn values(&self) -> Result<Vec<f64>> {
        let n = self.count()?;
        // Multiply instead of accumulating so large segments stay exact on the grid.
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] step {}", self.start, self.end, self.step)
    }
}

/// Piecewise T1 and T2 grids. The dictionary grid is their Cartesian product
/// restricted to `t2 <= t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t1_segments: Vec<Segment>,
    pub t2_segments: Vec<Segment>,
}

/// Upper bound on the number of values along one grid axis.
pub const MAX_AXIS_POINTS: usize = 1_000_000;

fn axis_values(name: &str, segments: &[Segment]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let vals = seg
            .values()
            .map_err(|e| Error::config(format!("{name} segment {i}: {e}")))?;
        if let Some(&last) = out.last() {
            if seg.start <= last {
                return Err(Error::config(format!(
                    "{name} segment {i} {seg} overlaps or precedes the previous segment"
                )));
            }
        }
        if vals[0] <= 0.0 {
            return Err(Error::config(format!(
                "{name} segment {i} {seg} contains non-positive relaxation times"
            )));
        }
        out.extend(vals);
        if out.len() > MAX_AXIS_POINTS {
            return Err(Error::config(format!("{name} axis has more than {MAX_AXIS_POINTS} points")));
        }
    }
    Ok(out)
}

impl GridSpec {
    /// Ranges used for the full-size training dictionary (5970 combinations).
    pub fn standard() -> Self {
        GridSpec {
            t1_segments: vec![
                Segment::new(10.0, 85.0, 5.0),
                Segment::new(90.0, 990.0, 10.0),
                Segment::new(1000.0, 1480.0, 20.0),
                Segment::new(1500.0, 2000.0, 50.0),
                Segment::new(2050.0, 2950.0, 100.0),
            ],
            t2_segments: vec![
                Segment::new(2.0, 8.0, 2.0),
                Segment::new(10.0, 145.0, 5.0),
                Segment::new(150.0, 190.0, 10.0),
                Segment::new(200.0, 500.0, 50.0),
            ],
        }
    }

    /// Coarse grid of the scalability experiment (297 combinations).
    pub fn coarse() -> Self {
        GridSpec {
            t1_segments: vec![
                Segment::new(50.0, 100.0, 50.0),
                Segment::new(200.0, 1000.0, 100.0),
                Segment::new(1200.0, 2000.0, 200.0),
                Segment::new(2500.0, 3000.0, 500.0),
            ],
            t2_segments: vec![
                Segment::new(10.0, 100.0, 10.0),
                Segment::new(120.0, 200.0, 20.0),
                Segment::new(300.0, 500.0, 100.0),
            ],
        }
    }

    /// Fine grid of the scalability experiment (106160 combinations).
    pub fn fine() -> Self {
        GridSpec {
            t1_segments: vec![
                Segment::new(2.0, 100.0, 2.0),
                Segment::new(105.0, 1000.0, 5.0),
                Segment::new(1010.0, 2000.0, 10.0),
                Segment::new(2025.0, 3000.0, 25.0),
            ],
            t2_segments: vec![Segment::new(1.0, 200.0, 1.0), Segment::new(202.0, 500.0, 2.0)],
        }
    }

    pub fn t1_values(&self) -> Result<Vec<f64>> {
        axis_values("t1", &self.t1_segments)
    }

    pub fn t2_values(&self) -> Result<Vec<f64>> {
        axis_values("t2", &self.t2_segments)
    }

    pub fn validate(&self) -> Result<()> {
        self.t1_values()?;
        self.t2_values()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GridSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("grid spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read grid spec {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("grid spec always serializes")
    }
}

/// Expands a grid spec into its (T1, T2) combinations with `t2 <= t1`,
/// ordered lexicographically by (t1, t2).
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<TissueParams>> {
    let t1s = spec.t1_values()?;
    let t2s = spec.t2_values()?;
    let mut out = Vec::new();
    for &t1_ms in &t1s {
        for &t2_ms in t2s.iter().take_while(|&&t2| t2 <= t1_ms) {
            out.push(TissueParams { t1_ms, t2_ms });
        }
    }
    Ok(out)
}
