//! Pattern matching of voxel time series against a dictionary, synthetic
//! phantoms to feed it, and the map metrics and image outputs.

mod maps;
mod phantom;

pub use maps::{diff_map, rel_rmse, write_pgm16, DiffImage, PgmScaling, DEFAULT_DIFF_SCALE};
pub use phantom::{make_phantom, Phantom, PhantomSpec, Region, MAX_PHANTOM_SIDE};

use rayon::prelude::*;

use crate::bloch::Execution;
use crate::dictionary::{l2_norm, Dictionary};
use crate::error::{Error, Result};
use crate::tissue::TissueParams;

/// Per-pixel time series stored pixel-major, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    width: usize,
    height: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(width: usize, height: usize, n_frames: usize, data: Vec<f64>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(n_frames))
            .ok_or_else(|| Error::shape("voxel grid size overflows"))?;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "{width}x{height} grid of {n_frames} frames needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(VoxelGrid { width, height, n_frames, data })
    }

    pub fn zeros(width: usize, height: usize, n_frames: usize) -> Self {
        VoxelGrid { width, height, n_frames, data: vec![0.0; width * height * n_frames] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Series of pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        self.series(y * self.width + x)
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.n_frames;
        &mut self.data[i..i + self.n_frames]
    }

    fn series(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_frames..(i + 1) * self.n_frames]
    }
}

/// Matched T1/T2 and similarity per pixel; background pixels hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMap {
    pub width: usize,
    pub height: usize,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub similarity: Vec<f64>,
}

impl ParameterMap {
    /// `x,y,t1,t2,similarity`, one row per pixel in raster order.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x,y,t1,t2,similarity\n");
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                s.push_str(&format!("{x},{y},{},{},{}\n", self.t1[i], self.t2[i], self.similarity[i]));
            }
        }
        s
    }
}

/// Best-matching atom by absolute correlation.
///
/// Ties go to the lowest column index.
pub fn match_voxel(signal: &[f64], dict: &Dictionary) -> Result<(TissueParams, f64)> {
    if !dict.is_normalized() {
        return Err(Error::config("matching requires a unit-norm dictionary"));
    }
    if dict.is_empty() {
        return Err(Error::config("cannot match against an empty dictionary"));
    }
    if signal.len() != dict.n_frames() {
        return Err(Error::shape(format!(
            "signal has {} frames, dictionary has {}",
            signal.len(),
            dict.n_frames()
        )));
    }
    let norm = l2_norm(signal);
    if !norm.is_finite() {
        return Err(Error::numeric("signal contains non-finite values"));
    }
    if norm == 0.0 {
        return Err(Error::numeric("cannot match a zero signal"));
    }
    let (best, score) = argmax_abs_dot(signal, dict);
    Ok((dict.params()[best], (score / norm).min(1.0)))
}

fn argmax_abs_dot(signal: &[f64], dict: &Dictionary) -> (usize, f64) {
    let mut best = (0, -1.0);
    for (j, atom) in dict.atoms().enumerate() {
        let score = crate::nn::dot(atom, signal).abs();
        if score > best.1 {
            best = (j, score);
        }
    }
    best
}

/// Matches every pixel; zero-norm pixels become background `(0, 0)` with
/// similarity 0. Serial and parallel runs produce identical maps.
pub fn match_volume(signals: &VoxelGrid, dict: &Dictionary, execution: Execution) -> Result<ParameterMap> {
    if signals.n_frames() != dict.n_frames() {
        return Err(Error::shape(format!(
            "signals have {} frames, dictionary has {}",
            signals.n_frames(),
            dict.n_frames()
        )));
    }
    let one = |i: usize| -> Result<(f64, f64, f64)> {
        match match_voxel(signals.series(i), dict) {
            Ok((p, sim)) => Ok((p.t1_ms, p.t2_ms, sim)),
            Err(Error::Numeric(_)) if l2_norm(signals.series(i)) == 0.0 => Ok((0.0, 0.0, 0.0)),
            Err(e) => Err(e),
        }
    };
    let n = signals.n_pixels();
    let results: Vec<(f64, f64, f64)> = match execution {
        Execution::Parallel => (0..n).into_par_iter().map(one).collect::<Result<_>>()?,
        Execution::Serial => (0..n).map(one).collect::<Result<_>>()?,
    };
    Ok(ParameterMap {
        width: signals.width(),
        height: signals.height(),
        t1: results.iter().map(|r| r.0).collect(),
        t2: results.iter().map(|r| r.1).collect(),
        similarity: results.iter().map(|r| r.2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::normalize_atoms;

    fn dict() -> Dictionary {
        let atoms = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.6, 0.8, 0.0, 0.0, 0.0, -1.0];
        let params = [(100.0, 10.0), (200.0, 20.0), (300.0, 30.0), (400.0, 40.0)]
            .iter()
            .map(|&(a, b)| TissueParams::new(a, b).unwrap())
            .collect();
        normalize_atoms(&Dictionary::new(3, atoms, params).unwrap()).unwrap()
    }

    #[test]
    fn exact_atoms_and_sign() {
        let d = dict();
        for j in 0..d.n_atoms() {
            let (p, sim) = match_voxel(d.atom(j), &d).unwrap();
            assert_eq!(p, d.params()[j]);
            assert!((sim - 1.0).abs() <= 1e-9);
        }
        let (p, _) = match_voxel(&[0.0, 0.0, 2.5], &d).unwrap();
        assert_eq!(p.t1_ms, 400.0);
    }

    #[test]
    fn ties_take_the_lowest_index() {
        let d = dict();
        // Equal correlation with atoms 0 and 1.
        let (p, sim) = match_voxel(&[1.0, 1.0, 0.0], &d).unwrap();
        assert!(sim > 0.98);
        assert_eq!(p.t1_ms, 300.0);
        let (p, _) = match_voxel(&[1.0, -1.0, 0.0], &d).unwrap();
        assert_eq!(p.t1_ms, 100.0);
    }

    #[test]
    fn errors() {
        let d = dict();
        assert!(matches!(match_voxel(&[0.0; 3], &d), Err(Error::Numeric(_))));
        assert!(matches!(match_voxel(&[1.0; 2], &d), Err(Error::Shape(_))));
        let raw = Dictionary::new(1, vec![2.0], vec![TissueParams::new(1.0, 1.0).unwrap()]).unwrap();
        assert!(matches!(match_voxel(&[1.0], &raw), Err(Error::Config(_))));
    }

    #[test]
    fn background_and_tiling() {
        let d = dict();
        let blank = match_volume(&VoxelGrid::zeros(3, 2, 3), &d, Execution::Parallel).unwrap();
        assert!(blank.t1.iter().chain(&blank.t2).chain(&blank.similarity).all(|&v| v == 0.0));

        let mut grid = VoxelGrid::zeros(4, 3, 3);
        for y in 0..3 {
            for x in 0..4 {
                if (x + y) % 3 != 0 {
                    grid.pixel_mut(x, y).copy_from_slice(d.atom((x * 3 + y) % 4));
                }
            }
        }
        let map = match_volume(&grid, &d, Execution::Parallel).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let i = y * 4 + x;
                let want = if (x + y) % 3 != 0 { d.params()[(x * 3 + y) % 4].t1_ms } else { 0.0 };
                assert_eq!(map.t1[i], want);
            }
        }
        assert_eq!(map, match_volume(&grid, &d, Execution::Serial).unwrap());
        let csv = map.to_csv_string();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("x,y,t1,t2,similarity\n0,0,0,0,0\n1,0,"));
    }

    #[test]
    fn frame_mismatch_is_a_shape_error() {
        let err = match_volume(&VoxelGrid::zeros(1, 1, 4), &dict(), Execution::Serial).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
