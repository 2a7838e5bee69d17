//! Fingerprint dictionaries and their on-disk formats.
//!
//! Atoms are stored column-major: atom `j` occupies
//! `atoms[j * n_frames..(j + 1) * n_frames]`.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::tissue::TissueParams;

pub const MRFD_MAGIC: &[u8; 4] = b"MRFD";
pub const MRFD_VERSION: u32 = 1;
const FLAG_NORMALIZED: u32 = 1;
const HEADER_LEN: usize = 20;

pub const NORM_TOL: f64 = 1e-9;
/// Largest absolute entry after training-range scaling.
pub const TRAIN_HEADROOM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n_frames: usize,
    atoms: Vec<f64>,
    params: Vec<TissueParams>,
    normalized: bool,
    train_scale: Option<f64>,
}

impl Dictionary {
    pub fn new(n_frames: usize, atoms: Vec<f64>, params: Vec<TissueParams>) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::shape("dictionary needs at least one frame"));
        }
        if atoms.len() != n_frames * params.len() {
            return Err(Error::shape(format!(
                "{} values do not form {} atoms of {} frames",
                atoms.len(),
                params.len(),
                n_frames
            )));
        }
        Ok(Dictionary {
            n_frames,
            atoms,
            params,
            normalized: false,
            train_scale: None,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_atoms(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[TissueParams] {
        &self.params
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn train_scale(&self) -> Option<f64> {
        self.train_scale
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n_frames..(j + 1) * self.n_frames]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.n_frames)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.atoms
    }

    /// Columns `indices` in the given order, keeping normalization state.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut atoms = Vec::with_capacity(indices.len() * self.n_frames);
        let mut params = Vec::with_capacity(indices.len());
        for &j in indices {
            if j >= self.n_atoms() {
                return Err(Error::shape(format!("atom index {j} out of range {}", self.n_atoms())));
            }
            atoms.extend_from_slice(self.atom(j));
            params.push(self.params[j]);
        }
        Ok(Dictionary {
            n_frames: self.n_frames,
            atoms,
            params,
            normalized: self.normalized,
            train_scale: self.train_scale,
        })
    }

    /// Removes the training-range scale, returning the unit-norm values.
    pub fn unscaled(&self) -> Self {
        let mut out = self.clone();
        if let Some(scale) = self.train_scale {
            out.atoms.iter_mut().for_each(|v| *v /= scale);
            out.train_scale = None;
        }
        out
    }

    pub fn write_mrfd<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MRFD_MAGIC)?;
        w.write_u32::<LittleEndian>(MRFD_VERSION)?;
        w.write_u32::<LittleEndian>(dim_u32(self.n_frames)?)?;
        w.write_u32::<LittleEndian>(dim_u32(self.n_atoms())?)?;
        w.write_u32::<LittleEndian>(if self.normalized { FLAG_NORMALIZED } else { 0 })?;
        for p in &self.params {
            w.write_f64::<LittleEndian>(p.t1_ms)?;
        }
        for p in &self.params {
            w.write_f64::<LittleEndian>(p.t2_ms)?;
        }
        for &v in &self.atoms {
            w.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn to_mrfd_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + 8 * (2 * self.n_atoms() + self.atoms.len()));
        self.write_mrfd(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Decodes an MRFD buffer. Sizes are checked against the buffer length
    /// before anything is allocated.
    pub fn from_mrfd_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format("MRFD file shorter than its header"));
        }
        if &bytes[..4] != MRFD_MAGIC {
            return Err(Error::format("missing MRFD magic"));
        }
        let mut r = &bytes[4..];
        let version = r.read_u32::<LittleEndian>()?;
        if version != MRFD_VERSION {
            return Err(Error::format(format!("unsupported MRFD version {version}")));
        }
        let n_frames = r.read_u32::<LittleEndian>()? as usize;
        let n_atoms = r.read_u32::<LittleEndian>()? as usize;
        let flags = r.read_u32::<LittleEndian>()?;
        if flags & !FLAG_NORMALIZED != 0 {
            return Err(Error::format(format!("unknown MRFD flags {flags:#x}")));
        }
        if n_frames == 0 {
            return Err(Error::format("MRFD dictionary has zero frames"));
        }
        let n_values = n_frames
            .checked_mul(n_atoms)
            .and_then(|v| v.checked_add(2 * n_atoms))
            .ok_or_else(|| Error::format("MRFD dimensions overflow"))?;
        if r.len() != n_values.saturating_mul(8) {
            return Err(Error::format(format!(
                "MRFD payload is {} bytes, header implies {} values",
                r.len(),
                n_values
            )));
        }
        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let t1 = read_vec(n_atoms)?;
        let t2 = read_vec(n_atoms)?;
        let atoms = read_vec(n_frames * n_atoms)?;
        let params = t1
            .into_iter()
            .zip(t2)
            .map(|(t1_ms, t2_ms)| {
                TissueParams::new(t1_ms, t2_ms).map_err(|e| Error::format(format!("MRFD atom: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("MRFD atoms contain non-finite values"));
        }
        let mut dict = Dictionary::new(n_frames, atoms, params)?;
        if flags & FLAG_NORMALIZED != 0 {
            for (j, atom) in dict.atoms().enumerate() {
                let n = l2_norm(atom);
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::format(format!(
                        "MRFD marked normalized but atom {j} has norm {n}"
                    )));
                }
            }
            dict.normalized = true;
        }
        Ok(dict)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_mrfd(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::config(format!("cannot open dictionary {}: {e}", path.display())))?
            .read_to_end(&mut bytes)?;
        Self::from_mrfd_bytes(&bytes)
    }

    /// `t1_ms,t2_ms,frame_0,...` with one row per atom.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("t1_ms,t2_ms");
        for i in 0..self.n_frames {
            s.push_str(&format!(",frame_{i}"));
        }
        s.push('\n');
        for (p, atom) in self.params.iter().zip(self.atoms()) {
            s.push_str(&format!("{},{}", p.t1_ms, p.t2_ms));
            for v in atom {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::shape(format!("dimension {n} exceeds the MRFD u32 limit")))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales every atom to unit Euclidean norm.
pub fn normalize_atoms(dict: &Dictionary) -> Result<Dictionary> {
    let mut out = dict.unscaled();
    let n_frames = out.n_frames;
    for (j, atom) in out.atoms.chunks_exact_mut(n_frames).enumerate() {
        let n = l2_norm(atom);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::numeric(format!(
                "atom {j} {} has zero or non-finite norm",
                dict.params[j]
            )));
        }
        // Already-unit atoms are left bit-identical.
        if (n - 1.0).abs() > f64::EPSILON {
            atom.iter_mut().for_each(|v| *v /= n);
        }
    }
    out.normalized = true;
    Ok(out)
}

/// Multiplies a normalized set by `0.9 / max|value|` so a tanh head can
/// reproduce it; the factor is kept in `train_scale`.
pub fn scale_for_training(set: &Dictionary) -> Result<(Dictionary, f64)> {
    if !set.normalized {
        return Err(Error::config("training set must be normalized before scaling"));
    }
    let base = set.unscaled();
    let max_abs = base.atoms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Err(Error::numeric("training set is all zeros"));
    }
    let scale = TRAIN_HEADROOM / max_abs;
    let mut out = base;
    out.atoms.iter_mut().for_each(|v| *v *= scale);
    out.train_scale = Some(scale);
    Ok((out, scale))
}
