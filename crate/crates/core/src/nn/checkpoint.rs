//! "GMRF" binary checkpoints, little-endian throughout.
//!
//! Network body: hidden activation u8, head activation u8, layer count u32,
//! then per layer in_dim u32, out_dim u32, weights f64 (row-major), bias f64.
//! Optimizer body: t u64, beta1, beta2, epsilon f64, then first moments and
//! second moments, each laid out like the network parameters.
//! A standalone network file is magic, version u32 = 1, network body,
//! optimizer body.

use std::io::Write;

use byteorder::{LittleEndian, WriteBytesExt};

use super::adam::AdamState;
use super::mlp::{Activation, DenseLayer, Gradients, Mlp};
use crate::error::{Error, Result};

pub const GMRF_MAGIC: &[u8; 4] = b"GMRF";
pub const MLP_FILE_VERSION: u32 = 1;
const MAX_LAYERS: usize = 64;

/// Bounds-checked little-endian cursor over untrusted bytes.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(format!(
                "truncated data: need {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::format("array length overflows"))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::shape(format!("dimension {n} does not fit in u32")))
}

fn write_params<W: Write>(w: &mut W, layers: &[DenseLayer]) -> Result<()> {
    for l in layers {
        for &v in l.weights.iter().chain(&l.bias) {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn write_mlp<W: Write>(w: &mut W, mlp: &Mlp) -> Result<()> {
    w.write_u8(mlp.hidden_activation().id())?;
    w.write_u8(mlp.head_activation().id())?;
    w.write_u32::<LittleEndian>(dim(mlp.layers().len())?)?;
    for l in mlp.layers() {
        w.write_u32::<LittleEndian>(dim(l.in_dim)?)?;
        w.write_u32::<LittleEndian>(dim(l.out_dim)?)?;
        for &v in l.weights.iter().chain(&l.bias) {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn read_activation(r: &mut ByteReader<'_>) -> Result<Activation> {
    let id = r.u8()?;
    Activation::from_id(id).ok_or_else(|| Error::format(format!("unknown activation id {id}")))
}

pub fn read_mlp(r: &mut ByteReader<'_>) -> Result<Mlp> {
    let hidden = read_activation(r)?;
    let head = read_activation(r)?;
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > MAX_LAYERS {
        return Err(Error::format(format!("implausible layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let n_w = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| Error::format("layer size overflows"))?;
        let weights = r.f64s(n_w)?;
        let bias = r.f64s(out_dim)?;
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        });
    }
    let mlp = Mlp::from_layers(layers, hidden, head).map_err(|e| Error::format(e.to_string()))?;
    if !mlp.is_finite() {
        return Err(Error::format("network parameters are not finite"));
    }
    Ok(mlp)
}

pub fn write_adam<W: Write>(w: &mut W, state: &AdamState) -> Result<()> {
    w.write_u64::<LittleEndian>(state.t)?;
    w.write_f64::<LittleEndian>(state.beta1)?;
    w.write_f64::<LittleEndian>(state.beta2)?;
    w.write_f64::<LittleEndian>(state.epsilon)?;
    write_params(w, &state.m.layers)?;
    write_params(w, &state.v.layers)?;
    Ok(())
}

fn read_moments(r: &mut ByteReader<'_>, mlp: &Mlp) -> Result<Gradients> {
    let mut g = Gradients::zeros_like(mlp);
    for l in &mut g.layers {
        l.weights = r.f64s(l.weights.len())?;
        l.bias = r.f64s(l.bias.len())?;
    }
    if !g.is_finite() {
        return Err(Error::format("optimizer moments are not finite"));
    }
    Ok(g)
}

pub fn read_adam(r: &mut ByteReader<'_>, mlp: &Mlp) -> Result<AdamState> {
    let t = r.u64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let epsilon = r.f64()?;
    for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::format(format!("{name} = {b} outside [0, 1)")));
        }
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::format(format!("epsilon = {epsilon} must be positive")));
    }
    let m = read_moments(r, mlp)?;
    let v = read_moments(r, mlp)?;
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::format("negative second moment"));
    }
    Ok(AdamState {
        m,
        v,
        t,
        beta1,
        beta2,
        epsilon,
    })
}

pub fn write_mlp_checkpoint<W: Write>(w: &mut W, mlp: &Mlp, state: &AdamState) -> Result<()> {
    w.write_all(GMRF_MAGIC)?;
    w.write_u32::<LittleEndian>(MLP_FILE_VERSION)?;
    write_mlp(w, mlp)?;
    write_adam(w, state)
}

pub fn read_mlp_checkpoint(bytes: &[u8]) -> Result<(Mlp, AdamState)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != GMRF_MAGIC {
        return Err(Error::format("missing GMRF magic"));
    }
    let version = r.u32()?;
    if version != MLP_FILE_VERSION {
        return Err(Error::format(format!("expected network checkpoint version 1, got {version}")));
    }
    let mlp = read_mlp(&mut r)?;
    let state = read_adam(&mut r, &mlp)?;
    r.finish()?;
    Ok((mlp, state))
}
