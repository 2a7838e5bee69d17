use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use super::condition::ConditionMap;
use crate::error::{Error, Result};
use crate::nn::{
    init_mlp, read_adam, read_mlp, write_adam, write_mlp, Activation, AdamState, ByteReader, Mlp,
    GMRF_MAGIC,
};

pub const HIDDEN_WIDTH: usize = 128;
pub const HIDDEN_LAYERS: usize = 3;
pub const GAN_FILE_VERSION: u32 = 2;

/// Conditional generator/discriminator pair.
///
/// Generator: `[z, y] -> 128 -> 128 -> 128 -> n_frames` (ReLU, tanh head).
/// Discriminator: `[x, y] -> 128 -> 128 -> 128 -> 1` (ReLU, sigmoid head).
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub g_opt: AdamState,
    pub d_opt: AdamState,
    pub z_dim: usize,
    pub n_frames: usize,
    pub conditions: ConditionMap,
    /// Amplitude factor applied to unit-norm atoms for training.
    pub train_scale: f64,
}

fn stack(input: usize, output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend([HIDDEN_WIDTH; HIDDEN_LAYERS]);
    dims.push(output);
    dims
}

impl GanModel {
    pub fn new(
        n_frames: usize,
        z_dim: usize,
        conditions: ConditionMap,
        train_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::config("model needs at least one frame"));
        }
        if !(train_scale.is_finite() && train_scale > 0.0) {
            return Err(Error::config(format!("train scale must be positive, got {train_scale}")));
        }
        let y_dim = conditions.y_dim();
        let generator = init_mlp(&stack(z_dim + y_dim, n_frames), Activation::Tanh, seed)?;
        let discriminator = init_mlp(
            &stack(n_frames + y_dim, 1),
            Activation::Sigmoid,
            seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        )?;
        Ok(GanModel {
            g_opt: AdamState::new(&generator),
            d_opt: AdamState::new(&discriminator),
            generator,
            discriminator,
            z_dim,
            n_frames,
            conditions,
            train_scale,
        })
    }

    pub fn y_dim(&self) -> usize {
        self.conditions.y_dim()
    }

    /// Generator output for noise `z` and condition `y`, in training scale.
    pub fn generate(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.generator.predict(&concat(z, y))
    }

    /// Discriminator probability that `x` is a simulated fingerprint for `y`.
    pub fn discriminate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.discriminator.predict(&concat(x, y))?[0])
    }

    fn check(&self) -> Result<()> {
        let y_dim = self.y_dim();
        if self.generator.input_dim() != self.z_dim + y_dim
            || self.generator.output_dim() != self.n_frames
            || self.discriminator.input_dim() != self.n_frames + y_dim
            || self.discriminator.output_dim() != 1
        {
            return Err(Error::format(format!(
                "network dims {:?} / {:?} inconsistent with z_dim {}, y_dim {y_dim}, {} frames",
                self.generator.dims(),
                self.discriminator.dims(),
                self.z_dim,
                self.n_frames
            )));
        }
        if self.generator.head_activation() != Activation::Tanh
            || self.discriminator.head_activation() != Activation::Sigmoid
        {
            return Err(Error::format("unexpected network head activations"));
        }
        Ok(())
    }

    /// GMRF version 2: magic, version, model header (z_dim, y_dim, n_frames
    /// u32; log10 T1 range, log10 T2 range, train_scale f64; descriptor bins
    /// u32), then generator, generator optimizer, discriminator,
    /// discriminator optimizer.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let u32_of = |n: usize| {
            u32::try_from(n).map_err(|_| Error::shape(format!("{n} does not fit in u32")))
        };
        w.write_all(GMRF_MAGIC)?;
        w.write_u32::<LittleEndian>(GAN_FILE_VERSION)?;
        w.write_u32::<LittleEndian>(u32_of(self.z_dim)?)?;
        w.write_u32::<LittleEndian>(u32_of(self.y_dim())?)?;
        w.write_u32::<LittleEndian>(u32_of(self.n_frames)?)?;
        for v in [
            self.conditions.log_t1_range.0,
            self.conditions.log_t1_range.1,
            self.conditions.log_t2_range.0,
            self.conditions.log_t2_range.1,
            self.train_scale,
        ] {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_u32::<LittleEndian>(u32_of(self.conditions.descriptor_bins)?)?;
        write_mlp(w, &self.generator)?;
        write_adam(w, &self.g_opt)?;
        write_mlp(w, &self.discriminator)?;
        write_adam(w, &self.d_opt)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != GMRF_MAGIC {
            return Err(Error::format("missing GMRF magic"));
        }
        let version = r.u32()?;
        if version != GAN_FILE_VERSION {
            return Err(Error::format(format!(
                "expected GAN checkpoint version {GAN_FILE_VERSION}, got {version}"
            )));
        }
        let z_dim = r.u32()? as usize;
        let y_dim = r.u32()? as usize;
        let n_frames = r.u32()? as usize;
        let t1 = (r.f64()?, r.f64()?);
        let t2 = (r.f64()?, r.f64()?);
        let train_scale = r.f64()?;
        let descriptor_bins = r.u32()? as usize;
        let conditions = ConditionMap {
            log_t1_range: t1,
            log_t2_range: t2,
            descriptor_bins,
        };
        conditions.validate()?;
        if conditions.y_dim() != y_dim {
            return Err(Error::format(format!(
                "header y_dim {y_dim} disagrees with {descriptor_bins} descriptor bins"
            )));
        }
        if !(train_scale.is_finite() && train_scale > 0.0) {
            return Err(Error::format(format!("invalid train scale {train_scale}")));
        }
        let generator = read_mlp(&mut r)?;
        let g_opt = read_adam(&mut r, &generator)?;
        let discriminator = read_mlp(&mut r)?;
        let d_opt = read_adam(&mut r, &discriminator)?;
        r.finish()?;
        let model = GanModel {
            generator,
            discriminator,
            g_opt,
            d_opt,
            z_dim,
            n_frames,
            conditions,
            train_scale,
        };
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}
