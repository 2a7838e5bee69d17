//! Run configuration: one TOML file shared by every subcommand.

use std::path::{Path, PathBuf};

use mrf_core::bloch::{SimGrid, SliceProfile};
use mrf_core::gan::{TrainConfig, DEFAULT_LAMBDA_GRID};
use mrf_core::matching::PhantomSpec;
use mrf_core::{default_sequence, Error, GridSpec, Result, SequenceParams};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub simulation: Simulation,
    pub training: Training,
    pub matching: Matching,
}

/// Input files. Relative paths resolve against the config file's directory.
/// Anything left out falls back to a built-in default or to the artifact a
/// previous stage wrote into the output directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub grid: Option<PathBuf>,
    /// Grid to synthesize; defaults to `grid`.
    pub synth_grid: Option<PathBuf>,
    /// `flip_angle_deg,tr_ms` CSV.
    pub sequence: Option<PathBuf>,
    /// `position,fa_scale` CSV replacing the built-in slice profile.
    pub profile: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub phantom: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    /// Frame count of the built-in sequence; ignored when a sequence file is given.
    pub n_frames: usize,
    pub sequence_seed: u64,
    pub n_profile: usize,
    pub n_dephase: usize,
    pub te_ms: f64,
    pub ti_ms: f64,
    pub inversion: bool,
}

impl Default for Simulation {
    fn default() -> Self {
        let grid = SimGrid::default();
        Simulation {
            n_frames: 200,
            sequence_seed: 0,
            n_profile: grid.n_profile,
            n_dephase: grid.n_dephase,
            te_ms: 2.0,
            ti_ms: 20.64,
            inversion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Training {
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub z_dim: usize,
    pub d_steps_per_g_step: usize,
    pub sequence_descriptor: bool,
    pub eval_every: Option<usize>,
    /// Train/validation/test fractions.
    pub split: [f64; 3],
    pub lambda_grid: Vec<f64>,
}

impl Default for Training {
    fn default() -> Self {
        let t = TrainConfig::default();
        Training {
            lambda: t.lambda,
            lr: t.lr,
            batch_size: t.batch_size,
            iterations: t.iterations,
            z_dim: t.z_dim,
            d_steps_per_g_step: t.d_steps_per_g_step,
            sequence_descriptor: t.sequence_descriptor,
            eval_every: t.eval_every,
            split: [0.6, 0.2, 0.2],
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
        }
    }
}

impl Training {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            lr: self.lr,
            batch_size: self.batch_size,
            iterations: self.iterations,
            z_dim: self.z_dim,
            seed,
            d_steps_per_g_step: self.d_steps_per_g_step,
            sequence_descriptor: self.sequence_descriptor,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Matching {
    pub noise_sigma: f64,
    pub diff_scale: f64,
}

impl Default for Matching {
    fn default() -> Self {
        Matching { noise_sigma: 0.02, diff_scale: mrf_core::matching::DEFAULT_DIFF_SCALE }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    /// Reads `path` and rebases relative input paths onto its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.grid,
            &mut p.synth_grid,
            &mut p.sequence,
            &mut p.profile,
            &mut p.dictionary,
            &mut p.checkpoint,
            &mut p.phantom,
        ] {
            if let Some(rel) = slot.as_ref().filter(|p| p.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        match &self.paths.grid {
            Some(p) => GridSpec::load(&require(p)?),
            None => Ok(GridSpec::coarse()),
        }
    }

    pub fn synth_grid(&self) -> Result<GridSpec> {
        match &self.paths.synth_grid {
            Some(p) => GridSpec::load(&require(p)?),
            None => self.grid(),
        }
    }

    pub fn sequence(&self) -> Result<SequenceParams> {
        let s = &self.simulation;
        match &self.paths.sequence {
            Some(p) => SequenceParams::load_csv(&require(p)?, s.te_ms, s.inversion, s.ti_ms),
            None => {
                let mut seq = default_sequence(s.n_frames, s.sequence_seed)?;
                seq.te_ms = s.te_ms;
                seq.ti_ms = s.ti_ms;
                seq.inversion_enabled = s.inversion;
                seq.validate()?;
                Ok(seq)
            }
        }
    }

    pub fn sim_grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.simulation.n_profile, self.simulation.n_dephase)
    }

    pub fn profile(&self) -> Result<SliceProfile> {
        match &self.paths.profile {
            Some(p) => SliceProfile::load_csv(&require(p)?),
            None => SliceProfile::hann_sinc(self.simulation.n_profile),
        }
    }

    pub fn phantom(&self) -> Result<PhantomSpec> {
        match &self.paths.phantom {
            Some(p) => PhantomSpec::load(&require(p)?),
            None => Ok(PhantomSpec::brain()),
        }
    }
}

/// Fails with a data error naming `path` when it does not exist.
pub fn require(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::Format(format!("missing input file {}", path.display())))
    }
}
