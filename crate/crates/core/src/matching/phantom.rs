use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::bloch::{simulate_dictionary, SimGrid, SliceProfile};
use crate::dictionary::l2_norm;
use crate::error::{Error, Result};
use crate::sequence::SequenceParams;
use crate::tissue::TissueParams;

/// A filled shape of one tissue. Coordinates are in pixels; a pixel belongs
/// to a region when its centre `(x + 0.5, y + 0.5)` does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        t1_ms: f64,
        t2_ms: f64,
    },
    Disc {
        cx: f64,
        cy: f64,
        radius: f64,
        t1_ms: f64,
        t2_ms: f64,
    },
}

impl Region {
    pub fn tissue(&self) -> (f64, f64) {
        match *self {
            Region::Rect { t1_ms, t2_ms, .. } | Region::Disc { t1_ms, t2_ms, .. } => (t1_ms, t2_ms),
        }
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Region::Rect { x, y, width, height, .. } => px >= x && px < x + width && py >= y && py < y + height,
            Region::Disc { cx, cy, radius, .. } => (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius,
        }
    }
}

pub const MAX_PHANTOM_SIDE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Painted in order, so later regions cover earlier ones.
    pub regions: Vec<Region>,
}

impl PhantomSpec {
    /// 64x64 head-like layout: a CSF ring around gray matter around a white
    /// matter core, plus two CSF ventricles.
    pub fn brain() -> Self {
        let (wm, gm, csf) = ((950.0, 40.0), (1500.0, 60.0), (2950.0, 500.0));
        let disc = |r, (t1_ms, t2_ms)| Region::Disc { cx: 32.0, cy: 32.0, radius: r, t1_ms, t2_ms };
        let rect = |x, (t1_ms, t2_ms)| Region::Rect { x, y: 24.0, width: 4.0, height: 14.0, t1_ms, t2_ms };
        PhantomSpec {
            width: 64,
            height: 64,
            regions: vec![disc(30.0, csf), disc(27.0, gm), disc(17.0, wm), rect(25.0, csf), rect(35.0, csf)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("phantom must be at least 1x1"));
        }
        if self.width > MAX_PHANTOM_SIDE || self.height > MAX_PHANTOM_SIDE {
            return Err(Error::config(format!("phantom sides are limited to {MAX_PHANTOM_SIDE} pixels")));
        }
        if self.regions.is_empty() {
            return Err(Error::config("phantom has no regions"));
        }
        for (k, r) in self.regions.iter().enumerate() {
            let (t1, t2) = r.tissue();
            TissueParams::new(t1, t2).map_err(|e| Error::config(format!("region {k}: {e}")))?;
            let finite = match *r {
                Region::Rect { x, y, width, height, .. } => [x, y, width, height].iter().all(|v| v.is_finite()),
                Region::Disc { cx, cy, radius, .. } => [cx, cy, radius].iter().all(|v| v.is_finite()),
            };
            if !finite {
                return Err(Error::config(format!("region {k} has non-finite geometry")));
            }
            if self.pixels(r).next().is_none() {
                return Err(Error::config(format!("region {k} covers no pixels")));
            }
        }
        Ok(())
    }

    fn pixels<'a>(&'a self, r: &'a Region) -> impl Iterator<Item = (usize, usize)> + 'a {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(move |&(x, y)| r.contains(x as f64 + 0.5, y as f64 + 0.5))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: PhantomSpec = toml::from_str(text).map_err(|e| Error::config(format!("phantom spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read phantom spec {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("phantom spec always serializes")
    }
}

/// Ground-truth maps; 0 marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub width: usize,
    pub height: usize,
    pub t1_map: Vec<f64>,
    pub t2_map: Vec<f64>,
    pub spec: PhantomSpec,
}

impl Phantom {
    /// Distinct foreground tissues in first-appearance raster order.
    pub fn tissues(&self) -> Vec<TissueParams> {
        let mut out: Vec<TissueParams> = Vec::new();
        for (&t1, &t2) in self.t1_map.iter().zip(&self.t2_map) {
            if t1 != 0.0 && !out.iter().any(|p| p.t1_ms == t1 && p.t2_ms == t2) {
                out.push(TissueParams { t1_ms: t1, t2_ms: t2 });
            }
        }
        out
    }
}

/// Rasterizes `spec` and fills each foreground pixel with its tissue's
/// fingerprint plus white noise of standard deviation
/// `noise_sigma * ||s|| / sqrt(n_frames)`.
///
/// Each distinct tissue is simulated once. Noise is drawn in raster order
/// from a single seeded stream.
pub fn make_phantom(
    spec: &PhantomSpec,
    seq: &SequenceParams,
    profile: &SliceProfile,
    grid: &SimGrid,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Phantom, VoxelGrid)> {
    spec.validate()?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::config(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let n = spec.width * spec.height;
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut tissues: Vec<TissueParams> = Vec::new();
    for r in &spec.regions {
        let (t1, t2) = r.tissue();
        let id = match tissues.iter().position(|p| p.t1_ms == t1 && p.t2_ms == t2) {
            Some(id) => id,
            None => {
                tissues.push(TissueParams { t1_ms: t1, t2_ms: t2 });
                tissues.len() - 1
            }
        };
        for (x, y) in spec.pixels(r) {
            label[y * spec.width + x] = Some(id);
        }
    }
    let (fingerprints, _) = simulate_dictionary(&tissues, seq, profile, grid)?;

    let n_frames = seq.n_frames();
    let mut signals = VoxelGrid::zeros(spec.width, spec.height, n_frames);
    let mut t1_map = vec![0.0; n];
    let mut t2_map = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, l) in label.iter().enumerate() {
        let Some(id) = *l else { continue };
        t1_map[i] = tissues[id].t1_ms;
        t2_map[i] = tissues[id].t2_ms;
        let atom = fingerprints.atom(id);
        let out = signals.pixel_mut(i % spec.width, i / spec.width);
        out.copy_from_slice(atom);
        if noise_sigma > 0.0 {
            let sd = noise_sigma * l2_norm(atom) / (n_frames as f64).sqrt();
            let normal = Normal::new(0.0, sd).map_err(|e| Error::numeric(format!("noise: {e}")))?;
            out.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    let phantom = Phantom { width: spec.width, height: spec.height, t1_map, t2_map, spec: spec.clone() };
    Ok((phantom, signals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::default_sequence;

    fn quick(spec: &PhantomSpec, sigma: f64, seed: u64) -> (Phantom, VoxelGrid) {
        let seq = default_sequence(30, 0).unwrap();
        make_phantom(spec, &seq, &SliceProfile::hann_sinc(3).unwrap(), &SimGrid::new(3, 4).unwrap(), sigma, seed).unwrap()
    }

    #[test]
    fn brain_has_three_tissues() {
        let spec = PhantomSpec::brain();
        spec.validate().unwrap();
        let (ph, _) = quick(&spec, 0.0, 0);
        let t = ph.tissues();
        assert_eq!(t.len(), 3);
        assert!(ph.t1_map.iter().any(|&v| v == 0.0), "corners are background");
    }

    #[test]
    fn later_regions_win() {
        let spec = PhantomSpec::from_toml_str(
            r#"
            width = 4
            height = 2
            [[regions]]
            shape = "rect"
            x = 0
            y = 0
            width = 4
            height = 2
            t1_ms = 1000
            t2_ms = 100
            [[regions]]
            shape = "disc"
            cx = 3.5
            cy = 0.5
            radius = 0.1
            t1_ms = 500
            t2_ms = 50
            "#,
        )
        .unwrap();
        let (ph, sig) = quick(&spec, 0.0, 0);
        assert_eq!(ph.t1_map, vec![1000.0, 1000.0, 1000.0, 500.0, 1000.0, 1000.0, 1000.0, 1000.0]);
        assert_eq!(sig.pixel(0, 0), sig.pixel(3, 1));
        assert_ne!(sig.pixel(0, 0), sig.pixel(3, 0));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = PhantomSpec::brain();
        spec.regions.push(Region::Disc { cx: 10.0, cy: 10.0, radius: 0.2, t1_ms: 900.0, t2_ms: 90.0 });
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("region 5 covers no pixels"), "{err}");
        let bad = PhantomSpec {
            width: 2,
            height: 2,
            regions: vec![Region::Rect { x: 0.0, y: 0.0, width: 2.0, height: 2.0, t1_ms: 50.0, t2_ms: 80.0 }],
        };
        assert!(bad.validate().is_err());
        assert!(PhantomSpec::from_toml_str("width = 2\nheight = 2\nregions = []\ncolour = 1\n").is_err());
        let unknown_field = "width = 2\nheight = 2\n[[regions]]\nshape = \"disc\"\ncx = 1\ncy = 1\nradius = 1\nt1_ms = 9\nt2_ms = 1\nx = 0\n";
        assert!(PhantomSpec::from_toml_str(unknown_field).is_err());
        let round = PhantomSpec::from_toml_str(&PhantomSpec::brain().to_toml_string()).unwrap();
        assert_eq!(round, PhantomSpec::brain());
    }

    #[test]
    fn seeded_noise_is_reproducible_and_scaled() {
        let spec = PhantomSpec::brain();
        let (_, a) = quick(&spec, 0.05, 9);
        let (_, b) = quick(&spec, 0.05, 9);
        let (_, c) = quick(&spec, 0.05, 10);
        let (_, clean) = quick(&spec, 0.0, 9);
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Empirical noise level over the white matter core, relative to the signal RMS.
        let (mut ss, mut sig, mut count) = (0.0, 0.0, 0);
        for y in 28..36 {
            for x in 28..36 {
                for (n, s) in a.pixel(x, y).iter().zip(clean.pixel(x, y)) {
                    ss += (n - s).powi(2);
                    sig += s * s;
                    count += 1;
                }
            }
        }
        let ratio = (ss / count as f64).sqrt() / (sig / count as f64).sqrt();
        assert!((ratio - 0.05).abs() < 0.005, "{ratio}");
    }
}
