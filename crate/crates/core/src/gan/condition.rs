use crate::error::{Error, Result};
use crate::sequence::SequenceParams;
use crate::tissue::TissueParams;

pub const DESCRIPTOR_BINS: usize = 16;
/// Affine ranges mapped onto [-1, 1] for the sequence descriptor.
pub const DESCRIPTOR_FA_RANGE_DEG: (f64, f64) = (0.0, 180.0);
pub const DESCRIPTOR_TR_RANGE_MS: (f64, f64) = (0.0, 30.0);

fn to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    2.0 * (v - lo) / (hi - lo) - 1.0
}

/// Frame-averaged FA and TR in `bins` contiguous bins, FA bins first.
pub fn sequence_descriptor(seq: &SequenceParams, bins: usize) -> Vec<f64> {
    let n = seq.n_frames();
    let bin_means = |values: &[f64]| -> Vec<f64> {
        (0..bins)
            .map(|b| {
                let start = (b * n / bins).min(n - 1);
                let end = ((b + 1) * n / bins).max(start + 1).min(n);
                values[start..end].iter().sum::<f64>() / (end - start) as f64
            })
            .collect()
    };
    let fa = bin_means(&seq.flip_angles_deg)
        .into_iter()
        .map(|v| to_unit(v, DESCRIPTOR_FA_RANGE_DEG));
    let tr = bin_means(&seq.tr_ms)
        .into_iter()
        .map(|v| to_unit(v, DESCRIPTOR_TR_RANGE_MS));
    fa.chain(tr).collect()
}

/// Maps tissue parameters (and optionally the sequence) to the generator's
/// conditioning vector `y`.
///
/// `log10 T1` and `log10 T2` are mapped affinely so the training grid spans
/// [-1, 1]; the sequence descriptor, when present, is appended.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMap {
    pub log_t1_range: (f64, f64),
    pub log_t2_range: (f64, f64),
    /// Number of descriptor bins; 0 means tissue-only conditioning.
    pub descriptor_bins: usize,
}

fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let l = v.log10();
        (lo.min(l), hi.max(l))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

impl ConditionMap {
    pub fn fit(params: &[TissueParams], with_descriptor: bool) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::config("cannot fit a condition map to an empty grid"));
        }
        Ok(ConditionMap {
            log_t1_range: log_range(params.iter().map(|p| p.t1_ms)),
            log_t2_range: log_range(params.iter().map(|p| p.t2_ms)),
            descriptor_bins: if with_descriptor { DESCRIPTOR_BINS } else { 0 },
        })
    }

    pub fn y_dim(&self) -> usize {
        2 + 2 * self.descriptor_bins
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && hi > lo;
        if !ok(self.log_t1_range) || !ok(self.log_t2_range) {
            return Err(Error::format("condition map ranges must be finite and increasing"));
        }
        if self.descriptor_bins > 4096 {
            return Err(Error::format("implausible descriptor bin count"));
        }
        Ok(())
    }

    pub fn tissue_part(&self, p: &TissueParams) -> [f64; 2] {
        [
            to_unit(p.t1_ms.log10(), self.log_t1_range),
            to_unit(p.t2_ms.log10(), self.log_t2_range),
        ]
    }

    /// Descriptor for `seq`, empty in tissue-only mode.
    pub fn descriptor(&self, seq: &SequenceParams) -> Vec<f64> {
        if self.descriptor_bins == 0 {
            Vec::new()
        } else {
            sequence_descriptor(seq, self.descriptor_bins)
        }
    }

    pub fn condition(&self, p: &TissueParams, descriptor: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 + descriptor.len());
        y.extend_from_slice(&self.tissue_part(p));
        y.extend_from_slice(descriptor);
        y
    }
}
