//! Isochromat-summation Bloch simulation of the FISP fingerprinting sequence.
//!
//! Rotation convention: an RF pulse of angle `alpha` at azimuth `phase`
//! rotates the magnetization clockwise (left-handed) about the transverse
//! axis `(cos phase, sin phase, 0)`, so a 90° pulse at phase 0 takes
//! `(0, 0, 1)` to `(0, 1, 0)`.

mod profile;
mod simulate;

pub use profile::{SliceProfile, PROFILE_EXTENT};
pub use simulate::{
    simulate_dictionary, simulate_dictionary_with, simulate_fingerprint, Execution, SimGrid,
    SimTiming, DEFAULT_N_DEPHASE, DEFAULT_N_PROFILE,
};

use crate::tissue::TissueParams;

/// Magnetization of one spin packet, in units of the equilibrium M0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsochromatState {
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl Default for IsochromatState {
    fn default() -> Self {
        Self::EQUILIBRIUM
    }
}

impl IsochromatState {
    pub const EQUILIBRIUM: IsochromatState = IsochromatState { mx: 0.0, my: 0.0, mz: 1.0 };

    pub fn new(mx: f64, my: f64, mz: f64) -> Self {
        IsochromatState { mx, my, mz }
    }

    pub fn norm(&self) -> f64 {
        (self.mx * self.mx + self.my * self.my + self.mz * self.mz).sqrt()
    }
}

/// RF rotation matrix for a pulse of `alpha_deg` at azimuth `phase_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfRotation {
    m: [[f64; 3]; 3],
}

impl RfRotation {
    pub fn new(alpha_deg: f64, phase_deg: f64) -> Self {
        let (sa, ca) = alpha_deg.to_radians().sin_cos();
        let (sp, cp) = phase_deg.to_radians().sin_cos();
        // Rodrigues with angle -alpha about n = (cp, sp, 0).
        let (nx, ny) = (cp, sp);
        let c1 = 1.0 - ca;
        let m = [
            [ca + nx * nx * c1, nx * ny * c1, -ny * sa],
            [nx * ny * c1, ca + ny * ny * c1, nx * sa],
            [ny * sa, -nx * sa, ca],
        ];
        RfRotation { m }
    }

    #[inline]
    pub fn apply(&self, s: IsochromatState) -> IsochromatState {
        let m = &self.m;
        IsochromatState {
            mx: m[0][0] * s.mx + m[0][1] * s.my + m[0][2] * s.mz,
            my: m[1][0] * s.mx + m[1][1] * s.my + m[1][2] * s.mz,
            mz: m[2][0] * s.mx + m[2][1] * s.my + m[2][2] * s.mz,
        }
    }
}

pub fn rf_rotate(state: IsochromatState, alpha_deg: f64, phase_deg: f64) -> IsochromatState {
    RfRotation::new(alpha_deg, phase_deg).apply(state)
}

/// Closed-form free relaxation over `dt_ms`.
pub fn relax(state: IsochromatState, dt_ms: f64, tissue: &TissueParams) -> IsochromatState {
    let e1 = (-dt_ms / tissue.t1_ms).exp();
    let e2 = (-dt_ms / tissue.t2_ms).exp();
    relax_factors(state, e1, e2)
}

#[inline]
pub(crate) fn relax_factors(s: IsochromatState, e1: f64, e2: f64) -> IsochromatState {
    IsochromatState {
        mx: s.mx * e2,
        my: s.my * e2,
        mz: s.mz * e1 + (1.0 - e1),
    }
}

/// Rotates the transverse components about z by `phi_rad` (counter-clockwise).
pub fn dephase(state: IsochromatState, phi_rad: f64) -> IsochromatState {
    let (s, c) = phi_rad.sin_cos();
    dephase_cs(state, c, s)
}

#[inline]
pub(crate) fn dephase_cs(st: IsochromatState, c: f64, s: f64) -> IsochromatState {
    IsochromatState {
        mx: st.mx * c - st.my * s,
        my: st.mx * s + st.my * c,
        mz: st.mz,
    }
}
