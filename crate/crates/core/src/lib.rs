//! Magnetic resonance fingerprinting dictionary engine.
//!
//! Bloch/FISP simulation of fingerprint dictionaries, a conditional GAN that
//! learns to synthesize them, and the pattern matching used to turn either
//! kind of dictionary into T1/T2 maps.

pub mod bloch;
pub mod dictionary;
pub mod error;
pub mod gan;
pub mod matching;
pub mod nn;
pub mod sequence;
pub mod split;
pub mod tissue;

pub use bloch::Execution;
pub use dictionary::{normalize_atoms, scale_for_training, Dictionary};
pub use error::{Error, Result};
pub use sequence::{default_sequence, SequenceParams};
pub use split::{split_dataset, DatasetSplit};
pub use tissue::{expand_grid, GridSpec, Segment, TissueParams};
