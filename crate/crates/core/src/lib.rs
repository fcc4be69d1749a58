//! Corticospinal tract integrity toolkit: NIfTI-1 mask I/O, tract/haematoma
//! integrity metrics, cohort outcome regression and synthetic phantoms.

pub mod calibration;
pub mod cohort;
pub mod error;
pub mod exec;
pub mod integrity;
pub mod mask;
pub mod nifti;
pub mod phantom;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
