//! Cycle and phase recovery (CPR) for periodic streams privatized under
//! w-event local differential privacy.
//!
//! A device normalizes its stream to `[0, 1]` and perturbs every sample
//! with the square-wave randomizer at `eps0 = epsilon / w`. The server sees
//! only that privatized stream: it estimates the dominant period from
//! multi-scale FFT candidates validated in the time domain, pools samples
//! by phase, decodes each pool with an EM fit of the randomizer, and takes
//! the KDE mode of the decoded values as that phase's level. Tiling the
//! recovered cycle gives the reconstruction.
//!
//! ```no_run
//! use cpr::{cpr_reconstruct, CprConfig, DetectionConfig, EmConfig, RawSeries, RngSeed};
//!
//! let raw = RawSeries::new((0..1000).map(|t| (t as f64 / 40.0 * std::f64::consts::TAU).sin()).collect())?;
//! let config = CprConfig {
//!     detection: DetectionConfig::for_length(raw.len())?,
//!     em: EmConfig::default(),
//! };
//! let out = cpr_reconstruct(&raw, 5.0, 5, &config, &mut RngSeed(7).rng())?;
//! println!("period {}", out.period());
//! # Ok::<(), cpr::Error>(())
//! ```

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod ldp;
pub mod period;
pub mod phase;
pub mod signal;

pub use error::{Error, Result};
pub use ldp::{split_budget, sw_params, BudgetSplit, RngSeed, SwParams};
pub use period::{detect_period, DetectionConfig, ScaleEstimate};
pub use phase::{cpr_reconstruct, privatize, recover, CprConfig, CprOutput, EmConfig, GridKernel};
pub use signal::{CycleTemplate, NormalizedSeries, RawSeries};
