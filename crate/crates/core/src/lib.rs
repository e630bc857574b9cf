//! Linear multiuser receivers for uplink massive MIMO with one-bit ADCs.
//!
//! The crate builds eight combining matrices (MRC, ZF, MMSE, AQNM-MMSE, WFQ
//! and the Bussgang-based BMRC, BZF, BMMSE), runs them through a common
//! equalize → rescale → detect chain and estimates bit error rates by Monte
//! Carlo simulation over i.i.d. Rayleigh channels.

pub mod bussgang;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod receivers;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use receivers::{build_combiner, ChannelContext, Combiner, ReceiverKind};
pub use signal::{Constellation, Modulation, SystemConfig};
pub use sim::{ber_sweep, error_floor_sweep, BerRecord, TrialPlan};
