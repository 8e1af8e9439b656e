//! Behavioral model of a ferroelectric-FET time-domain compute-in-memory fabric.
//!
//! Each row of the fabric is a delay chain whose per-stage load capacitors are
//! gated by a two-FeFET XOR/AND cell. The number of activated loads shows up as
//! extra propagation delay, so a single chain computes either a binary dot
//! product (AND mode) or a Hamming distance (XOR mode). On top of the circuit
//! model sit Monte Carlo / design-space studies, a hyperdimensional-computing
//! workload, and a MAC/CAM tile allocator.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `tdcim` companion crate.
//!
//! Module map, bottom-up:
//!
//! - [`device`]: single FeFET compact model (threshold state, conductance, variation)
//! - [`cell`]: 2FeFET push-pull cell and its internal-node voltage
//! - [`chain`]: buffer / inverter delay chains, analytical and transient
//! - [`array`]: rows x cols fabric with MAC and CAM operations
//! - [`fabric`]: tiling of large matrices over many arrays
//! - [`analysis`]: Monte Carlo, design-space sweeps, efficiency metrics
//! - [`hdc`]: hyperdimensional encoder, trainer and classifier
//! - [`allocation`]: MAC/CAM tile allocation and energy/latency accounting
//!
//! ```
//! use tdcim_core::array::{ArrayConfig, Fidelity, TdCimArray};
//! use tdcim_core::bits::BitVector;
//! use tdcim_core::rng;
//!
//! # fn main() -> tdcim_core::Result<()> {
//! let mut rng = rng::seeded(1);
//! let mut array = TdCimArray::new(ArrayConfig::new(2, 6), &mut rng)?;
//! array.write_row(0, &BitVector::parse("101100")?, &mut rng)?;
//! array.write_row(1, &BitVector::parse("011010")?, &mut rng)?;
//! let search = array.cam_search(&BitVector::parse("101000")?, Fidelity::Divider)?;
//! assert_eq!(search.counts, [1, 3]);
//! assert_eq!(search.best_match, Some(0));
//! # Ok(())
//! # }
//! ```

#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod allocation;
pub mod analysis;
pub mod array;
pub mod bits;
pub mod cell;
pub mod chain;
pub mod device;
mod error;
pub mod fabric;
pub mod hdc;
pub mod rng;

pub use crate::error::{Error, Result};
