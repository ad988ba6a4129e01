//! Passive harmonic filter design and six-pulse rectifier harmonic analysis.
//!
//! * [`filter_design`] sizes single-tuned and second-order high-pass shunt
//!   branches from closed-form relations.
//! * [`network`] evaluates branch and bank impedance over frequency and
//!   locates series/parallel resonances.
//! * [`simulator`] integrates the three-phase source, filter bank and diode
//!   bridge in the time domain.
//! * [`analyzer`] extracts harmonic spectra, THD and power factor from
//!   steady-state windows.
//! * [`cli`] wires the above into batch commands.

pub mod analyzer;
pub mod cli;
pub mod error;
pub mod exec;
pub mod filter_design;
pub mod network;
pub mod scenario;
pub mod simulator;
pub mod svg;

pub use error::{Error, Result};
