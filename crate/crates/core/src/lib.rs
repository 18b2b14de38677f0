//! Second-order interference of continuous-variable EPR states.
//!
//! A mixed EPR state is the zero-mean two-mode Gaussian state fixed by
//! `<a†a> = <b†b> = nbar` and `<ab> = -mc`. This crate evaluates its
//! Hanbury-Brown–Twiss intensity correlations, the second-order fringe
//! visibility and the associated witness mean, the Hong-Ou-Mandel
//! coincidence dip for phase-diffusing wave packets, and emulates a
//! shot-noise limited counting experiment that estimates the visibility.
//!
//! Every closed form is cross-checked against [`fock`], a brute-force
//! truncated Fock-space construction that shares no code with the
//! Wick-pairing engine in [`moments`].

pub mod cli;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod hbt;
pub mod hom;
pub mod moments;
pub mod state;

pub use error::{Error, Result};
pub use state::{EprParams, StateClass, ThermalWeights};
