//! Simulation and analysis of single-photon readout for trapped-ion qubit
//! registers imaged onto a time-stamping pixel camera.
//!
//! The crate is organised along the data path:
//!
//! * [`sim`] generates seeded ion state trajectories and the resulting photon
//!   stream (fluorescence, optical crosstalk, background, afterpulses).
//! * [`pixel`] turns photons into raw pixel hits and back again by clustering,
//!   ToT-weighted centroiding and time-walk correction.
//! * [`segment`] recovers bright/dark periods from photon delays and slices
//!   them into fixed integration windows.
//! * [`discrim`] fits Poisson count distributions, chooses the threshold and
//!   evaluates discrimination, decay and multi-qubit errors.
//! * [`crosstalk`] characterises afterpulsing and optical leakage between
//!   neighbouring ions.
//! * [`pipeline`] chains ROI assignment, veto, segmentation and discrimination.
//! * [`io`] holds the event container format, run configuration and report
//!   writers used by the command-line tool.

pub mod crosstalk;
pub mod discrim;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod pixel;
pub mod segment;
pub mod sim;
pub mod units;

pub use error::{Error, Result};

/// Qubit state as seen through fluorescence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Bright,
    Dark,
}

impl State {
    pub fn flipped(self) -> State {
        match self {
            State::Bright => State::Dark,
            State::Dark => State::Bright,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            State::Bright => "bright",
            State::Dark => "dark",
        }
    }
}
