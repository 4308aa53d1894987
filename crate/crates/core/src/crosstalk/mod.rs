//! Afterpulse and optical crosstalk characterisation.

mod coincidence;
mod fit;
mod matrix;
mod veto;

pub use coincidence::{coincidence_histogram, CoincidenceHistogram};
pub use fit::{afterpulse_probability, fit_peak, AfterpulseEstimate, PeakFit, PeakOutcome};
pub use matrix::{optical_crosstalk_matrix, CrosstalkMatrix};
pub use veto::{veto_filter, veto_neighbors, veto_window_ticks, VETO_WINDOW_NS};
