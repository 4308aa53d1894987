//! Poisson threshold discrimination of bright and dark count distributions.

pub mod decay;
pub mod histogram;
pub mod poisson;
pub mod report;
pub mod threshold;

pub use decay::{decay_error, decay_pdf, DecayError, DecayModel};
pub use histogram::{
    build_histograms, estimate_rate, CountHistogram, IonHistograms, RateEstimate,
    DEFAULT_MIN_WINDOWS,
};
pub use report::{build_chain_report, chain_error, evaluate, ChainReport, DiscriminationResult};
pub use threshold::{
    discrimination_error, optimal_threshold, threshold_crossing, DiscriminationError,
};
