//! Seeded Monte Carlo generation of ion trajectories and photon streams.

pub mod afterpulse;
pub mod config;
pub(crate) mod rng;
pub mod stream;
pub mod trajectory;

pub use afterpulse::{inject_afterpulses, AfterpulseInjector};
pub use config::{ion_sites, AfterpulseDirection, ChainConfig, InitialState};
pub use stream::{generate_photon_stream, PhotonEvent, PhotonStream, SourceKind, Truth};
pub use trajectory::{simulate_trajectories, state_at, StateSegment};

/// Trajectories plus the complete photon stream, afterpulses included.
pub fn simulate(cfg: &ChainConfig) -> crate::Result<(Vec<Vec<StateSegment>>, Vec<PhotonEvent>)> {
    let traj = simulate_trajectories(cfg)?;
    let stream = AfterpulseInjector::new(PhotonStream::new(cfg, &traj)?, cfg).collect();
    Ok((traj, stream))
}
