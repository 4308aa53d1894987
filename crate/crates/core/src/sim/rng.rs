use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from the master seed.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stream {
    Trajectory,
    Fluorescence,
    CrosstalkFromLeft,
    CrosstalkFromRight,
    Background,
    Residual,
    Afterpulse,
    Raster,
}

/// ChaCha stream for one (ion, purpose) pair. Streams never overlap, so
/// per-ion generation can run in any order or in parallel.
pub(crate) fn stream_rng(seed: u64, ion: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ion as u64) << 8) | stream as u64);
    rng
}
